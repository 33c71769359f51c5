//! Algebraic solvability: prolongation of the adjoint structural system,
//! bipartite matching, Dulmage–Mendelsohn coarse decomposition and
//! extraction of the right-inverse differential operator.

mod dm;
mod extract;
mod matching;
mod operator;
mod pattern;
mod poly;
mod rank;

pub use dm::{dulmage_mendelsohn, DMDecomposition};
pub use extract::{extract_inverse_operator, verify_on_monomials, verify_right_inverse, verify_right_inverse_with};
pub use matching::{hopcroft_karp, maximum_matching, Matching};
pub use operator::{apply_operator_polynomial, DifferentialOperator, OpKey, ScalarOp};
pub use pattern::{build_prolonged_matrix, ColumnLabel, PatternEntry, ProlongedMatrix, RowLabel, SparsePattern, Tag};
pub use poly::Polynomial;
pub use rank::{
    build_c, check_rank_condition, check_rank_condition_tol, check_square_candidate, check_square_candidate_tol,
    decide_solvability, find_square_candidate,
    CandidateSummary, Regime, SolvabilityReport, SquareCandidate, Verdict, RCOND_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial coefficient, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// All multi-indices of length `n` and order exactly `k`, in descending
/// lexicographic order: (k,0,..), (k-1,1,..), ...
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=k).rev() {
            prefix.push(first);
            rec(n, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, k as u32, &mut Vec::with_capacity(n), &mut out);
    out
}

pub fn order(alpha: &[u32]) -> usize {
    alpha.iter().map(|&v| v as usize).sum()
}

pub fn compute_h(m: usize, c: usize, n: usize) -> usize {
    (m - c.min(m)) * (n + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProlongationCounts {
    pub p: usize,
    pub f_p: usize,
    pub f_p2: usize,
    pub e: usize,
    pub u: usize,
}

pub fn prolongation_counts(m: usize, n: usize, c: usize, p: usize) -> ProlongationCounts {
    let f_p = binomial(p + n, n);
    let f_p2 = binomial(p + 2 + n, n);
    ProlongationCounts { p, f_p, f_p2, e: m * f_p, u: (m - c) * (f_p2 + f_p) }
}

/// Smallest p ≤ p_max with more prolonged equations than unknowns.
pub fn find_min_prolongation(m: usize, n: usize, c: usize, p_max: usize) -> Result<usize> {
    if 2 * c <= m {
        return Err(Error::NoProlongationExists);
    }
    (0..=p_max)
        .find(|&p| {
            let k = prolongation_counts(m, n, c, p);
            k.e > k.u
        })
        .ok_or(Error::LimitExceeded(p_max))
}
