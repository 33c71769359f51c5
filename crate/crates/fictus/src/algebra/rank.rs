use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dm::{dulmage_mendelsohn, DMDecomposition};
use super::matching::maximum_matching;
use super::pattern::{build_prolonged_matrix, ProlongedMatrix};
use super::{compute_h, find_min_prolongation, prolongation_counts, ProlongationCounts};
use crate::error::{Error, Result};
use crate::linalg::rcond;
use crate::model::CoupledSystem;

/// Default reciprocal-condition threshold for "nonsingular".
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullyActuated,
    CGeH,
    CLtH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Solvable,
    NotSolvable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub p: usize,
    /// Highest prolongation level among the selected rows.
    pub q: usize,
    pub size: usize,
    /// 1-based row and column indices in the prolonged matrix.
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub rcond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityReport {
    pub h: usize,
    pub regime: Regime,
    pub verdict: Verdict,
    /// 1-based equation indices (rank check) or candidate rows (square check).
    pub failing_subset: Option<Vec<usize>>,
    pub p_min: Option<usize>,
    pub p_used: Option<usize>,
    pub counts: Option<ProlongationCounts>,
    pub condition_numbers: Vec<f64>,
    pub candidate: Option<CandidateSummary>,
    /// Numeric full rank of the unprolonged structural matrix.
    pub unprolonged_full_rank: Option<bool>,
    pub notes: Vec<String>,
}

/// Rank-condition matrix for the equation subset `alphas` (0-based, ⊆ 0..c).
/// Row i is (a_{(c+1)α_i} … a_{mα_i}, g¹_{(c+1)α_i} … g¹_{mα_i}, …, gⁿ_{…}).
pub fn build_c(sys: &CoupledSystem, alphas: &[usize]) -> Result<DMatrix<f64>> {
    let h = compute_h(sys.m, sys.c, sys.n);
    if alphas.len() != h {
        return Err(Error::InvalidArgument(format!("subset has {} indices, expected h = {h}", alphas.len())));
    }
    let mut seen = alphas.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != alphas.len() {
        return Err(Error::InvalidArgument("repeated indices in subset".into()));
    }
    if alphas.iter().any(|&a| a >= sys.c) {
        return Err(Error::InvalidArgument("subset must lie within the actuated equations".into()));
    }
    let w = sys.m - sys.c;
    Ok(DMatrix::from_fn(h, h, |i, col| {
        let (block, off) = (col / w, col % w);
        let k = sys.c + off;
        if block == 0 {
            sys.a[k][alphas[i]]
        } else {
            sys.g[k][alphas[i]][block - 1]
        }
    }))
}

fn regime_of(sys: &CoupledSystem) -> (usize, Regime) {
    let h = compute_h(sys.m, sys.c, sys.n);
    let regime = if sys.c == sys.m {
        Regime::FullyActuated
    } else if sys.c >= h {
        Regime::CGeH
    } else {
        Regime::CLtH
    };
    (h, regime)
}

fn base_report(sys: &CoupledSystem) -> SolvabilityReport {
    let (h, regime) = regime_of(sys);
    let p_min = find_min_prolongation(sys.m, sys.n, sys.c, 64).ok();
    SolvabilityReport {
        h,
        regime,
        verdict: Verdict::Inconclusive,
        failing_subset: None,
        p_min,
        p_used: None,
        counts: p_min.map(|p| prolongation_counts(sys.m, sys.n, sys.c, p)),
        condition_numbers: Vec::new(),
        candidate: None,
        unprolonged_full_rank: None,
        notes: Vec::new(),
    }
}

/// Lexicographic k-subsets of 0..n.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn check_rank_condition(sys: &CoupledSystem) -> SolvabilityReport {
    check_rank_condition_tol(sys, RCOND_THRESHOLD)
}

/// Enumerates every size-h subset of the actuated equations when c ≥ h and
/// stops at the first singular C.
pub fn check_rank_condition_tol(sys: &CoupledSystem, tol: f64) -> SolvabilityReport {
    let mut rep = base_report(sys);
    match rep.regime {
        Regime::FullyActuated => {
            rep.verdict = Verdict::Solvable;
            rep.p_min = Some(0);
        }
        Regime::CGeH => {
            rep.verdict = Verdict::Solvable;
            for s in subsets(sys.c, rep.h) {
                let cm = build_c(sys, &s).expect("subset built within range");
                let rc = rcond(&cm);
                rep.condition_numbers.push(rc);
                if !(rc >= tol) {
                    rep.verdict = Verdict::NotSolvable;
                    rep.failing_subset = Some(s.iter().map(|i| i + 1).collect());
                    break;
                }
            }
        }
        Regime::CLtH => {
            rep.notes.push("c < h: rank condition does not apply; a square candidate is required".into());
        }
    }
    rep
}

/// Square block selected inside the overdetermined part of the prolonged matrix.
#[derive(Debug, Clone)]
pub struct SquareCandidate {
    pub prolonged: ProlongedMatrix,
    pub dm: DMDecomposition,
    pub q: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub rcond: f64,
}

impl SquareCandidate {
    pub fn summary(&self) -> CandidateSummary {
        CandidateSummary {
            p: self.prolonged.p,
            q: self.q,
            size: self.rows.len(),
            rows: self.rows.iter().map(|r| r + 1).collect(),
            cols: self.cols.iter().map(|c| c + 1).collect(),
            rcond: self.rcond,
        }
    }
}

/// Takes rows of the overdetermined DM block prolonged at most q times, for the
/// smallest q whose rows outnumber the unknowns they touch and reach every
/// underived ψ_{c+1..m}; the lowest-index rows are kept to make it square.
pub fn find_square_candidate(sys: &CoupledSystem, p: usize) -> Result<SquareCandidate> {
    let pm = build_prolonged_matrix(sys, p);
    let mt = maximum_matching(&pm.pattern);
    let dm = dulmage_mendelsohn(&pm.pattern, &mt)?;
    let pool: Vec<usize> = dm.vr.iter().copied().filter(|&r| pm.row_labels[r].eq < sys.c).collect();
    if pool.is_empty() {
        return Err(Error::NoSquareCandidate(p));
    }
    let radj = pm.pattern.row_adjacency();
    let base: Vec<usize> = pm
        .col_labels
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.time && l.alpha.iter().all(|&a| a == 0))
        .map(|(i, _)| i)
        .collect();
    for q in 0..=p {
        let rows_q: Vec<usize> = pool.iter().copied().filter(|&r| pm.level(r) <= q).collect();
        let mut cols: Vec<usize> = rows_q.iter().flat_map(|&r| radj[r].iter().copied()).collect();
        cols.sort_unstable();
        cols.dedup();
        if rows_q.len() < cols.len() || !base.iter().all(|b| cols.binary_search(b).is_ok()) {
            continue;
        }
        let rows: Vec<usize> = rows_q[..cols.len()].to_vec();
        let dense = pm.pattern.to_dense();
        let matrix = DMatrix::from_fn(rows.len(), cols.len(), |i, j| dense[(rows[i], cols[j])]);
        let rc = rcond(&matrix);
        return Ok(SquareCandidate { prolonged: pm, dm, q, rows, cols, matrix, rcond: rc });
    }
    Err(Error::NoSquareCandidate(p))
}

pub fn check_square_candidate(sys: &CoupledSystem, p: usize) -> Result<SolvabilityReport> {
    check_square_candidate_tol(sys, p, RCOND_THRESHOLD)
}

pub fn check_square_candidate_tol(sys: &CoupledSystem, p: usize, tol: f64) -> Result<SolvabilityReport> {
    let cand = find_square_candidate(sys, p)?;
    let mut rep = base_report(sys);
    rep.p_used = Some(p);
    rep.counts = Some(cand.prolonged.counts);
    rep.condition_numbers.push(cand.rcond);
    if cand.rcond >= tol {
        rep.verdict = Verdict::Solvable;
    } else {
        rep.verdict = Verdict::NotSolvable;
        rep.failing_subset = Some(cand.rows.iter().map(|r| r + 1).collect());
    }
    rep.notes.push(format!(
        "square candidate of size {} from rows prolonged at most {} times (lowest-index rows kept)",
        cand.rows.len(),
        cand.q
    ));
    rep.candidate = Some(cand.summary());
    Ok(rep)
}

fn unprolonged_full_rank(sys: &CoupledSystem) -> bool {
    let pm = build_prolonged_matrix(sys, 0);
    let d = pm.pattern.to_dense();
    let sv = d.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > smax * 1e-12).count();
    rank == d.nrows().min(d.ncols())
}

/// Full algebraic decision: rank condition when it applies, then the
/// smallest p ≤ p_max admitting a square candidate.
pub fn decide_solvability(sys: &CoupledSystem, p_max: usize, tol: f64) -> SolvabilityReport {
    let mut rep = check_rank_condition_tol(sys, tol);
    if rep.regime == Regime::FullyActuated {
        rep.p_used = Some(0);
        return rep;
    }
    rep.unprolonged_full_rank = Some(unprolonged_full_rank(sys));
    if rep.unprolonged_full_rank == Some(false) {
        rep.notes.push("unprolonged structural matrix is numerically rank deficient".into());
    }
    if rep.verdict == Verdict::NotSolvable {
        return rep;
    }
    for p in 0..=p_max {
        match check_square_candidate_tol(sys, p, tol) {
            Ok(sq) => {
                rep.p_used = Some(p);
                rep.counts = sq.counts;
                rep.candidate = sq.candidate;
                rep.notes.extend(sq.notes);
                if rep.regime == Regime::CLtH || sq.verdict == Verdict::NotSolvable {
                    rep.verdict = sq.verdict;
                    rep.failing_subset = sq.failing_subset;
                    rep.condition_numbers.extend(sq.condition_numbers);
                }
                return rep;
            }
            Err(Error::NoSquareCandidate(_)) => continue,
            Err(e) => {
                rep.notes.push(e.to_string());
                rep.verdict = Verdict::Inconclusive;
                return rep;
            }
        }
    }
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push(format!("no square candidate found for p ≤ {p_max}"));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_subsets() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
    }
}
