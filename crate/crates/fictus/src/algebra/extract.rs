use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::operator::{apply_operator_polynomial, DifferentialOperator, ScalarOp};
use super::poly::Polynomial;
use super::rank::{find_square_candidate, RCOND_THRESHOLD};
use super::{multi_indices, order};
use crate::error::{Error, Result};
use crate::model::CoupledSystem;

fn unit(n: usize, i: usize) -> Vec<u32> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// ∂t − div(d_l∇) as a scalar operator.
fn heat_op(sys: &CoupledSystem, l: usize) -> ScalarOp {
    let n = sys.n;
    let mut s = ScalarOp::single(1, vec![0; n], 1.0);
    for i in 0..n {
        for k in 0..n {
            let mut al = vec![0; n];
            al[i] += 1;
            al[k] += 1;
            s.add(0, al, -sys.d[l][i][k]);
        }
    }
    s
}

/// g_{li}·∇ + a_{li} as a scalar operator.
fn coupling_op(sys: &CoupledSystem, l: usize, i: usize) -> ScalarOp {
    let n = sys.n;
    let mut s = ScalarOp::single(0, vec![0; n], sys.a[l][i]);
    for dir in 0..n {
        s.add(0, unit(n, dir), sys.g[l][i][dir]);
    }
    s
}

/// Builds 𝓑 with 𝓛∘𝓑 = Id, mapping m fictitious-control fields to (ŷ, û).
///
/// State rows come from the inverse of the square candidate (rows of the
/// prolonged adjoint system solved for ψ_{c+1..m}, then transposed); control
/// rows are û_l = (∂t − div(d_l∇))ŷ_l − Σ_i (g_{li}·∇ + a_{li}) ŷ_i − ũ_l.
pub fn extract_inverse_operator(sys: &CoupledSystem, p: usize) -> Result<DifferentialOperator> {
    extract_with_threshold(sys, p, RCOND_THRESHOLD)
}

pub(crate) fn extract_with_threshold(sys: &CoupledSystem, p: usize, tol: f64) -> Result<DifferentialOperator> {
    sys.check_shapes()?;
    let (m, n, c) = (sys.m, sys.n, sys.c);
    let mut op = DifferentialOperator::zeros(n, m + c, m, p);
    if c == m {
        for l in 0..m {
            op.entries[m + l][l] = ScalarOp::single(0, vec![0; n], -1.0);
        }
        return Ok(op);
    }

    let cand = find_square_candidate(sys, p)?;
    if !(cand.rcond >= tol) {
        return Err(Error::NotSolvableAtP { p, rcond: cand.rcond });
    }
    let inv = cand
        .matrix
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::NotSolvableAtP { p, rcond: cand.rcond })?;
    let labels = &cand.prolonged.col_labels;

    for l in c..m {
        let pos = cand
            .cols
            .iter()
            .position(|&col| !labels[col].time && labels[col].comp == l && order(&labels[col].alpha) == 0)
            .ok_or(Error::NoSquareCandidate(p))?;
        // ψ_l = Σ_r inv[pos, r] ∂^{β_r} φ_{j_r}; the formal adjoint flips odd orders.
        for (r_idx, &row) in cand.rows.iter().enumerate() {
            let lab = &cand.prolonged.row_labels[row];
            let sign = if order(&lab.beta) % 2 == 0 { 1.0 } else { -1.0 };
            op.entries[lab.eq][l].add(0, lab.beta.clone(), sign * inv[(pos, r_idx)]);
        }
    }

    for l in 0..c {
        for input in 0..m {
            let mut s = heat_op(sys, l).compose(&op.entries[l][input]);
            for i in 0..m {
                s.add_scaled(&coupling_op(sys, l, i).compose(&op.entries[i][input]), -1.0);
            }
            if input == l {
                s.add(0, vec![0; n], -1.0);
            }
            op.entries[m + l][input] = s;
        }
    }
    if !op.is_finite() {
        return Err(Error::NotSolvableAtP { p, rcond: cand.rcond });
    }
    Ok(op)
}

/// 𝓛(ŷ, û) for polynomial fields.
fn apply_l(sys: &CoupledSystem, y: &[Polynomial], u: &[Polynomial]) -> Vec<Polynomial> {
    (0..sys.m)
        .map(|j| {
            let mut r = heat_op(sys, j).apply(&y[j]);
            for i in 0..sys.m {
                r.add_scaled(&coupling_op(sys, j, i).apply(&y[i]), -1.0);
            }
            if j < sys.c {
                r.add_scaled(&u[j], -1.0);
            }
            r
        })
        .collect()
}

/// Max coefficient of 𝓛(𝓑φ) − φ over `trials` random polynomial inputs
/// (t-degree ≤ 2, x-degree ≤ p+3), seeded deterministically.
pub fn verify_right_inverse(sys: &CoupledSystem, op: &DifferentialOperator, trials: usize) -> Result<f64> {
    verify_right_inverse_with(sys, op, trials, 0x5eed)
}

pub fn verify_right_inverse_with(sys: &CoupledSystem, op: &DifferentialOperator, trials: usize, seed: u64) -> Result<f64> {
    if op.in_dim != sys.m || op.out_dim != sys.m + sys.c || op.n != sys.n {
        return Err(Error::DimensionMismatch("operator does not match the system".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg_x = (op.p + 3) as u32;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let phi: Vec<Polynomial> = (0..sys.m).map(|_| Polynomial::random(sys.n, 2, deg_x, &mut rng)).collect();
        worst = worst.max(residual_for(sys, op, &phi)?);
    }
    Ok(worst)
}

fn residual_for(sys: &CoupledSystem, op: &DifferentialOperator, phi: &[Polynomial]) -> Result<f64> {
    let out = apply_operator_polynomial(op, phi)?;
    let (y, u) = out.split_at(sys.m);
    let lhs = apply_l(sys, y, u);
    Ok(lhs
        .iter()
        .zip(phi)
        .map(|(l, f)| {
            let mut d = l.clone();
            d.add_scaled(f, -1.0);
            d.max_abs_coef()
        })
        .fold(0.0, f64::max))
}

/// Residual on every monomial t^a x^α with a ≤ 2 and |α| ≤ p+3, one input at a time.
pub fn verify_on_monomials(sys: &CoupledSystem, op: &DifferentialOperator) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for comp in 0..sys.m {
        for a in 0..=2u32 {
            for k in 0..=op.p + 3 {
                for alpha in multi_indices(sys.n, k) {
                    let mut e = vec![a];
                    e.extend(alpha);
                    let phi: Vec<Polynomial> = (0..sys.m)
                        .map(|i| if i == comp { Polynomial::monomial(sys.n, e.clone(), 1.0) } else { Polynomial::zero(sys.n) })
                        .collect();
                    worst = worst.max(residual_for(sys, op, &phi)?);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_actuated_operator_is_minus_identity() {
        let sys = CoupledSystem::one_d(2, &[1.0, 1.0], vec![vec![0.3, 0.1], vec![0.2, 0.4]], vec![vec![1.0, 2.0], vec![0.5, -1.0]], 1.0, 1.0, (0.3, 0.7));
        let op = extract_inverse_operator(&sys, 0).unwrap();
        let phi = vec![Polynomial::monomial(1, vec![1, 1], 1.0); 2];
        let out = apply_operator_polynomial(&op, &phi).unwrap();
        assert!(out[0].terms.is_empty() && out[1].terms.is_empty());
        assert_eq!(out[2], Polynomial::monomial(1, vec![1, 1], -1.0));
        assert_eq!(verify_right_inverse(&sys, &op, 5).unwrap(), 0.0);
    }
}
