//! Penalized optimal control for the fully actuated system.
//!
//! Discrete optimality system on the implicit Euler grid:
//!
//! ```text
//! ψ^N = φ,              ψ^k = (I − dt M)^{-T} ψ^{k+1}
//! v^{k+1} = −ρ(t_{k+1}) θ ψ^k
//! y^{k+1} = (I − dt M)^{-1} (y^k + dt θ v^{k+1})
//! ```
//!
//! With Λφ = −y_φ(T) (zero initial data) the terminal condition φ = k·y(T)
//! becomes (Λ + I/k) φ = y_free(T), solved by conjugate gradients.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::carleman::{CarlemanWeights, CutoffFamily};
use crate::error::{Error, Result};
use crate::model::CoupledSystem;
use crate::pde::{assemble, inner, l2, solve_adjoint, solve_forward, DiscreteOperator, Grid, TrajectoryField};

/// Operator, sampled weight and cutoff shared by every solve on one grid.
#[derive(Debug, Clone)]
pub struct HumProblem {
    pub opd: DiscreteOperator,
    /// θ at interior nodes.
    pub theta: Vec<f64>,
    /// ρ at (level, node), row-major in time.
    pub rho: Vec<f64>,
    /// ln ρ, −∞ where ρ vanishes.
    pub log_rho: Vec<f64>,
    /// Interior nodes inside ω₀.
    pub omega0: Vec<bool>,
}

impl HumProblem {
    pub fn new(sys: &CoupledSystem, grid: &Grid, weights: &CarlemanWeights, cutoffs: &CutoffFamily) -> Result<Self> {
        let opd = assemble(sys, grid)?;
        let theta = (0..grid.nx).map(|i| cutoffs.theta(grid.x(i))).collect();
        let omega0 = (0..grid.nx).map(|i| cutoffs.in_omega0(grid.x(i))).collect();
        let mut log_rho = Vec::with_capacity((grid.nt + 1) * grid.nx);
        for k in 0..=grid.nt {
            for i in 0..grid.nx {
                log_rho.push(weights.log_rho(grid.t(k), grid.x(i)));
            }
        }
        let rho = weights.rho_grid(grid);
        Ok(HumProblem { opd, theta, rho, log_rho, omega0 })
    }

    pub fn grid(&self) -> Grid {
        self.opd.grid
    }

    pub fn m(&self) -> usize {
        self.opd.m
    }

    fn rho_at(&self, k: usize, i: usize) -> f64 {
        self.rho[k * self.grid().nx + i]
    }

    /// v^{k+1} = −ρ(t_{k+1}) θ ψ^k; level 0 is zero.
    pub fn control_from_adjoint(&self, psi: &TrajectoryField) -> TrajectoryField {
        let g = self.grid();
        let mut v = TrajectoryField::zeros(g, self.m());
        for k in 0..g.nt {
            for comp in 0..self.m() {
                for i in 0..g.nx {
                    *v.at_mut(k + 1, comp, i) = -self.rho_at(k + 1, i) * self.theta[i] * psi.at(k, comp, i);
                }
            }
        }
        v
    }

    /// θ·v as a source field.
    pub fn localize(&self, v: &TrajectoryField) -> TrajectoryField {
        let g = self.grid();
        let mut s = v.clone();
        for k in 0..=g.nt {
            for comp in 0..self.m() {
                for (val, th) in s.slice_comp_mut(k, comp).iter_mut().zip(&self.theta) {
                    *val *= th;
                }
            }
        }
        s
    }

    /// dt·dx·Σ_k ρ(t_{k+1}) θ² |ψ^k|², which equals ∬ρ⁻¹|v|².
    pub fn weighted_control_norm(&self, psi: &TrajectoryField) -> f64 {
        let g = self.grid();
        let mut s = 0.0;
        for k in 0..g.nt {
            for comp in 0..self.m() {
                for i in 0..g.nx {
                    let w = self.rho_at(k + 1, i) * self.theta[i] * self.theta[i];
                    s += w * psi.at(k, comp, i).powi(2);
                }
            }
        }
        s * g.dt * g.dx
    }

    pub fn free_solution(&self, y0: &[f64]) -> Result<TrajectoryField> {
        solve_forward(&self.opd, y0, &TrajectoryField::zeros(self.grid(), self.m()))
    }

    /// y_φ(T) from zero initial data.
    pub fn gramian_apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let psi = solve_adjoint(&self.opd, phi)?;
        let src = self.localize(&self.control_from_adjoint(&psi));
        let zero = vec![0.0; phi.len()];
        Ok(solve_forward(&self.opd, &zero, &src)?.terminal().to_vec())
    }

    /// Λφ = −y_φ(T), symmetric positive semi-definite.
    pub fn lambda_apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gramian_apply(phi)?.into_iter().map(|v| -v).collect())
    }

    /// ψ, v, y for the terminal adjoint datum φ.
    pub fn reconstruct(&self, y0: &[f64], phi: &[f64]) -> Result<(TrajectoryField, TrajectoryField, TrajectoryField)> {
        let psi = solve_adjoint(&self.opd, phi)?;
        let v = self.control_from_adjoint(&psi);
        let y = solve_forward(&self.opd, y0, &self.localize(&v))?;
        Ok((psi, v, y))
    }

    pub fn solve_penalized(&self, y0: &[f64], k: f64, cg_tol: f64, cg_max: usize) -> Result<PenaltyRun> {
        self.solve_penalized_from(y0, k, cg_tol, cg_max, None)
    }

    /// CG on (Λ + I/k)φ = y_free(T), optionally warm-started.
    pub fn solve_penalized_from(&self, y0: &[f64], k: f64, cg_tol: f64, cg_max: usize, start: Option<&[f64]>) -> Result<PenaltyRun> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {k}")));
        }
        let n = self.m() * self.grid().nx;
        if y0.len() != n {
            return Err(Error::DimensionMismatch("initial data length".into()));
        }
        let b = self.free_solution(y0)?.terminal().to_vec();
        let apply = |x: &[f64]| -> Result<Vec<f64>> {
            let mut out = self.lambda_apply(x)?;
            for (o, xi) in out.iter_mut().zip(x) {
                *o += xi / k;
            }
            Ok(out)
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let bnorm = dot(&b, &b).sqrt();
        let mut x = match start {
            Some(s) if s.len() == n => s.to_vec(),
            _ => vec![0.0; n],
        };
        let mut iters = 0;
        let mut rnorm = 0.0;
        if bnorm > 0.0 {
            let ax = apply(&x)?;
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            let done = |rr: f64, x: &[f64]| {
                let rn = rr.sqrt();
                rn <= cg_tol * bnorm && k * rn <= cg_tol * dot(x, x).sqrt()
            };
            loop {
                if done(rr, &x) {
                    // confirm against the true residual before stopping
                    let ax = apply(&x)?;
                    r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                    rr = dot(&r, &r);
                    if done(rr, &x) {
                        break;
                    }
                    p = r.clone();
                }
                if iters >= cg_max {
                    return Err(Error::NotConverged { iters, residual: rr.sqrt() / bnorm });
                }
                let ap = apply(&p)?;
                let pap = dot(&p, &ap);
                if !(pap > 0.0) {
                    break;
                }
                let alpha = rr / pap;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                let rr_new = dot(&r, &r);
                let beta = rr_new / rr;
                for i in 0..n {
                    p[i] = r[i] + beta * p[i];
                }
                rr = rr_new;
                iters += 1;
            }
            rnorm = rr.sqrt() / bnorm;
        }
        debug!("k = {k:e}: {iters} CG iterations, relative residual {rnorm:e}");
        let (psi, v, y) = self.reconstruct(y0, &x)?;
        let g = self.grid();
        let terminal_norm = l2(y.terminal(), g.dx);
        let weighted_control_norm = self.weighted_control_norm(&psi);
        let jk = 0.5 * weighted_control_norm + 0.5 * k * terminal_norm * terminal_norm;
        let xnorm = l2(&x, g.dx);
        let closure = if xnorm > 0.0 {
            let d: Vec<f64> = x.iter().zip(y.terminal()).map(|(p, yt)| p - k * yt).collect();
            l2(&d, g.dx) / xnorm
        } else {
            0.0
        };
        if closure > 10.0 * cg_tol {
            warn!("optimality closure {closure:e} exceeds 10·cg_tol at k = {k:e}");
        }
        Ok(PenaltyRun { k, v, y, psi, jk, terminal_norm, weighted_control_norm, cg_iters: iters, cg_residual: rnorm, closure })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltyRun {
    pub k: f64,
    #[serde(skip)]
    pub v: TrajectoryField,
    #[serde(skip)]
    pub y: TrajectoryField,
    #[serde(skip)]
    pub psi: TrajectoryField,
    pub jk: f64,
    pub terminal_norm: f64,
    pub weighted_control_norm: f64,
    pub cg_iters: usize,
    pub cg_residual: f64,
    /// ‖φ − k·y(T)‖/‖φ‖.
    pub closure: f64,
}

pub fn free_solution(sys: &CoupledSystem, grid: &Grid, y0: &[f64]) -> Result<TrajectoryField> {
    let opd = assemble(sys, grid)?;
    solve_forward(&opd, y0, &TrajectoryField::zeros(*grid, sys.m))
}

pub fn gramian_apply(sys: &CoupledSystem, grid: &Grid, weights: &CarlemanWeights, cutoffs: &CutoffFamily, phi: &[f64]) -> Result<Vec<f64>> {
    HumProblem::new(sys, grid, weights, cutoffs)?.gramian_apply(phi)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_penalized(
    sys: &CoupledSystem,
    grid: &Grid,
    weights: &CarlemanWeights,
    cutoffs: &CutoffFamily,
    y0: &[f64],
    k: f64,
    cg_tol: f64,
    cg_max: usize,
) -> Result<PenaltyRun> {
    HumProblem::new(sys, grid, weights, cutoffs)?.solve_penalized(y0, k, cg_tol, cg_max)
}

/// |J_k − ½⟨y0, ψ(0)⟩| / max(J_k, ε).
pub fn cost_identity_check(run: &PenaltyRun, y0: &[f64]) -> f64 {
    let g = run.psi.grid;
    let half = 0.5 * inner(y0, run.psi.slice(0), g.dx);
    (run.jk - half).abs() / run.jk.max(f64::MIN_POSITIVE)
}

/// ‖ψ(0)‖/‖y0‖, 0 when y0 = 0.
pub fn adjoint_zero_bound_probe(run: &PenaltyRun, y0: &[f64]) -> f64 {
    let g = run.psi.grid;
    let n0 = l2(y0, g.dx);
    if n0 == 0.0 {
        return 0.0;
    }
    l2(run.psi.slice(0), g.dx) / n0
}

/// ∬ e^{2K s₁ α*} |v|², evaluated in log space.
pub fn regularity_proxy(problem: &HumProblem, weights: &CarlemanWeights, run: &PenaltyRun, k_reg: f64) -> f64 {
    let g = problem.grid();
    let mut s = 0.0;
    for k in 0..g.nt {
        let t = g.t(k + 1);
        let Ok((astar, _)) = weights.eval_star_weights(t) else { continue };
        for i in 0..g.nx {
            let lr = problem.log_rho[(k + 1) * g.nx + i];
            if lr == f64::NEG_INFINITY || problem.theta[i] == 0.0 {
                continue;
            }
            for comp in 0..problem.m() {
                let a = problem.theta[i] * run.psi.at(k, comp, i);
                if a == 0.0 {
                    continue;
                }
                s += (2.0 * k_reg * weights.s1 * astar + 2.0 * lr + 2.0 * a.abs().ln()).exp();
            }
        }
    }
    s * g.dt * g.dx
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub k: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltySweep {
    pub runs: Vec<PenaltyRun>,
    pub failures: Vec<SweepFailure>,
    pub terminal_non_increasing: bool,
    pub terminal_strictly_decreasing: bool,
    pub bound_holds: bool,
    pub cost_non_decreasing: bool,
}

/// Runs each k in turn, warm-starting from the previous multiplier.
pub fn penalty_sweep(problem: &HumProblem, y0: &[f64], ks: &[f64], cg_tol: f64, cg_max: usize) -> Result<PenaltySweep> {
    if ks.is_empty() || ks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("penalties must be nonempty and increasing".into()));
    }
    let mut runs: Vec<PenaltyRun> = Vec::new();
    let mut failures = Vec::new();
    for &k in ks {
        // φ_k increases toward the k = ∞ multiplier, so the previous one is a good start
        let start = runs.last().map(|r| r.psi.terminal().to_vec());
        match problem.solve_penalized_from(y0, k, cg_tol, cg_max, start.as_deref()) {
            Ok(run) => runs.push(run),
            Err(e) => {
                warn!("penalty {k:e} failed: {e}");
                failures.push(SweepFailure { k, error: e.to_string() });
            }
        }
    }
    let bound_holds = runs.iter().all(|r| r.terminal_norm <= (2.0 * r.jk / r.k).sqrt() * (1.0 + 1e-12));
    let terminal_non_increasing = runs.windows(2).all(|w| w[1].terminal_norm <= w[0].terminal_norm);
    let terminal_strictly_decreasing = runs.windows(2).all(|w| w[1].terminal_norm < w[0].terminal_norm);
    let cost_non_decreasing = runs.windows(2).all(|w| w[1].jk >= w[0].jk * (1.0 - 1e-9));
    Ok(PenaltySweep { runs, failures, terminal_non_increasing, terminal_strictly_decreasing, bound_holds, cost_non_decreasing })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityProbe {
    pub samples: usize,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Samples whose denominator vanished numerically.
    pub infinite: usize,
}

/// ‖ψ(0)‖² / (dt·dx·Σ_k Σ_{x∈ω₀} ρ|ψ^k|²) for one terminal datum.
pub fn observability_ratio(problem: &HumProblem, psi_t: &[f64]) -> Result<f64> {
    let psi = solve_adjoint(&problem.opd, psi_t)?;
    let g = problem.grid();
    let num = l2(psi.slice(0), g.dx).powi(2);
    let mut den = 0.0;
    for k in 0..=g.nt {
        for i in 0..g.nx {
            if !problem.omega0[i] {
                continue;
            }
            let r = problem.rho[k * g.nx + i];
            for comp in 0..problem.m() {
                den += r * psi.at(k, comp, i).powi(2);
            }
        }
    }
    den *= g.dt * g.dx;
    Ok(if den > 0.0 { num / den } else { f64::INFINITY })
}

/// Gaussian terminal data, one seeded stream per sample.
pub fn observability_probe(problem: &HumProblem, samples: usize, seed: u64) -> Result<ObservabilityProbe> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let n = problem.m() * problem.grid().nx;
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let psi_t: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            observability_ratio(problem, &psi_t)
        })
        .collect::<Result<_>>()?;
    let infinite = ratios.iter().filter(|r| r.is_infinite()).count();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ObservabilityProbe { samples, ratios, max_ratio, infinite })
}
