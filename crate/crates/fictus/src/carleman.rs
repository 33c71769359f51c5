//! Carleman weights, the auxiliary function η⁰, cutoffs and weighted
//! functionals.
//!
//! With M = ‖η⁰‖∞ and τ(t) = t⁵(T−t)⁵:
//!
//! ```text
//! α(t,x) = (e^{12λM} − e^{λ(10M+η⁰(x))}) / τ(t)
//! ξ(t,x) = e^{λ(10M+η⁰(x))} / τ(t)
//! ρ      = e^{−2 s₁ α} ξ^{2p+7}
//! ```
//!
//! Everything is evaluated in log space; weighted values below 1e−300 snap to 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Grid, TrajectoryField};

pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Rule {
    /// max{s₀, 3⁵(2p+7)λ/4¹⁰ · max_x (10M+η⁰)/(e^{12λM} − e^{λ(10M+η⁰)})}
    Explicit,
    /// σ(T⁵ + T¹⁰)
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub lambda: f64,
    pub lambda_min: f64,
    pub sigma: f64,
    pub p: usize,
    pub s0: f64,
    /// Exponent fraction in e^{2K s₁ α*} diagnostics, in (0, 1).
    pub k_reg: f64,
    pub c_generic: f64,
    pub rule: S1Rule,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { lambda: 1.0, lambda_min: 1.0, sigma: 1.0, p: 0, s0: 0.0, k_reg: 0.5, c_generic: 1.0, rule: S1Rule::Explicit }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda >= self.lambda_min) {
            return Err(Error::InvalidArgument(format!("lambda {} must be >= lambda_min {} > 0", self.lambda, self.lambda_min)));
        }
        if !(self.k_reg > 0.0 && self.k_reg < 1.0) {
            return Err(Error::InvalidArgument("K must lie in (0, 1)".into()));
        }
        if !(self.sigma > 0.0 && self.c_generic > 0.0 && self.s0 >= 0.0) {
            return Err(Error::InvalidArgument("sigma, C_generic must be positive and s0 non-negative".into()));
        }
        Ok(())
    }
}

/// η⁰(x) = s·x(L−x)(1+βx)^j with its only critical point at x_c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFunction {
    pub length: f64,
    pub center: f64,
    pub beta: f64,
    pub power: u32,
    /// 1/η̃(x_c) for the unnormalized product.
    pub scale: f64,
    pub kappa: f64,
    pub sup_norm: f64,
}

impl EtaFunction {
    pub fn eval(&self, x: f64) -> f64 {
        raw_eta(self.length, self.beta, self.power, x) * self.scale
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (l, b, j) = (self.length, self.beta, self.power as i32);
        let q = 1.0 + b * x;
        self.scale * q.powi(j - 1) * ((l - 2.0 * x) * q + j as f64 * b * x * (l - x))
    }
}

/// Builds η⁰ vanishing to first order at both ends, positive inside, with a
/// single critical point at the midpoint of `omega_inner`.
pub fn build_eta0(length: f64, omega_inner: (f64, f64), p: usize) -> Result<EtaFunction> {
    let _ = p; // polynomial, hence smooth to any order
    let (a, b) = omega_inner;
    if !(0.0 < a && a < b && b < length) {
        return Err(Error::InvalidArgument(format!("inner region ({a}, {b}) not strictly inside (0, {length})")));
    }
    let xc = 0.5 * (a + b);
    // log-derivative 1/x − 1/(L−x) + jβ/(1+βx) vanishes at x_c
    let k0 = (length - 2.0 * xc) / (xc * (length - xc));
    // 1 + βx stays positive on [0, L] iff j exceeds |L − 2x_c| / min(x_c, L − x_c)
    let power = ((length - 2.0 * xc).abs() / xc.min(length - xc)).floor() as u32 + 1;
    let beta = -k0 / (power as f64 + k0 * xc);
    if !(1.0 + beta * length > 0.0) {
        return Err(Error::ConstructionFailed("η⁰ changes sign inside the domain".into()));
    }
    let peak = raw_eta(length, beta, power, xc);
    let mut eta = EtaFunction { length, center: xc, beta, power, scale: 1.0 / peak, kappa: 0.0, sup_norm: 1.0 };

    let samples = 10_000;
    let mut kappa = f64::INFINITY;
    for s in 0..=samples {
        let x = length * s as f64 / samples as f64;
        if x > a && x < b {
            continue;
        }
        kappa = kappa.min(eta.derivative(x).abs());
    }
    if !(kappa > 0.0) {
        return Err(Error::ConstructionFailed(format!("kappa = {kappa} on the complement of the inner region")));
    }
    eta.kappa = kappa;
    Ok(eta)
}

fn raw_eta(length: f64, beta: f64, power: u32, x: f64) -> f64 {
    x * (length - x) * (1.0 + beta * x).powi(power as i32)
}

/// Smoothstep of order N: degree 2N+1, flat to order N at 0 and 1.
pub fn smoothstep(order: usize, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    let n = order;
    let mut s = 0.0;
    for k in 0..=n {
        let c = crate::algebra::binomial(n + k, k) as f64 * crate::algebra::binomial(2 * n + 1, n - k) as f64;
        s += c * (-z).powi(k as i32);
    }
    s * z.powi(n as i32 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub omega: (f64, f64),
    /// ω₀, ω₁, …, ω_{p+2}.
    pub omegas: Vec<(f64, f64)>,
    /// Closed support of θ.
    pub support: (f64, f64),
    pub smooth_order: usize,
}

const SUPPORT_FRACTION: f64 = 0.9;
const PLATEAU_FRACTION: f64 = 0.55;
const SHRINK: f64 = 0.85;

impl CutoffFamily {
    pub fn theta(&self, x: f64) -> f64 {
        let c = 0.5 * (self.omega.0 + self.omega.1);
        let outer = self.support.1 - c;
        let inner = self.omegas[0].1 - c;
        let z = (outer - (x - c).abs()) / (outer - inner);
        smoothstep(self.smooth_order, z)
    }

    pub fn in_omega0(&self, x: f64) -> bool {
        x > self.omegas[0].0 && x < self.omegas[0].1
    }

    pub fn innermost(&self) -> (f64, f64) {
        *self.omegas.last().expect("at least one nested region")
    }
}

/// Nested regions shrinking geometrically toward the center of ω, and θ = 1
/// on ω₀, supported in ω, smooth to order p+2.
pub fn build_cutoffs(omega: (f64, f64), p: usize, dx: f64) -> Result<CutoffFamily> {
    let (a, b) = omega;
    if !(a < b) || !(dx > 0.0) {
        return Err(Error::InvalidArgument("omega must be a nonempty interval and dx positive".into()));
    }
    let c = 0.5 * (a + b);
    let w = 0.5 * (b - a);
    let mut omegas = Vec::with_capacity(p + 3);
    for i in 0..=p + 2 {
        let hw = PLATEAU_FRACTION * w * SHRINK.powi(i as i32);
        omegas.push((c - hw, c + hw));
    }
    let last = omegas[p + 2];
    if last.1 - last.0 < 10.0 * dx {
        return Err(Error::DegenerateRegion(format!(
            "innermost region width {:.4} is below 10·dx = {:.4}",
            last.1 - last.0,
            10.0 * dx
        )));
    }
    let hs = SUPPORT_FRACTION * w;
    Ok(CutoffFamily { omega, omegas, support: (c - hs, c + hs), smooth_order: p + 2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanWeights {
    pub eta: EtaFunction,
    pub lambda: f64,
    pub sigma: f64,
    pub t_final: f64,
    pub p: usize,
    pub s1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S1Info {
    pub s1: f64,
    pub sigma: f64,
    pub explicit_term: f64,
}

/// s₁ and the equivalent σ = s₁/(T⁵+T¹⁰).
pub fn compute_s1(cfg: &WeightConfig, eta: &EtaFunction, t_final: f64, lambda: f64) -> S1Info {
    let scale = t_final.powi(5) + t_final.powi(10);
    let m = eta.sup_norm;
    let samples = 2000;
    let mut best: f64 = 0.0;
    for s in 0..=samples {
        let e = eta.eval(eta.length * s as f64 / samples as f64).clamp(0.0, m);
        let num = 10.0 * m + e;
        let den = (lambda * (10.0 * m + e)).exp() * (lambda * (2.0 * m - e)).exp_m1();
        best = best.max(num / den);
    }
    let explicit_term = 3f64.powi(5) * (2 * cfg.p + 7) as f64 * lambda / 4f64.powi(10) * best;
    let s1 = match cfg.rule {
        S1Rule::Explicit => cfg.s0.max(explicit_term),
        S1Rule::Normalized => cfg.sigma * scale,
    };
    S1Info { s1, sigma: s1 / scale, explicit_term }
}

impl CarlemanWeights {
    pub fn new(cfg: &WeightConfig, eta: EtaFunction, t_final: f64) -> Result<Self> {
        cfg.validate()?;
        if !(t_final > 0.0) {
            return Err(Error::InvalidArgument("T must be positive".into()));
        }
        let info = compute_s1(cfg, &eta, t_final, cfg.lambda);
        Ok(CarlemanWeights { eta, lambda: cfg.lambda, sigma: info.sigma, t_final, p: cfg.p, s1: info.s1 })
    }

    /// Same weights with another s₁.
    pub fn with_s1(&self, s1: f64) -> Self {
        let scale = self.t_final.powi(5) + self.t_final.powi(10);
        CarlemanWeights { s1, sigma: s1 / scale, ..self.clone() }
    }

    fn log_tau(&self, t: f64) -> f64 {
        5.0 * (t.ln() + (self.t_final - t).ln())
    }

    fn tau(&self, t: f64) -> f64 {
        (t * (self.t_final - t)).powi(5)
    }

    /// (α, ln ξ) for a given η⁰ value, t ∈ (0,T).
    fn alpha_logxi_eta(&self, t: f64, e: f64) -> (f64, f64) {
        let m = self.eta.sup_norm;
        let l = self.lambda;
        let num = (l * (10.0 * m + e)).exp() * (l * (2.0 * m - e)).exp_m1();
        (num / self.tau(t), l * (10.0 * m + e) - self.log_tau(t))
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.t_final {
            Ok(())
        } else {
            Err(Error::OutOfRange(t))
        }
    }

    pub fn eval_weights(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        self.check_t(t)?;
        let (a, lx) = self.alpha_logxi_eta(t, self.eta.eval(x));
        Ok((a, lx.exp()))
    }

    /// (α*, ξ*): α maximal and ξ minimal where η⁰ = 0.
    pub fn eval_star_weights(&self, t: f64) -> Result<(f64, f64)> {
        self.check_t(t)?;
        let (a, lx) = self.alpha_logxi_eta(t, 0.0);
        Ok((a, lx.exp()))
    }

    /// ln(e^{−2sα} ξ^a) with −∞ at t ∈ {0, T}.
    pub fn log_weight(&self, s: f64, a: f64, t: f64, x: f64) -> f64 {
        if !(t > 0.0 && t < self.t_final) {
            return f64::NEG_INFINITY;
        }
        let (al, lx) = self.alpha_logxi_eta(t, self.eta.eval(x));
        -2.0 * s * al + a * lx
    }

    pub fn exponent(&self) -> f64 {
        (2 * self.p + 7) as f64
    }

    pub fn log_rho(&self, t: f64, x: f64) -> f64 {
        self.log_weight(self.s1, self.exponent(), t, x)
    }

    pub fn eval_rho(&self, t: f64, x: f64) -> f64 {
        snap(self.log_rho(t, x).exp())
    }

    /// ρ on every (time level, interior node) of the grid, row-major in time.
    pub fn rho_grid(&self, grid: &Grid) -> Vec<f64> {
        let mut out = Vec::with_capacity((grid.nt + 1) * grid.nx);
        for k in 0..=grid.nt {
            for i in 0..grid.nx {
                out.push(self.eval_rho(grid.t(k), grid.x(i)));
            }
        }
        out
    }
}

fn snap(v: f64) -> f64 {
    if v < UNDERFLOW {
        0.0
    } else {
        v
    }
}

/// I(s,λ;u) = s³λ⁴∬e^{−2sα}ξ³|u|² + sλ²∬e^{−2sα}ξ|∇u|² by the trapezoidal rule,
/// gradients by centered differences (one-sided second order at ∂Ω).
pub fn carleman_functional(w: &CarlemanWeights, s: f64, lambda: f64, u: &TrajectoryField) -> f64 {
    let wl = CarlemanWeights { lambda, ..w.clone() };
    let g = u.grid;
    let nxf = g.nx + 2;
    let mut total = 0.0;
    for k in 1..g.nt {
        let t = g.t(k);
        let mut row = 0.0;
        for j in 0..nxf {
            let x = j as f64 * g.dx;
            let w3 = wl.log_weight(s, 3.0, t, x).exp();
            let w1 = wl.log_weight(s, 1.0, t, x).exp();
            let mut val = 0.0;
            for comp in 0..u.m {
                let full = |jj: usize| -> f64 {
                    if jj == 0 || jj == nxf - 1 {
                        0.0
                    } else {
                        u.at(k, comp, jj - 1)
                    }
                };
                let grad = if j == 0 {
                    (-3.0 * full(0) + 4.0 * full(1) - full(2)) / (2.0 * g.dx)
                } else if j == nxf - 1 {
                    (3.0 * full(j) - 4.0 * full(j - 1) + full(j - 2)) / (2.0 * g.dx)
                } else {
                    (full(j + 1) - full(j - 1)) / (2.0 * g.dx)
                };
                let v = full(j);
                val += s.powi(3) * lambda.powi(4) * w3 * v * v + s * lambda * lambda * w1 * grad * grad;
            }
            let wx = if j == 0 || j == nxf - 1 { 0.5 } else { 1.0 };
            row += wx * val;
        }
        total += row;
    }
    total * g.dx * g.dt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    pub a: f64,
    pub r: usize,
    /// sup |∂t(ξ^a e^{−2s₁α})| / (T ξ^{a+6/5} e^{−2s₁α}).
    pub time_constant: f64,
    /// sup |∂_x^r(ξ^a e^{−2s₁α})| / (ξ^{a+r} e^{−2s₁α}).
    pub space_constant: f64,
    pub finite: bool,
}

/// Empirical constants of the weight-derivative bounds on an interior nt×nx grid.
///
/// With F = ln(ξ^a e^{−2s₁α}), the time ratio is exact: ∂tF = (2s₁α − a)·τ'/τ.
/// Spatial derivatives of F are taken by differences of F itself and combined
/// through the complete Bell polynomials, so e^F is never formed. r ≤ 4.
pub fn weight_bound_diagnostics(w: &CarlemanWeights, a: f64, r: usize, nt: usize, nx: usize) -> BoundDiagnostics {
    assert!((1..=4).contains(&r), "spatial order must lie in 1..=4");
    let t_f = w.t_final;
    let l = w.eta.length;
    let s = w.s1;
    let h = 1e-3 * l;
    let offsets: Vec<f64> = (-3..=3).map(|o| o as f64).collect();
    let stencils: Vec<Vec<f64>> = (1..=r).map(|k| crate::compose::fd_weights(k, &offsets)).collect();
    let mut tc: f64 = 0.0;
    let mut xc: f64 = 0.0;
    for k in 1..nt {
        let t = k as f64 * t_f / nt as f64;
        let dlog_tau = 5.0 * (1.0 / t - 1.0 / (t_f - t));
        for i in 0..=nx {
            let x = i as f64 * l / nx as f64;
            let (alpha, lxi) = w.alpha_logxi_eta(t, w.eta.eval(x));
            tc = tc.max(((2.0 * s * alpha - a) * dlog_tau).abs() / (t_f * (1.2 * lxi).exp()));

            let f = |y: f64| {
                let (al, lx) = w.alpha_logxi_eta(t, w.eta.eval(y));
                -2.0 * s * al + a * lx
            };
            let vals: Vec<f64> = offsets.iter().map(|o| f(x + o * h)).collect();
            let d: Vec<f64> = stencils
                .iter()
                .enumerate()
                .map(|(j, st)| st.iter().zip(&vals).map(|(c, v)| c * v).sum::<f64>() / h.powi(j as i32 + 1))
                .collect();
            let bell = match r {
                1 => d[0],
                2 => d[0] * d[0] + d[1],
                3 => d[0].powi(3) + 3.0 * d[0] * d[1] + d[2],
                _ => d[0].powi(4) + 6.0 * d[0] * d[0] * d[1] + 4.0 * d[0] * d[2] + 3.0 * d[1] * d[1] + d[3],
            };
            xc = xc.max(bell.abs() / (r as f64 * lxi).exp());
        }
    }
    BoundDiagnostics { a, r, time_constant: tc, space_constant: xc, finite: tc.is_finite() && xc.is_finite() }
}

/// sup over a grid of e^{2K s₁ α*} ξ^{2p+7} e^{−2 s₁ α}.
pub fn regularity_constant(w: &CarlemanWeights, k_reg: f64, nt: usize, nx: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 1..nt {
        let t = k as f64 * w.t_final / nt as f64;
        let (astar, _) = w.alpha_logxi_eta(t, 0.0);
        for i in 0..=nx {
            let x = i as f64 * w.eta.length / nx as f64;
            best = best.max(2.0 * k_reg * w.s1 * astar + w.log_rho(t, x));
        }
    }
    best.exp()
}
