//! Problem definition for the coupled system
//!
//! ```text
//! ∂t y = div(D∇y) + G·∇y + A y + 1_ω B u   in (0,T)×Ω,   y = 0 on ∂Ω
//! ```
//!
//! with `m` equations, `n` space dimensions and `c` actuated equations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::TrajectoryField;

const SYM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystem {
    pub m: usize,
    pub n: usize,
    pub c: usize,
    /// `d[p]` is the n×n diffusion matrix of equation p.
    pub d: Vec<Vec<Vec<f64>>>,
    /// `g[p][k]` is the n-vector multiplying ∇y_k in equation p.
    pub g: Vec<Vec<Vec<f64>>>,
    pub a: Vec<Vec<f64>>,
    pub t_final: f64,
    pub length: f64,
    pub omega: (f64, f64),
}

impl CoupledSystem {
    /// One-dimensional system with scalar diffusion per equation.
    pub fn one_d(
        c: usize,
        diffusion: &[f64],
        g: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        t_final: f64,
        length: f64,
        omega: (f64, f64),
    ) -> Self {
        let m = diffusion.len();
        CoupledSystem {
            m,
            n: 1,
            c,
            d: diffusion.iter().map(|&v| vec![vec![v]]).collect(),
            g: g.into_iter().map(|row| row.into_iter().map(|v| vec![v]).collect()).collect(),
            a,
            t_final,
            length,
            omega,
        }
    }

    /// Scalar diffusion coefficient of equation p (n = 1).
    pub fn d1(&self, p: usize) -> f64 {
        self.d[p][0][0]
    }

    /// Scalar advection coefficient g_{pk} (n = 1).
    pub fn g1(&self, p: usize, k: usize) -> f64 {
        self.g[p][k][0]
    }

    pub fn actuation(&self) -> ActuationMatrix {
        ActuationMatrix { m: self.m, c: self.c }
    }

    /// Checks array shapes; the remaining invariants are reported by [`validate_system`].
    pub fn check_shapes(&self) -> Result<()> {
        let (m, n) = (self.m, self.n);
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if m == 0 || n == 0 {
            return bad("m and n must be positive");
        }
        if self.c == 0 || self.c > m {
            return Err(Error::InvalidArgument(format!("c = {} must satisfy 1 <= c <= m = {}", self.c, m)));
        }
        if self.d.len() != m || self.d.iter().any(|dp| dp.len() != n || dp.iter().any(|r| r.len() != n)) {
            return bad("D must hold m matrices of size n×n");
        }
        if self.g.len() != m || self.g.iter().any(|r| r.len() != m || r.iter().any(|v| v.len() != n)) {
            return bad("G must be m×m with n-vector entries");
        }
        if self.a.len() != m || self.a.iter().any(|r| r.len() != m) {
            return bad("A must be m×m");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActuationMatrix {
    pub m: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub label: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub ellipticity_constant: f64,
    pub violations: Vec<Finding>,
}

pub fn validate_system(sys: &CoupledSystem) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |label: &str, detail: String| {
        violations.push(Finding { label: label.to_string(), detail })
    };
    if let Err(e) = sys.check_shapes() {
        push("shape", e.to_string());
        return ValidationReport { ok: false, ellipticity_constant: f64::NAN, violations };
    }
    if sys.m < 2 {
        push("dimension", format!("m = {} but at least 2 equations are required", sys.m));
    }

    let mut ell = f64::INFINITY;
    for (p, dp) in sys.d.iter().enumerate() {
        let mat = DMatrix::from_fn(sys.n, sys.n, |i, j| dp[i][j]);
        let asym = (&mat - mat.transpose()).abs().max();
        if asym > SYM_TOL {
            push("symmetry", format!("d_{} is not symmetric (max defect {asym:e})", p + 1));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let lo = sym.symmetric_eigenvalues().min();
        ell = ell.min(lo);
    }
    if !(ell > SYM_TOL) {
        push("ellipticity", format!("smallest diffusion eigenvalue {ell} is not positive"));
    }

    let (a, b) = sys.omega;
    if !(0.0 < a && a < b && b < sys.length) {
        push("omega", format!("omega ({a}, {b}) is not strictly inside (0, {})", sys.length));
    }
    if !(sys.t_final > 0.0) {
        push("horizon", format!("T = {} must be positive", sys.t_final));
    }
    let finite = sys.a.iter().flatten().all(|v| v.is_finite())
        && sys.g.iter().flatten().flatten().all(|v| v.is_finite())
        && sys.d.iter().flatten().flatten().all(|v| v.is_finite());
    if !finite {
        push("finite", "coefficients must be finite".to_string());
    }

    ValidationReport { ok: violations.is_empty(), ellipticity_constant: ell, violations }
}

/// Embeds a c-component field as the first c components of an m-component field.
pub fn apply_actuation(b: &ActuationMatrix, u: &TrajectoryField) -> Result<TrajectoryField> {
    if u.m != b.c {
        return Err(Error::DimensionMismatch(format!("control has {} components, expected {}", u.m, b.c)));
    }
    let mut out = TrajectoryField::zeros(u.grid, b.m);
    for k in 0..=u.grid.nt {
        for comp in 0..b.c {
            out.slice_comp_mut(k, comp).copy_from_slice(u.slice_comp(k, comp));
        }
    }
    Ok(out)
}
