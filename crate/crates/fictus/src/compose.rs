//! Applies the right inverse 𝓑 to the localized fictitious control and
//! assembles the reduced control (y, u) = (ỹ − ŷ, −û).

use serde::Serialize;

use crate::algebra::DifferentialOperator;
use crate::error::{Error, Result};
use crate::model::CoupledSystem;
use crate::pde::{l2, Grid, TrajectoryField};

/// Finite-difference weights for the `order`-th derivative at 0 on the given
/// offsets (in grid units), by Fornberg's recursion.
pub fn fd_weights(order: usize, offsets: &[f64]) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Half-width of the centered second-order stencil for a derivative of order j.
pub fn stencil_radius(j: usize) -> usize {
    if j == 0 {
        0
    } else {
        (j + 1) / 2
    }
}

fn centered(j: usize) -> (usize, Vec<f64>) {
    let r = stencil_radius(j);
    let offs: Vec<f64> = (-(r as i64)..=r as i64).map(|o| o as f64).collect();
    (r, fd_weights(j, &offs))
}

/// ∂_x^j of one component slice with zero data outside the interior.
fn dx_slice(f: &[f64], j: usize, dx: f64) -> Vec<f64> {
    if j == 0 {
        return f.to_vec();
    }
    let (r, w) = centered(j);
    let nx = f.len() as i64;
    let scale = dx.powi(j as i32);
    (0..nx)
        .map(|i| {
            let mut s = 0.0;
            for (q, wq) in w.iter().enumerate() {
                let idx = i + q as i64 - r as i64;
                if idx >= 0 && idx < nx {
                    s += wq * f[idx as usize];
                }
            }
            s / scale
        })
        .collect()
}

/// ∂_t^a at level k: centered inside, one-sided second order at the ends.
fn dt_level(field: &TrajectoryField, comp: usize, k: usize, a: u32) -> Vec<f64> {
    let g = field.grid;
    let n = g.nt;
    let s = |kk: usize| field.slice_comp(kk, comp);
    let comb = |terms: &[(usize, f64)], scale: f64| -> Vec<f64> {
        let mut out = vec![0.0; g.nx];
        for &(kk, w) in terms {
            for (o, v) in out.iter_mut().zip(s(kk)) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= scale);
        out
    };
    match a {
        0 => s(k).to_vec(),
        1 if k == 0 => comb(&[(0, -3.0), (1, 4.0), (2, -1.0)], 2.0 * g.dt),
        1 if k == n => comb(&[(n, 3.0), (n - 1, -4.0), (n - 2, 1.0)], 2.0 * g.dt),
        1 => comb(&[(k + 1, 1.0), (k - 1, -1.0)], 2.0 * g.dt),
        2 if k == 0 => comb(&[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)], g.dt * g.dt),
        2 if k == n => comb(&[(n, 2.0), (n - 1, -5.0), (n - 2, 4.0), (n - 3, -1.0)], g.dt * g.dt),
        _ => comb(&[(k + 1, 1.0), (k, -2.0), (k - 1, 1.0)], g.dt * g.dt),
    }
}

/// (ŷ, û) = 𝓑(θv) with second-order finite differences.
pub fn synthesize_reduced(
    sys: &CoupledSystem,
    op: &DifferentialOperator,
    theta_v: &TrajectoryField,
    grid: &Grid,
) -> Result<(TrajectoryField, TrajectoryField)> {
    let (m, c) = (sys.m, sys.c);
    if sys.n != 1 || op.n != 1 {
        return Err(Error::InvalidArgument("finite-difference synthesis supports n = 1 only".into()));
    }
    if op.in_dim != m || op.out_dim != m + c || theta_v.m != m || theta_v.grid != *grid {
        return Err(Error::DimensionMismatch("operator, field and grid disagree".into()));
    }
    let t_order = op.max_time_order();
    if t_order > 2 || (t_order > 0 && grid.nt < 3) {
        return Err(Error::GridTooCoarse(format!("time order {t_order} on {} steps", grid.nt)));
    }
    let margin = stencil_radius(op.max_space_order()).max(op.p + 3);
    let mut first = usize::MAX;
    let mut last = 0;
    for k in 0..=grid.nt {
        for comp in 0..m {
            for (i, v) in theta_v.slice_comp(k, comp).iter().enumerate() {
                if *v != 0.0 {
                    first = first.min(i);
                    last = last.max(i);
                }
            }
        }
    }
    if first != usize::MAX && (first < margin || last + margin >= grid.nx) {
        return Err(Error::GridTooCoarse(format!(
            "support of θv reaches within {margin} cells of the boundary at Nx = {}",
            grid.nx
        )));
    }

    let mut y_hat = TrajectoryField::zeros(*grid, m);
    let mut u_hat = TrajectoryField::zeros(*grid, c);
    for k in 0..=grid.nt {
        for (row, ops) in op.entries.iter().enumerate() {
            let mut acc = vec![0.0; grid.nx];
            for (input, s) in ops.iter().enumerate() {
                // group terms by time order to difference in time once
                for a in 0..=t_order {
                    let terms: Vec<(usize, f64)> =
                        s.terms.iter().filter(|(key, _)| key.0 == a).map(|(key, &v)| (key.1[0] as usize, v)).collect();
                    if terms.is_empty() {
                        continue;
                    }
                    let base = dt_level(theta_v, input, k, a);
                    for (j, coef) in terms {
                        for (o, d) in acc.iter_mut().zip(dx_slice(&base, j, grid.dx)) {
                            *o += coef * d;
                        }
                    }
                }
            }
            let dst = if row < m { y_hat.slice_comp_mut(k, row) } else { u_hat.slice_comp_mut(k, row - m) };
            dst.copy_from_slice(&acc);
        }
    }
    Ok((y_hat, u_hat))
}

/// Residual of ∂t y − d∂²y − Σ_i(g∂ + a)y_i − 𝟙_ω u_j − f_j at levels
/// 1..N−1 with centered differences; levels 0 and N are left at zero.
pub fn residual_field(
    sys: &CoupledSystem,
    y: &TrajectoryField,
    control: Option<&TrajectoryField>,
    forcing: Option<&TrajectoryField>,
) -> TrajectoryField {
    let g = y.grid;
    let m = sys.m;
    let mut res = TrajectoryField::zeros(g, m);
    let at = |k: usize, comp: usize, i: i64| -> f64 {
        if i < 0 || i >= g.nx as i64 {
            0.0
        } else {
            y.at(k, comp, i as usize)
        }
    };
    let in_omega: Vec<f64> = (0..g.nx)
        .map(|i| {
            let x = g.x(i);
            if x > sys.omega.0 && x < sys.omega.1 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 1..g.nt {
        for j in 0..m {
            for i in 0..g.nx {
                let ii = i as i64;
                let mut r = (y.at(k + 1, j, i) - y.at(k - 1, j, i)) / (2.0 * g.dt);
                r -= sys.d1(j) * (at(k, j, ii + 1) - 2.0 * at(k, j, ii) + at(k, j, ii - 1)) / (g.dx * g.dx);
                for l in 0..m {
                    r -= sys.g1(j, l) * (at(k, l, ii + 1) - at(k, l, ii - 1)) / (2.0 * g.dx);
                    r -= sys.a[j][l] * at(k, l, ii);
                }
                if let Some(u) = control {
                    if j < u.m {
                        r -= in_omega[i] * u.at(k, j, i);
                    }
                }
                if let Some(f) = forcing {
                    r -= f.at(k, j, i);
                }
                *res.at_mut(k, j, i) = r;
            }
        }
    }
    res
}

fn max_over(field: &TrajectoryField, comps: std::ops::Range<usize>) -> f64 {
    let g = field.grid;
    let mut worst: f64 = 0.0;
    for k in 0..=g.nt {
        for comp in comps.clone() {
            worst = field.slice_comp(k, comp).iter().fold(worst, |a, v| a.max(v.abs()));
        }
    }
    worst
}

/// Max residual of ∂tŷ = div(D∇ŷ) + G·∇ŷ + Aŷ + Bû + θv over interior points.
pub fn verify_algebraic_residual(
    sys: &CoupledSystem,
    y_hat: &TrajectoryField,
    u_hat: &TrajectoryField,
    theta_v: &TrajectoryField,
    grid: &Grid,
) -> f64 {
    debug_assert!(y_hat.grid == *grid);
    let res = residual_field(sys, y_hat, Some(u_hat), Some(theta_v));
    max_over(&res, 0..sys.m)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComposedSolution {
    #[serde(skip)]
    pub y_hat: TrajectoryField,
    #[serde(skip)]
    pub u_hat: TrajectoryField,
    #[serde(skip)]
    pub y: TrajectoryField,
    #[serde(skip)]
    pub u: TrajectoryField,
    /// Max residual on the equations without a control.
    pub residual_uncontrolled: f64,
    pub residual_controlled: f64,
    pub terminal_norm: f64,
    pub fictitious_terminal_norm: f64,
    pub hat_terminal_max: f64,
    pub hat_initial_max: f64,
    /// Max |û| at nodes outside ω.
    pub support_violation: f64,
}

pub fn combine_and_verify(
    sys: &CoupledSystem,
    y_tilde: &TrajectoryField,
    y_hat: &TrajectoryField,
    u_hat: &TrajectoryField,
    grid: &Grid,
) -> Result<ComposedSolution> {
    if y_tilde.grid != *grid || y_hat.grid != *grid || u_hat.grid != *grid || y_tilde.m != sys.m || y_hat.m != sys.m || u_hat.m != sys.c {
        return Err(Error::DimensionMismatch("fields do not share the grid or component counts".into()));
    }
    let y = y_tilde.sub(y_hat);
    let u = u_hat.scaled(-1.0);
    let res = residual_field(sys, &y, Some(&u), None);
    let mut support_violation: f64 = 0.0;
    for i in 0..grid.nx {
        let x = grid.x(i);
        if x > sys.omega.0 && x < sys.omega.1 {
            continue;
        }
        for k in 0..=grid.nt {
            for comp in 0..sys.c {
                support_violation = support_violation.max(u_hat.at(k, comp, i).abs());
            }
        }
    }
    let max_slice = |f: &TrajectoryField, k: usize| f.slice(k).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(ComposedSolution {
        residual_uncontrolled: max_over(&res, sys.c..sys.m),
        residual_controlled: max_over(&res, 0..sys.c),
        terminal_norm: l2(y.terminal(), grid.dx),
        fictitious_terminal_norm: l2(y_tilde.terminal(), grid.dx),
        hat_terminal_max: max_slice(y_hat, grid.nt),
        hat_initial_max: max_slice(y_hat, 0),
        support_violation,
        y_hat: y_hat.clone(),
        u_hat: u_hat.clone(),
        y,
        u,
    })
}
