//! Implicit Euler finite differences on a uniform 1-D grid with homogeneous
//! Dirichlet boundary, plus the exactly transposed adjoint march.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm_inf, BandedLu};
use crate::model::CoupledSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub length: f64,
    pub t_final: f64,
    pub dx: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(nx: usize, nt: usize, length: f64, t_final: f64) -> Result<Self> {
        if nx < 3 || nt < 2 {
            return Err(Error::InvalidArgument(format!("grid needs Nx >= 3 and Nt >= 2, got {nx}×{nt}")));
        }
        if !(length > 0.0 && t_final > 0.0) {
            return Err(Error::InvalidArgument("grid extents must be positive".into()));
        }
        Ok(Grid { nx, nt, length, t_final, dx: length / (nx + 1) as f64, dt: t_final / nt as f64 })
    }

    /// Interior node i (0-based) sits at (i+1)·dx.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same domain with dx and dt halved.
    pub fn refined(&self) -> Self {
        Grid::new(2 * self.nx + 1, 2 * self.nt, self.length, self.t_final).expect("refinement of a valid grid")
    }
}

/// m-component field on every time level; boundary zeros are implicit.
/// Layout: `values[(k*m + comp)*nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryField {
    pub grid: Grid,
    pub m: usize,
    pub values: Vec<f64>,
}

impl TrajectoryField {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        TrajectoryField { grid, m, values: vec![0.0; (grid.nt + 1) * m * grid.nx] }
    }

    pub fn from_fn<F: Fn(f64, f64, usize) -> f64>(grid: Grid, m: usize, f: F) -> Self {
        let mut out = Self::zeros(grid, m);
        for k in 0..=grid.nt {
            for comp in 0..m {
                for i in 0..grid.nx {
                    out.values[(k * m + comp) * grid.nx + i] = f(grid.t(k), grid.x(i), comp);
                }
            }
        }
        out
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let w = self.m * self.grid.nx;
        &self.values[k * w..(k + 1) * w]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let w = self.m * self.grid.nx;
        &mut self.values[k * w..(k + 1) * w]
    }

    pub fn slice_comp(&self, k: usize, comp: usize) -> &[f64] {
        let nx = self.grid.nx;
        let s = (k * self.m + comp) * nx;
        &self.values[s..s + nx]
    }

    pub fn slice_comp_mut(&mut self, k: usize, comp: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        let s = (k * self.m + comp) * nx;
        &mut self.values[s..s + nx]
    }

    pub fn at(&self, k: usize, comp: usize, i: usize) -> f64 {
        self.values[(k * self.m + comp) * self.grid.nx + i]
    }

    pub fn at_mut(&mut self, k: usize, comp: usize, i: usize) -> &mut f64 {
        &mut self.values[(k * self.m + comp) * self.grid.nx + i]
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrajectoryField { grid: self.grid, m: self.m, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        TrajectoryField {
            grid: self.grid,
            m: self.m,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm of time level k.
    pub fn norm_at(&self, k: usize) -> f64 {
        l2(self.slice(k), self.grid.dx)
    }

    pub fn terminal(&self) -> &[f64] {
        self.slice(self.grid.nt)
    }

    /// Keeps only the listed components.
    pub fn components(&self, comps: std::ops::Range<usize>) -> Self {
        let mut out = Self::zeros(self.grid, comps.len());
        for k in 0..=self.grid.nt {
            for (o, c) in comps.clone().enumerate() {
                out.slice_comp_mut(k, o).copy_from_slice(self.slice_comp(k, c));
            }
        }
        out
    }
}

/// Discrete inner product dx·Σ a_i b_i.
pub fn inner(a: &[f64], b: &[f64], dx: f64) -> f64 {
    dx * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub fn l2(a: &[f64], dx: f64) -> f64 {
    inner(a, a, dx).sqrt()
}

/// Implicit step (I − dt·M) with M = D⊗Δ_h + G⊗δ_h + A⊗I, factored once.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub m: usize,
    d: Vec<f64>,
    g: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    lu: BandedLu,
    pub peclet: f64,
}

impl DiscreteOperator {
    fn bandwidth(&self) -> usize {
        2 * self.m - 1
    }

    /// Entry of M in the interleaved ordering idx = i·m + comp.
    fn m_entry(&self, row: usize, col: usize) -> f64 {
        let (m, dx) = (self.m, self.grid.dx);
        let (i, p) = (row / m, row % m);
        let (j, k) = (col / m, col % m);
        let mut v = 0.0;
        if i == j {
            if p == k {
                v -= 2.0 * self.d[p] / (dx * dx);
            }
            v += self.a[p][k];
        } else if j + 1 == i || i + 1 == j {
            if p == k {
                v += self.d[p] / (dx * dx);
            }
            let s = if j == i + 1 { 1.0 } else { -1.0 };
            v += s * self.g[p][k] / (2.0 * dx);
        }
        v
    }

    /// M·u for a slice in component-major layout.
    pub fn apply_m(&self, u: &[f64]) -> Vec<f64> {
        self.apply_generic(u, false)
    }

    /// Mᵀ·u for a slice in component-major layout.
    pub fn apply_mt(&self, u: &[f64]) -> Vec<f64> {
        self.apply_generic(u, true)
    }

    fn apply_generic(&self, u: &[f64], transpose: bool) -> Vec<f64> {
        let (m, nx) = (self.m, self.grid.nx);
        let n = m * nx;
        let w = self.bandwidth();
        let ui = to_interleaved(u, m, nx);
        let mut out = vec![0.0; n];
        for r in 0..n {
            let lo = r.saturating_sub(w);
            let hi = (r + w).min(n - 1);
            out[r] = (lo..=hi)
                .map(|c| if transpose { self.m_entry(c, r) } else { self.m_entry(r, c) } * ui[c])
                .sum();
        }
        from_interleaved(&out, m, nx)
    }

    /// Dense M, for tests on small grids.
    pub fn dense_m(&self) -> DMatrix<f64> {
        let n = self.m * self.grid.nx;
        DMatrix::from_fn(n, n, |r, c| {
            let (i, j) = (r / self.m, c / self.m);
            if i.abs_diff(j) <= 1 {
                self.m_entry(r, c)
            } else {
                0.0
            }
        })
    }

    /// y ← (I − dt·M)⁻¹ y, slice in component-major layout.
    pub fn step(&self, y: &mut [f64]) {
        let mut v = to_interleaved(y, self.m, self.grid.nx);
        self.lu.solve_in_place(&mut v);
        from_interleaved_into(&v, self.m, self.grid.nx, y);
    }

    /// ψ ← (I − dt·M)⁻ᵀ ψ.
    pub fn step_transpose(&self, y: &mut [f64]) {
        let mut v = to_interleaved(y, self.m, self.grid.nx);
        self.lu.solve_transpose_in_place(&mut v);
        from_interleaved_into(&v, self.m, self.grid.nx, y);
    }
}

fn to_interleaved(u: &[f64], m: usize, nx: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * nx];
    for comp in 0..m {
        for i in 0..nx {
            v[i * m + comp] = u[comp * nx + i];
        }
    }
    v
}

fn from_interleaved(v: &[f64], m: usize, nx: usize) -> Vec<f64> {
    let mut u = vec![0.0; m * nx];
    from_interleaved_into(v, m, nx, &mut u);
    u
}

fn from_interleaved_into(v: &[f64], m: usize, nx: usize, u: &mut [f64]) {
    for comp in 0..m {
        for i in 0..nx {
            u[comp * nx + i] = v[i * m + comp];
        }
    }
}

pub fn assemble(sys: &CoupledSystem, grid: &Grid) -> Result<DiscreteOperator> {
    sys.check_shapes()?;
    if sys.n != 1 {
        return Err(Error::InvalidArgument("the finite-difference solver supports n = 1 only".into()));
    }
    let m = sys.m;
    let d: Vec<f64> = (0..m).map(|p| sys.d1(p)).collect();
    let g: Vec<Vec<f64>> = (0..m).map(|p| (0..m).map(|k| sys.g1(p, k)).collect()).collect();
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let peclet = gmax * grid.dx / dmin;
    if peclet > 2.0 {
        warn!("grid Péclet number {peclet:.3} exceeds 2; centered advection may oscillate");
    }
    let mut opd = DiscreteOperator {
        grid: *grid,
        m,
        d,
        g,
        a: sys.a.clone(),
        lu: BandedLu::factor(1, 0, 0, |_, _| 1.0)?,
        peclet,
    };
    let w = opd.bandwidth();
    let dt = grid.dt;
    let lu = BandedLu::factor(m * grid.nx, w, w, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - dt * opd.m_entry(r, c)
    })?;
    opd.lu = lu;
    Ok(opd)
}

/// (I − dt·M) y^{k+1} = y^k + dt·r^{k+1}.
pub fn solve_forward(opd: &DiscreteOperator, y0: &[f64], source: &TrajectoryField) -> Result<TrajectoryField> {
    let (m, g) = (opd.m, opd.grid);
    if y0.len() != m * g.nx || source.m != m || source.grid.nt != g.nt || source.grid.nx != g.nx {
        return Err(Error::DimensionMismatch("initial data or source does not match the operator".into()));
    }
    let mut traj = TrajectoryField::zeros(g, m);
    traj.slice_mut(0).copy_from_slice(y0);
    let mut cur = y0.to_vec();
    for k in 0..g.nt {
        for (c, r) in cur.iter_mut().zip(source.slice(k + 1)) {
            *c += g.dt * r;
        }
        opd.step(&mut cur);
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(k + 1));
        }
        traj.slice_mut(k + 1).copy_from_slice(&cur);
    }
    Ok(traj)
}

/// ψ^N = ψT, ψ^k = (I − dt·M)⁻ᵀ ψ^{k+1}.
pub fn solve_adjoint(opd: &DiscreteOperator, psi_t: &[f64]) -> Result<TrajectoryField> {
    let (m, g) = (opd.m, opd.grid);
    if psi_t.len() != m * g.nx {
        return Err(Error::DimensionMismatch("terminal data does not match the operator".into()));
    }
    let mut traj = TrajectoryField::zeros(g, m);
    traj.slice_mut(g.nt).copy_from_slice(psi_t);
    let mut cur = psi_t.to_vec();
    for k in (0..g.nt).rev() {
        opd.step_transpose(&mut cur);
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(k));
        }
        traj.slice_mut(k).copy_from_slice(&cur);
    }
    Ok(traj)
}

/// |⟨y^N, ψ^N⟩ − ⟨y^0, ψ^0⟩ − dt·Σ_{k<N} ⟨r^{k+1}, ψ^k⟩|.
pub fn duality_defect_of(y: &TrajectoryField, psi: &TrajectoryField, source: &TrajectoryField) -> f64 {
    let g = y.grid;
    let lhs = inner(y.terminal(), psi.terminal(), g.dx) - inner(y.slice(0), psi.slice(0), g.dx);
    let rhs: f64 = (0..g.nt).map(|k| g.dt * inner(source.slice(k + 1), psi.slice(k), g.dx)).sum();
    (lhs - rhs).abs()
}

pub fn duality_defect(opd: &DiscreteOperator, y0: &[f64], source: &TrajectoryField, psi_t: &[f64]) -> Result<f64> {
    let y = solve_forward(opd, y0, source)?;
    let psi = solve_adjoint(opd, psi_t)?;
    Ok(duality_defect_of(&y, &psi, source))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EnergyCertificate {
    pub c_energy: f64,
    pub monotone: bool,
    /// Largest relative drop of e^{C t_k}‖ψ^k‖² between consecutive levels.
    pub worst_drop: f64,
}

/// Upper bound for the spectral norm used in the energy constant.
fn matrix_bound(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    let mat = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    norm1(&mat).max(norm_inf(&mat))
}

/// C = 2(1 + ‖A‖) + ‖G‖² / min d.
pub fn energy_constant(sys: &CoupledSystem) -> f64 {
    let a = matrix_bound(&sys.a);
    let g: Vec<Vec<f64>> = (0..sys.m).map(|p| (0..sys.m).map(|k| sys.g1(p, k)).collect()).collect();
    let gb = matrix_bound(&g);
    let dmin = (0..sys.m).map(|p| sys.d1(p)).fold(f64::INFINITY, f64::min);
    2.0 * (1.0 + a) + gb * gb / dmin
}

pub fn energy_certificate(sys: &CoupledSystem, traj: &TrajectoryField) -> EnergyCertificate {
    energy_certificate_with(energy_constant(sys), traj, 1e-8)
}

pub fn energy_certificate_with(c_energy: f64, traj: &TrajectoryField, rtol: f64) -> EnergyCertificate {
    let g = traj.grid;
    let e: Vec<f64> = (0..=g.nt).map(|k| (c_energy * g.t(k)).exp() * traj.norm_at(k).powi(2)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..g.nt {
        let scale = e[k].max(e[k + 1]);
        if scale > 0.0 {
            worst = worst.max((e[k] - e[k + 1]) / scale);
        }
    }
    EnergyCertificate { c_energy, monotone: worst <= rtol, worst_drop: worst }
}
