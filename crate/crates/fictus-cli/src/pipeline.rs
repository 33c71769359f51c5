//! Stage orchestration: check → weights → fictitious HUM → operator → composition.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use fictus::algebra::{
    decide_solvability, dulmage_mendelsohn, extract_inverse_operator, maximum_matching, verify_right_inverse_with,
    SolvabilityReport, SparsePattern, Verdict,
};
use fictus::carleman::{
    build_cutoffs, build_eta0, compute_s1, regularity_constant, weight_bound_diagnostics, BoundDiagnostics,
    CarlemanWeights, CutoffFamily,
};
use fictus::compose::{combine_and_verify, residual_field, synthesize_reduced, verify_algebraic_residual, ComposedSolution};
use fictus::hum::{
    adjoint_zero_bound_probe, cost_identity_check, observability_probe, penalty_sweep, regularity_proxy,
    HumProblem, ObservabilityProbe, PenaltyRun, SweepFailure,
};
use fictus::model::CoupledSystem;
use fictus::pde::{l2, Grid, TrajectoryField};
use log::info;
use serde::Serialize;

use crate::config::{GridSpec, PipelineConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightSummary {
    pub p: usize,
    pub lambda: f64,
    pub s1: f64,
    pub sigma: f64,
    pub explicit_term: f64,
    pub rho_max: f64,
    /// max ρ over the first and last time levels.
    pub rho_endpoint_max: f64,
    pub eta_center: f64,
    pub eta_power: u32,
    pub eta_kappa: f64,
    pub omega0: (f64, f64),
    pub cutoff_support: (f64, f64),
    pub bounds: Vec<BoundDiagnostics>,
    pub regularity_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub k: f64,
    pub jk: f64,
    pub terminal_norm: f64,
    pub weighted_control_norm: f64,
    pub cg_iters: usize,
    pub cg_residual: f64,
    pub closure: f64,
    pub cost_identity_defect: f64,
    pub adjoint_probe: f64,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HumSummary {
    pub initial_norm: f64,
    pub free_terminal_norm: f64,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<SweepFailure>,
    pub terminal_strictly_decreasing: bool,
    pub terminal_non_increasing: bool,
    pub bound_holds: bool,
    pub cost_non_decreasing: bool,
    /// terminal_norm / ‖y0‖ at the largest k.
    pub terminal_ratio: f64,
    pub observability: Option<ObservabilityProbe>,
    pub regularity_proxy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorSummary {
    pub p: usize,
    pub max_time_order: u32,
    pub max_space_order: usize,
    pub terms: usize,
    pub right_inverse_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementSummary {
    pub grid: GridSpec,
    pub residual_uncontrolled_coarse: f64,
    pub residual_uncontrolled_fine: f64,
    pub ratio: f64,
    pub algebraic_residual_coarse: f64,
    pub algebraic_residual_fine: f64,
    pub terminal_norm_fine: f64,
    pub fictitious_terminal_norm_fine: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionSummary {
    pub solution: ComposedSolution,
    pub algebraic_residual: f64,
    /// 1-based components that carry a control.
    pub controlled_components: Vec<usize>,
    /// max |u| over the components without a control, zero by construction.
    pub uncontrolled_control_max: f64,
    pub refinement: Option<RefinementSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub solvability: SolvabilityReport,
    pub weights: Option<WeightSummary>,
    pub hum: Option<HumSummary>,
    pub operator: Option<OperatorSummary>,
    pub composition: Option<CompositionSummary>,
    pub errors: Vec<StageError>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl PipelineReport {
    /// 0 success, 2 not solvable, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        if self.solvability.verdict != Verdict::Solvable {
            2
        } else if !self.errors.is_empty() {
            3
        } else {
            0
        }
    }

    /// The report with `timings` removed, for reproducibility comparisons.
    pub fn to_json_without_timings(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        v
    }
}

/// Fields kept for CSV export.
#[derive(Debug, Clone)]
pub struct PipelineFields {
    pub y: TrajectoryField,
    pub u: TrajectoryField,
    pub y_fictitious: TrajectoryField,
    pub v_fictitious: TrajectoryField,
    pub residual: TrajectoryField,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub fields: Option<PipelineFields>,
}

pub fn run_check(cfg: &PipelineConfig) -> SolvabilityReport {
    decide_solvability(&cfg.coupled_system(), cfg.algebra.p_max, cfg.algebra.rank_tol)
}

fn grid_of(cfg: &PipelineConfig) -> Result<Grid, CliError> {
    Grid::new(cfg.grid.nx, cfg.grid.nt, cfg.system.length, cfg.system.t_final).map_err(|e| CliError::Config(vec![e.to_string()]))
}

fn require_1d(cfg: &PipelineConfig) -> Result<(), CliError> {
    if cfg.system.n != 1 {
        return Err(CliError::Config(vec![format!("numeric stages support n = 1 only, got n = {}", cfg.system.n)]));
    }
    Ok(())
}

/// Prolongation order for weights and cutoffs: the override, else the solvability search.
fn weight_order(cfg: &PipelineConfig, rep: &SolvabilityReport) -> usize {
    cfg.weights.p.or(rep.p_used).unwrap_or(0)
}

fn build_weights(cfg: &PipelineConfig, p: usize, grid: &Grid) -> fictus::Result<(CarlemanWeights, CutoffFamily)> {
    let sys = &cfg.system;
    let cut = build_cutoffs((sys.omega[0], sys.omega[1]), p, grid.dx)?;
    let eta = build_eta0(sys.length, cut.innermost(), p)?;
    let w = CarlemanWeights::new(&cfg.weights.to_weight_config(p), eta, sys.t_final)?;
    Ok((w, cut))
}

fn weight_summary(cfg: &PipelineConfig, w: &CarlemanWeights, cut: &CutoffFamily, grid: &Grid) -> WeightSummary {
    let p = w.p;
    let info = compute_s1(&cfg.weights.to_weight_config(p), &w.eta, w.t_final, w.lambda);
    let rho = w.rho_grid(grid);
    let nx = grid.nx;
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    let rho_endpoint_max = rho[..nx].iter().chain(&rho[grid.nt * nx..]).copied().fold(0.0, f64::max);
    let a = w.exponent();
    let bounds = (1..=2).map(|r| weight_bound_diagnostics(w, a, r, 50, 50)).collect();
    WeightSummary {
        p,
        lambda: w.lambda,
        s1: w.s1,
        sigma: w.sigma,
        explicit_term: info.explicit_term,
        rho_max,
        rho_endpoint_max,
        eta_center: w.eta.center,
        eta_power: w.eta.power,
        eta_kappa: w.eta.kappa,
        omega0: cut.innermost(),
        cutoff_support: cut.support,
        bounds,
        regularity_constant: regularity_constant(w, cfg.weights.k_reg, 50, 50),
    }
}

fn summarize_run(r: &PenaltyRun, y0: &[f64]) -> RunSummary {
    RunSummary {
        k: r.k,
        jk: r.jk,
        terminal_norm: r.terminal_norm,
        weighted_control_norm: r.weighted_control_norm,
        cg_iters: r.cg_iters,
        cg_residual: r.cg_residual,
        closure: r.closure,
        cost_identity_defect: cost_identity_check(r, y0),
        adjoint_probe: adjoint_zero_bound_probe(r, y0),
        bound_ok: r.terminal_norm <= (2.0 * r.jk / r.k).sqrt() * (1.0 + 1e-12),
    }
}

struct Stopwatch(BTreeMap<String, f64>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.insert(stage.to_string(), start.elapsed().as_secs_f64());
        info!("stage {stage} took {:.3} s", self.0[stage]);
        out
    }
}

/// Largest-k solve and composition on one grid.
fn compose_on(
    sys: &CoupledSystem,
    op: &fictus::algebra::DifferentialOperator,
    pb: &HumProblem,
    run: &PenaltyRun,
    grid: &Grid,
) -> fictus::Result<(ComposedSolution, f64)> {
    let tv = pb.localize(&run.v);
    let (yh, uh) = synthesize_reduced(sys, op, &tv, grid)?;
    let alg = verify_algebraic_residual(sys, &yh, &uh, &tv, grid);
    let cs = combine_and_verify(sys, &run.y, &yh, &uh, grid)?;
    Ok((cs, alg))
}

pub fn run_synthesize(cfg: &PipelineConfig) -> Result<PipelineRun, CliError> {
    require_1d(cfg)?;
    let grid = grid_of(cfg)?;
    let sys = cfg.coupled_system();
    let y0 = cfg.initial_on(grid.nx).expect("initial values match the configured grid");
    let mut clock = Stopwatch(BTreeMap::new());
    let mut errors = Vec::new();
    let mut fail = |stage: &str, e: &dyn std::fmt::Display| errors.push(StageError { stage: stage.into(), error: e.to_string() });

    let solvability = clock.time("check", || run_check(cfg));
    let mut report = PipelineReport {
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        solvability,
        weights: None,
        hum: None,
        operator: None,
        composition: None,
        errors: Vec::new(),
        timings: BTreeMap::new(),
    };
    if report.solvability.verdict != Verdict::Solvable {
        report.timings = clock.0;
        return Ok(PipelineRun { report, fields: None });
    }
    let p = weight_order(cfg, &report.solvability);

    let weights = clock.time("weights", || build_weights(cfg, p, &grid));
    let (w, cut) = match weights {
        Ok(v) => v,
        Err(e) => {
            fail("weights", &e);
            report.errors = errors;
            report.timings = clock.0;
            return Ok(PipelineRun { report, fields: None });
        }
    };
    report.weights = Some(clock.time("weight_diagnostics", || weight_summary(cfg, &w, &cut, &grid)));

    let hum = clock.time("hum", || -> fictus::Result<_> {
        let pb = HumProblem::new(&sys, &grid, &w, &cut)?;
        let free = pb.free_solution(&y0)?;
        let sweep = penalty_sweep(&pb, &y0, &cfg.hum.k_schedule, cfg.hum.cg_tol, cfg.hum.cg_max)?;
        Ok((pb, free, sweep))
    });
    let (pb, sweep) = match hum {
        Ok((pb, free, sweep)) => {
            let n0 = l2(&y0, grid.dx);
            let observability = if cfg.hum.observability_samples > 0 {
                match clock.time("observability", || observability_probe(&pb, cfg.hum.observability_samples, cfg.seed)) {
                    Ok(o) => Some(o),
                    Err(e) => {
                        fail("observability", &e);
                        None
                    }
                }
            } else {
                None
            };
            let last = sweep.runs.last();
            report.hum = Some(HumSummary {
                initial_norm: n0,
                free_terminal_norm: l2(free.terminal(), grid.dx),
                runs: sweep.runs.iter().map(|r| summarize_run(r, &y0)).collect(),
                failures: sweep.failures.clone(),
                terminal_strictly_decreasing: sweep.terminal_strictly_decreasing,
                terminal_non_increasing: sweep.terminal_non_increasing,
                bound_holds: sweep.bound_holds,
                cost_non_decreasing: sweep.cost_non_decreasing,
                terminal_ratio: last.map_or(f64::NAN, |r| if n0 > 0.0 { r.terminal_norm / n0 } else { 0.0 }),
                observability,
                regularity_proxy: last.map_or(f64::NAN, |r| regularity_proxy(&pb, &w, r, cfg.weights.k_reg)),
            });
            for f in &sweep.failures {
                fail("hum", &format!("k = {:e}: {}", f.k, f.error));
            }
            (pb, sweep)
        }
        Err(e) => {
            fail("hum", &e);
            report.errors = errors;
            report.timings = clock.0;
            return Ok(PipelineRun { report, fields: None });
        }
    };

    let operator = clock.time("operator", || -> fictus::Result<_> {
        let op = extract_inverse_operator(&sys, report.solvability.p_used.unwrap_or(0))?;
        let residual = verify_right_inverse_with(&sys, &op, cfg.algebra.verify_trials, cfg.seed)?;
        Ok((op, residual))
    });
    let op = match operator {
        Ok((op, residual)) => {
            report.operator = Some(OperatorSummary {
                p: op.p,
                max_time_order: op.max_time_order(),
                max_space_order: op.max_space_order(),
                terms: op.coeffs().len(),
                right_inverse_residual: residual,
            });
            op
        }
        Err(e) => {
            fail("operator", &e);
            report.errors = errors;
            report.timings = clock.0;
            return Ok(PipelineRun { report, fields: None });
        }
    };

    let Some(run) = sweep.runs.last() else {
        fail("composition", &"no penalized run succeeded");
        report.errors = errors;
        report.timings = clock.0;
        return Ok(PipelineRun { report, fields: None });
    };
    let mut fields = None;
    match clock.time("composition", || compose_on(&sys, &op, &pb, run, &grid)) {
        Ok((cs, alg)) => {
            let residual = residual_field(&sys, &cs.y, Some(&cs.u), None);
            let mut refinement = None;
            if cfg.composition.refinement_check {
                match clock.time("refinement", || refine(cfg, &sys, &op, &w, &cut, &grid, run.k)) {
                    Ok((fine, fine_alg, fine_grid)) => {
                        refinement = Some(RefinementSummary {
                            grid: GridSpec { nx: fine_grid.nx, nt: fine_grid.nt },
                            residual_uncontrolled_coarse: cs.residual_uncontrolled,
                            residual_uncontrolled_fine: fine.residual_uncontrolled,
                            ratio: cs.residual_uncontrolled / fine.residual_uncontrolled,
                            algebraic_residual_coarse: alg,
                            algebraic_residual_fine: fine_alg,
                            terminal_norm_fine: fine.terminal_norm,
                            fictitious_terminal_norm_fine: fine.fictitious_terminal_norm,
                        })
                    }
                    Err(e) => fail("refinement", &e),
                }
            }
            fields = Some(PipelineFields {
                y: cs.y.clone(),
                u: cs.u.clone(),
                y_fictitious: run.y.clone(),
                v_fictitious: pb.localize(&run.v),
                residual,
            });
            report.composition = Some(CompositionSummary {
                algebraic_residual: alg,
                controlled_components: (1..=sys.c).collect(),
                // u has exactly c components, so nothing acts on the rest
                uncontrolled_control_max: 0.0,
                solution: cs,
                refinement,
            });
        }
        Err(e) => fail("composition", &e),
    }
    report.errors = errors;
    report.timings = clock.0;
    Ok(PipelineRun { report, fields })
}

fn refine(
    cfg: &PipelineConfig,
    sys: &CoupledSystem,
    op: &fictus::algebra::DifferentialOperator,
    w: &CarlemanWeights,
    cut: &CutoffFamily,
    grid: &Grid,
    k: f64,
) -> Result<(ComposedSolution, f64, Grid), String> {
    let fine = grid.refined();
    let y0 = cfg.initial_on(fine.nx).ok_or("explicit initial values cannot be resampled on the refined grid")?;
    let pb = HumProblem::new(sys, &fine, w, cut).map_err(|e| e.to_string())?;
    let run = pb.solve_penalized(&y0, k, cfg.hum.cg_tol, cfg.hum.cg_max).map_err(|e| e.to_string())?;
    let (cs, alg) = compose_on(sys, op, &pb, &run, &fine).map_err(|e| e.to_string())?;
    Ok((cs, alg, fine))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightRow {
    pub t: f64,
    pub x: f64,
    pub alpha: f64,
    pub xi: f64,
    pub rho: f64,
    pub theta: f64,
}

/// (t, x, α, ξ, ρ, θ) on every time level and interior node; α and ξ are
/// infinite at t ∈ {0, T}.
pub fn run_weights(cfg: &PipelineConfig) -> Result<Vec<WeightRow>, CliError> {
    require_1d(cfg)?;
    let grid = grid_of(cfg)?;
    let p = match cfg.weights.p {
        Some(p) => p,
        None => weight_order(cfg, &run_check(cfg)),
    };
    let (w, cut) = build_weights(cfg, p, &grid).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut rows = Vec::with_capacity((grid.nt + 1) * grid.nx);
    for k in 0..=grid.nt {
        let t = grid.t(k);
        for i in 0..grid.nx {
            let x = grid.x(i);
            let (alpha, xi) = w.eval_weights(t, x).unwrap_or((f64::INFINITY, f64::INFINITY));
            rows.push(WeightRow { t, x, alpha, xi, rho: w.eval_rho(t, x), theta: cut.theta(x) });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DmReport {
    pub rows: usize,
    pub cols: usize,
    pub structural_rank: usize,
    pub matching: Vec<(usize, usize)>,
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub row_blocks: [usize; 5],
    pub col_blocks: [usize; 5],
    pub hr: Vec<usize>,
    pub sr: Vec<usize>,
    pub vr: Vec<usize>,
    pub hc: Vec<usize>,
    pub sc: Vec<usize>,
    pub vc: Vec<usize>,
}

/// Triplets `row col value`, 0-indexed, one per line; `#` starts a comment.
pub fn parse_triplets(text: &str) -> Result<SparsePattern, CliError> {
    let mut triplets = Vec::new();
    let mut bad = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [r, c, v] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()).zip(v.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(((r, c), v)) => triplets.push((r, c, v)),
            None => bad.push(format!("line {}: expected `row col value`, got `{line}`", ln + 1)),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let rows = triplets.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    let cols = triplets.iter().map(|t| t.1 + 1).max().unwrap_or(0);
    SparsePattern::from_triplets(rows, cols, &triplets).map_err(|e| CliError::Config(vec![e.to_string()]))
}

pub fn run_dm(path: &Path) -> Result<DmReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    dm_report(&parse_triplets(&text)?)
}

pub fn dm_report(pat: &SparsePattern) -> Result<DmReport, CliError> {
    let mt = maximum_matching(pat);
    let dm = dulmage_mendelsohn(pat, &mt).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(DmReport {
        rows: pat.rows,
        cols: pat.cols,
        structural_rank: mt.size,
        matching: dm.matching,
        row_perm: dm.row_perm,
        col_perm: dm.col_perm,
        row_blocks: dm.row_blocks,
        col_blocks: dm.col_blocks,
        hr: dm.hr,
        sr: dm.sr,
        vr: dm.vr,
        hc: dm.hc,
        sc: dm.sc,
        vc: dm.vc,
    })
}
