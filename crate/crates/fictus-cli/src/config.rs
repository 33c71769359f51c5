//! Pipeline configuration: JSON schema, defaults and cross-field validation.

use std::path::{Path, PathBuf};

use fictus::carleman::{S1Rule, WeightConfig};
use fictus::model::{validate_system, CoupledSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub m: usize,
    #[serde(default = "one_usize")]
    pub n: usize,
    pub c: usize,
    /// One entry per equation: a scalar (isotropic) or an n×n matrix.
    #[serde(rename = "D")]
    pub d: Vec<DiffusionSpec>,
    /// m×m entries, each a scalar (n = 1) or an n-vector.
    #[serde(rename = "G")]
    pub g: Vec<Vec<DriftSpec>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "L", default = "one_f64")]
    pub length: f64,
    pub omega: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Nt")]
    pub nt: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 100, nt: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S1RuleSpec {
    Explicit,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSpec {
    pub lambda: f64,
    pub lambda_min: f64,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k_reg: f64,
    #[serde(rename = "C_generic")]
    pub c_generic: f64,
    pub s0: f64,
    pub s1_rule: S1RuleSpec,
    /// Prolongation order for the weight exponent; the solvability search decides when absent.
    pub p: Option<usize>,
}

impl Default for WeightsSpec {
    fn default() -> Self {
        let w = WeightConfig::default();
        WeightsSpec {
            lambda: w.lambda,
            lambda_min: w.lambda_min,
            sigma: w.sigma,
            k_reg: w.k_reg,
            c_generic: w.c_generic,
            s0: w.s0,
            s1_rule: S1RuleSpec::Explicit,
            p: None,
        }
    }
}

impl WeightsSpec {
    pub fn to_weight_config(&self, p: usize) -> WeightConfig {
        WeightConfig {
            lambda: self.lambda,
            lambda_min: self.lambda_min,
            sigma: self.sigma,
            p,
            s0: self.s0,
            k_reg: self.k_reg,
            c_generic: self.c_generic,
            rule: match self.s1_rule {
                S1RuleSpec::Explicit => S1Rule::Explicit,
                S1RuleSpec::Normalized => S1Rule::Normalized,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumSpec {
    pub k_schedule: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max: usize,
    /// Random terminal data for the observability probe; 0 skips it.
    pub observability_samples: usize,
}

impl Default for HumSpec {
    fn default() -> Self {
        HumSpec { k_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6], cg_tol: 1e-10, cg_max: 5000, observability_samples: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraSpec {
    pub p_max: usize,
    pub rank_tol: f64,
    /// Random polynomial trials for the right-inverse check.
    pub verify_trials: usize,
}

impl Default for AlgebraSpec {
    fn default() -> Self {
        AlgebraSpec { p_max: 12, rank_tol: 1e-12, verify_trials: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositionSpec {
    /// Repeat the largest-k solve and the composition on the refined grid.
    pub refinement_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// amplitudes[j]·sin(πx/L)^power on component j.
    SinePower { power: i32, amplitudes: Vec<f64> },
    /// m rows of Nx interior values.
    Values(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub trajectories: bool,
    pub weights_csv: bool,
    pub residuals: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub hum: HumSpec,
    #[serde(default)]
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub composition: CompositionSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

pub fn parse_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<PipelineConfig, CliError> {
    let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("malformed config: {e}")]))?;
    let problems = cfg.problems();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(problems))
    }
}

impl PipelineConfig {
    /// Every constraint violation, in a fixed order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.system;
        let (m, n) = (s.m, s.n);
        if m < 2 {
            out.push(format!("system.m = {m} must be at least 2"));
        }
        if n < 1 {
            out.push("system.n must be at least 1".into());
        }
        if s.c < 1 || s.c > m {
            out.push(format!("system.c = {} must lie in 1..={m}", s.c));
        }
        if s.d.len() != m {
            out.push(format!("system.D has {} entries, expected {m}", s.d.len()));
        }
        for (p, d) in s.d.iter().enumerate() {
            if let DiffusionSpec::Matrix(rows) = d {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    out.push(format!("system.D[{p}] must be {n}×{n}"));
                }
            }
        }
        if s.g.len() != m || s.g.iter().any(|r| r.len() != m) {
            out.push(format!("system.G must be {m}×{m}"));
        }
        for (p, row) in s.g.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                match e {
                    DriftSpec::Scalar(_) if n != 1 => out.push(format!("system.G[{p}][{k}] must be a {n}-vector")),
                    DriftSpec::Vector(v) if v.len() != n => out.push(format!("system.G[{p}][{k}] must be a {n}-vector")),
                    _ => {}
                }
            }
        }
        if s.a.len() != m || s.a.iter().any(|r| r.len() != m) {
            out.push(format!("system.A must be {m}×{m}"));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            out.push(format!("system.T = {} must be positive", s.t_final));
        }
        if !(s.length > 0.0 && s.length.is_finite()) {
            out.push(format!("system.L = {} must be positive", s.length));
        }
        let [a, b] = s.omega;
        let interior = 0.0 < a && a < b && b < s.length;
        if !interior {
            out.push(format!("omega not strictly interior: [{a}, {b}] in [0, {}]", s.length));
        }
        if out.is_empty() {
            let report = validate_system(&self.coupled_system());
            out.extend(report.violations.into_iter().filter(|f| f.label != "omega").map(|f| format!("system: {}", f.detail)));
        }

        let g = self.grid;
        if g.nx < 10 {
            out.push(format!("grid.Nx = {} must be at least 10", g.nx));
        }
        if g.nt < 3 {
            out.push(format!("grid.Nt = {} must be at least 3", g.nt));
        }
        if interior && g.nx >= 10 && s.length > 0.0 {
            let dx = s.length / (g.nx + 1) as f64;
            // the nested cutoff regions need room inside ω, the stencils outside it
            let depth = self.weights.p.unwrap_or(0);
            if let Err(e) = fictus::carleman::build_cutoffs((a, b), depth, dx) {
                out.push(format!("grid.Nx = {} is too coarse for omega: {e}", g.nx));
            }
            if a < 3.0 * dx || s.length - b < 3.0 * dx {
                out.push(format!("grid.Nx = {} leaves fewer than 3 cells between omega and the boundary", g.nx));
            }
        }

        if let Err(e) = self.weights.to_weight_config(0).validate() {
            out.push(format!("weights: {e}"));
        }
        let h = &self.hum;
        if h.k_schedule.is_empty() {
            out.push("hum.k_schedule must not be empty".into());
        }
        if h.k_schedule.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            out.push("hum.k_schedule entries must be positive and finite".into());
        }
        if h.k_schedule.windows(2).any(|w| !(w[0] < w[1])) {
            out.push("hum.k_schedule must be strictly increasing".into());
        }
        if !(h.cg_tol > 0.0 && h.cg_tol < 1.0) {
            out.push(format!("hum.cg_tol = {} must lie in (0, 1)", h.cg_tol));
        }
        if h.cg_max == 0 {
            out.push("hum.cg_max must be positive".into());
        }
        let al = &self.algebra;
        if al.p_max > 12 {
            out.push(format!("algebra.p_max = {} exceeds the supported limit 12", al.p_max));
        }
        if !(al.rank_tol > 0.0 && al.rank_tol < 1.0) {
            out.push(format!("algebra.rank_tol = {} must lie in (0, 1)", al.rank_tol));
        }
        match &self.initial {
            Some(InitialSpec::SinePower { power, amplitudes }) => {
                if *power < 1 {
                    out.push("initial.sine_power.power must be at least 1".into());
                }
                if amplitudes.len() != m {
                    out.push(format!("initial.sine_power.amplitudes has {} entries, expected {m}", amplitudes.len()));
                }
            }
            Some(InitialSpec::Values(rows)) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != g.nx) {
                    out.push(format!("initial.values must be {m}×{}", g.nx));
                }
            }
            None => {}
        }
        out
    }

    pub fn coupled_system(&self) -> CoupledSystem {
        let s = &self.system;
        let n = s.n;
        let d = s
            .d
            .iter()
            .map(|e| match e {
                DiffusionSpec::Scalar(v) => (0..n).map(|i| (0..n).map(|k| if i == k { *v } else { 0.0 }).collect()).collect(),
                DiffusionSpec::Matrix(rows) => rows.clone(),
            })
            .collect();
        let g = s
            .g
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| match e {
                        DriftSpec::Scalar(v) => vec![*v; n],
                        DriftSpec::Vector(v) => v.clone(),
                    })
                    .collect()
            })
            .collect();
        CoupledSystem {
            m: s.m,
            n,
            c: s.c,
            d,
            g,
            a: s.a.clone(),
            t_final: s.t_final,
            length: s.length,
            omega: (s.omega[0], s.omega[1]),
        }
    }

    /// Initial datum on `nx` interior nodes, component-major. Explicit values
    /// exist only on the configured grid.
    pub fn initial_on(&self, nx: usize) -> Option<Vec<f64>> {
        let m = self.system.m;
        let l = self.system.length;
        let dx = l / (nx + 1) as f64;
        let (power, amps) = match &self.initial {
            Some(InitialSpec::Values(rows)) => {
                return (nx == self.grid.nx).then(|| rows.iter().flatten().copied().collect());
            }
            Some(InitialSpec::SinePower { power, amplitudes }) => (*power, amplitudes.clone()),
            None => (3, vec![1.0; m]),
        };
        Some(
            amps.iter()
                .flat_map(|a| (0..nx).map(move |i| a * (std::f64::consts::PI * (i + 1) as f64 * dx / l).sin().powi(power)))
                .collect(),
        )
    }
}
