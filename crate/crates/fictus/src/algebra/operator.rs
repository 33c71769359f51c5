use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// (time order, spatial multi-index) of a constant-coefficient derivative.
pub type OpKey = (u32, Vec<u32>);

/// Scalar constant-coefficient operator Σ c · ∂_t^a ∂^α.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarOp {
    pub terms: BTreeMap<OpKey, f64>,
}

impl ScalarOp {
    pub fn identity(n: usize) -> Self {
        Self::single(0, vec![0; n], 1.0)
    }

    pub fn single(time: u32, alpha: Vec<u32>, coef: f64) -> Self {
        let mut s = ScalarOp::default();
        s.add(time, alpha, coef);
        s
    }

    pub fn add(&mut self, time: u32, alpha: Vec<u32>, coef: f64) {
        if coef == 0.0 {
            return;
        }
        *self.terms.entry((time, alpha)).or_insert(0.0) += coef;
    }

    pub fn add_scaled(&mut self, other: &ScalarOp, s: f64) {
        for ((a, al), &v) in &other.terms {
            self.add(*a, al.clone(), s * v);
        }
    }

    /// Composition; constant coefficients commute.
    pub fn compose(&self, other: &ScalarOp) -> ScalarOp {
        let mut out = ScalarOp::default();
        for ((a1, al1), &v1) in &self.terms {
            for ((a2, al2), &v2) in &other.terms {
                let al: Vec<u32> = al1.iter().zip(al2).map(|(x, y)| x + y).collect();
                out.add(a1 + a2, al, v1 * v2);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&v| v == 0.0)
    }

    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial { nvars: p.nvars, terms: BTreeMap::new() };
        for ((a, al), &v) in &self.terms {
            out.add_scaled(&p.apply_derivative(*a, al), v);
        }
        out
    }
}

/// Matrix of scalar operators mapping `in_dim` fields to `out_dim` fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialOperator {
    pub n: usize,
    pub out_dim: usize,
    pub in_dim: usize,
    /// Prolongation order used to build the operator.
    pub p: usize,
    pub entries: Vec<Vec<ScalarOp>>,
}

impl DifferentialOperator {
    pub fn zeros(n: usize, out_dim: usize, in_dim: usize, p: usize) -> Self {
        DifferentialOperator { n, out_dim, in_dim, p, entries: vec![vec![ScalarOp::default(); in_dim]; out_dim] }
    }

    pub fn max_time_order(&self) -> u32 {
        self.entries.iter().flatten().flat_map(|s| s.terms.keys().map(|k| k.0)).max().unwrap_or(0)
    }

    pub fn max_space_order(&self) -> usize {
        self.entries
            .iter()
            .flatten()
            .flat_map(|s| s.terms.keys().map(|k| super::order(&k.1)))
            .max()
            .unwrap_or(0)
    }

    /// Flat coefficient map (out, in, time order, multi-index) → value.
    pub fn coeffs(&self) -> BTreeMap<(usize, usize, u32, Vec<u32>), f64> {
        let mut out = BTreeMap::new();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                for ((a, al), &v) in &s.terms {
                    out.insert((i, j, *a, al.clone()), v);
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().flat_map(|s| s.terms.values()).all(|v| v.is_finite())
    }
}

pub fn apply_operator_polynomial(op: &DifferentialOperator, inputs: &[Polynomial]) -> Result<Vec<Polynomial>> {
    if inputs.len() != op.in_dim {
        return Err(Error::DimensionMismatch(format!("operator expects {} inputs, got {}", op.in_dim, inputs.len())));
    }
    if let Some(p) = inputs.iter().find(|p| p.nvars != op.n + 1) {
        return Err(Error::DimensionMismatch(format!("polynomial has {} variables, expected {}", p.nvars, op.n + 1)));
    }
    Ok(op
        .entries
        .iter()
        .map(|row| {
            let mut acc = Polynomial::zero(op.n);
            for (s, inp) in row.iter().zip(inputs) {
                acc.add_scaled(&s.apply(inp), 1.0);
            }
            acc
        })
        .collect())
}
