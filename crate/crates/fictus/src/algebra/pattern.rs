use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{multi_indices, order, prolongation_counts, ProlongationCounts};
use crate::error::{Error, Result};
use crate::model::CoupledSystem;

/// Symbolic origin of a prolonged-matrix entry. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    /// −a_{lj}: unknown ψ_l in equation j.
    NegA { l: usize, j: usize },
    /// g^dir_{lj}: unknown ∂_dir ψ_l in equation j.
    G { l: usize, j: usize, dir: usize },
    /// −1 on the time-derivative unknown of component `comp`.
    NegOne { comp: usize },
    /// −(d^{ik} + d^{ki}) or −d^{ii} on a second derivative of ψ_comp.
    NegD { comp: usize, i: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub tag: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePattern {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<PatternEntry>,
}

impl SparsePattern {
    /// Builds a pattern from triplets, rejecting out-of-range and duplicate positions.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!("entry ({r}, {c}) outside {rows}×{cols}")));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidArgument(format!("duplicate entry ({r}, {c})")));
            }
            entries.push(PatternEntry { row: r, col: c, value: v, tag: None });
        }
        Ok(SparsePattern { rows, cols, entries })
    }

    pub fn row_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.rows];
        for e in &self.entries {
            adj[e.row].push(e.col);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn col_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.cols];
        for e in &self.entries {
            adj[e.col].push(e.row);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for e in &self.entries {
            m[(e.row, e.col)] = e.value;
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&PatternEntry> {
        self.entries.iter().find(|e| e.row == row && e.col == col)
    }
}

/// Row of the prolonged matrix: equation `eq` differentiated by ∂^beta.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub eq: usize,
    pub beta: Vec<u32>,
}

/// Column: the unknown ∂_t^{time} ∂^alpha ψ_comp.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub time: bool,
    pub comp: usize,
    pub alpha: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProlongedMatrix {
    pub p: usize,
    pub counts: ProlongationCounts,
    pub pattern: SparsePattern,
    pub row_labels: Vec<RowLabel>,
    pub col_labels: Vec<ColumnLabel>,
}

impl ProlongedMatrix {
    pub fn level(&self, row: usize) -> usize {
        order(&self.row_labels[row].beta)
    }
}

fn column_labels(m: usize, n: usize, c: usize, p: usize) -> Vec<ColumnLabel> {
    let space = |k: usize, out: &mut Vec<ColumnLabel>| {
        for alpha in multi_indices(n, k) {
            for comp in c..m {
                out.push(ColumnLabel { time: false, comp, alpha: alpha.clone() });
            }
        }
    };
    let time = |k: usize, out: &mut Vec<ColumnLabel>| {
        for alpha in multi_indices(n, k) {
            for comp in (c..m).rev() {
                out.push(ColumnLabel { time: true, comp, alpha: alpha.clone() });
            }
        }
    };
    let mut cols = Vec::new();
    space(0, &mut cols);
    time(0, &mut cols);
    space(1, &mut cols);
    space(2, &mut cols);
    for k in 1..=p {
        time(k, &mut cols);
        space(k + 2, &mut cols);
    }
    cols
}

fn add_dir(alpha: &[u32], dir: usize) -> Vec<u32> {
    let mut a = alpha.to_vec();
    a[dir] += 1;
    a
}

/// Prolongs the adjoint structural system `p` times in space.
///
/// Equation j reads Σ_{l>c} (g_{lj}·∇ − a_{lj}) ψ_l, plus (−∂t − div(d_j∇)) ψ_j
/// when j is unactuated.
pub fn build_prolonged_matrix(sys: &CoupledSystem, p: usize) -> ProlongedMatrix {
    let (m, n, c) = (sys.m, sys.n, sys.c);
    let col_labels = column_labels(m, n, c, p);
    let index: HashMap<&ColumnLabel, usize> = col_labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let col = |time: bool, comp: usize, alpha: Vec<u32>| -> usize {
        index[&ColumnLabel { time, comp, alpha }]
    };

    let mut row_labels = Vec::new();
    let mut acc: BTreeMap<(usize, usize), (f64, Tag)> = BTreeMap::new();
    for k in 0..=p {
        for beta in multi_indices(n, k) {
            for j in 0..m {
                let row = row_labels.len();
                row_labels.push(RowLabel { eq: j, beta: beta.clone() });
                let mut put = |c: usize, v: f64, tag: Tag| {
                    let e = acc.entry((row, c)).or_insert((0.0, tag));
                    e.0 += v;
                };
                for l in c..m {
                    put(col(false, l, beta.clone()), -sys.a[l][j], Tag::NegA { l, j });
                    for dir in 0..n {
                        put(col(false, l, add_dir(&beta, dir)), sys.g[l][j][dir], Tag::G { l, j, dir });
                    }
                }
                if j >= c {
                    put(col(true, j, beta.clone()), -1.0, Tag::NegOne { comp: j });
                    for i in 0..n {
                        for kk in 0..n {
                            let alpha = add_dir(&add_dir(&beta, i), kk);
                            let tag = Tag::NegD { comp: j, i: i.min(kk), k: i.max(kk) };
                            put(col(false, j, alpha), -sys.d[j][i][kk], tag);
                        }
                    }
                }
            }
        }
    }
    let entries = acc
        .into_iter()
        .filter(|(_, (v, _))| *v != 0.0)
        .map(|((row, col), (value, tag))| PatternEntry { row, col, value, tag: Some(tag) })
        .collect();
    let counts = prolongation_counts(m, n, c, p);
    debug_assert_eq!(row_labels.len(), counts.e);
    debug_assert_eq!(col_labels.len(), counts.u);
    ProlongedMatrix {
        p,
        counts,
        pattern: SparsePattern { rows: row_labels.len(), cols: col_labels.len(), entries },
        row_labels,
        col_labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> CoupledSystem {
        CoupledSystem::one_d(1, &[1.0, 2.0], vec![vec![0.5, 0.25], vec![0.75, 1.5]], vec![vec![1.0, 2.0], vec![3.0, 4.0]], 1.0, 1.0, (0.3, 0.7))
    }

    #[test]
    fn two_by_four_for_m2_c1() {
        let pm = build_prolonged_matrix(&pair(), 0);
        assert_eq!((pm.pattern.rows, pm.pattern.cols), (2, 4));
        let labels: Vec<_> = pm.col_labels.iter().map(|l| (l.time, l.alpha[0])).collect();
        assert_eq!(labels, vec![(false, 0), (true, 0), (false, 1), (false, 2)]);
        // equation 1: −a_21 ψ2 + g_21 ∂ψ2
        assert_eq!(pm.pattern.get(0, 0).unwrap().value, -3.0);
        assert_eq!(pm.pattern.get(0, 2).unwrap().value, 0.75);
        // equation 2 carries −1 on ∂tψ2 and −d_2 on ∂²ψ2
        assert_eq!(pm.pattern.get(1, 1).unwrap().value, -1.0);
        assert_eq!(pm.pattern.get(1, 3).unwrap().value, -2.0);
    }

    #[test]
    fn triplets_reject_duplicates() {
        assert!(SparsePattern::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparsePattern::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
