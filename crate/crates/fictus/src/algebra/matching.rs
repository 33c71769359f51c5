use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::pattern::{SparsePattern, Tag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub row_to_col: Vec<Option<usize>>,
    pub col_to_row: Vec<Option<usize>>,
    pub size: usize,
}

impl Matching {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Matching { row_to_col: vec![None; rows], col_to_row: vec![None; cols], size: 0 }
    }

    pub fn insert(&mut self, row: usize, col: usize) {
        debug_assert!(self.row_to_col[row].is_none() && self.col_to_row[col].is_none());
        self.row_to_col[row] = Some(col);
        self.col_to_row[col] = Some(row);
        self.size += 1;
    }

    /// Matched (row, col) pairs in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c))).collect()
    }
}

const INF: usize = usize::MAX;

/// Hopcroft–Karp augmentation starting from `start`.
/// Rows are the left side; `adj[r]` lists the columns of row r.
pub fn hopcroft_karp(adj: &[Vec<usize>], n_cols: usize, start: Option<Matching>) -> Matching {
    let n_rows = adj.len();
    let mut mt = start.unwrap_or_else(|| Matching::empty(n_rows, n_cols));
    let mut dist = vec![INF; n_rows];
    while bfs(adj, &mt, &mut dist) {
        for r in 0..n_rows {
            if mt.row_to_col[r].is_none() && dfs(r, adj, &mut mt, &mut dist) {
                mt.size += 1;
            }
        }
    }
    mt
}

fn bfs(adj: &[Vec<usize>], mt: &Matching, dist: &mut [usize]) -> bool {
    let mut q = VecDeque::new();
    for r in 0..adj.len() {
        if mt.row_to_col[r].is_none() {
            dist[r] = 0;
            q.push_back(r);
        } else {
            dist[r] = INF;
        }
    }
    let mut found = false;
    while let Some(r) = q.pop_front() {
        for &c in &adj[r] {
            match mt.col_to_row[c] {
                Some(r2) if dist[r2] == INF => {
                    dist[r2] = dist[r] + 1;
                    q.push_back(r2);
                }
                Some(_) => {}
                None => found = true,
            }
        }
    }
    found
}

fn dfs(r: usize, adj: &[Vec<usize>], mt: &mut Matching, dist: &mut [usize]) -> bool {
    for &c in &adj[r] {
        let ok = match mt.col_to_row[c] {
            None => true,
            Some(r2) => dist[r2] == dist[r] + 1 && dfs(r2, adj, mt, dist),
        };
        if ok {
            mt.row_to_col[r] = Some(c);
            mt.col_to_row[c] = Some(r);
            return true;
        }
    }
    dist[r] = INF;
    false
}

/// Maximum matching that contains every −1 time-derivative edge.
///
/// Those columns hold a single entry, so the edges are pairwise disjoint and
/// any maximum matching can be rerouted to include them.
pub fn maximum_matching(pat: &SparsePattern) -> Matching {
    let mut mt = Matching::empty(pat.rows, pat.cols);
    for e in &pat.entries {
        if matches!(e.tag, Some(Tag::NegOne { .. }))
            && mt.row_to_col[e.row].is_none()
            && mt.col_to_row[e.col].is_none()
        {
            mt.insert(e.row, e.col);
        }
    }
    hopcroft_karp(&pat.row_adjacency(), pat.cols, Some(mt))
}
