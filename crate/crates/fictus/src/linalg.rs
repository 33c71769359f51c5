//! Small dense helpers and a banded LU with partial pivoting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Induced 1-norm (max column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Induced ∞-norm (max row sum).
pub fn norm_inf(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number from a pivoted LU; 0 when singular.
pub fn rcond(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let an = norm1(a);
    if an == 0.0 {
        return 0.0;
    }
    match a.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => 1.0 / (an * norm1(&inv)),
        _ => 0.0,
    }
}

/// Square banded matrix with lower bandwidth `kl` and upper bandwidth `ku`,
/// factored in place as a sequence of row swaps and eliminations.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Builds from a closure returning A[i][j] for |i-j| within the band.
    pub fn factor<F: Fn(usize, usize) -> f64>(n: usize, kl: usize, ku: usize, entry: F) -> Result<Self> {
        let w = 2 * kl + ku + 1;
        let mut lu = BandedLu { n, kl, ku, w, data: vec![0.0; n * w], piv: vec![0; n] };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let idx = lu.idx(i, j);
                lu.data[idx] = entry(i, j);
            }
        }
        lu.decompose()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.w + (j + self.kl - i)
    }

    fn decompose(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let rmax = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=rmax {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::IllConditionedStep(k));
            }
            self.piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=rmax {
                let ir = self.idx(r, k);
                let l = self.data[ir] / pivot;
                self.data[ir] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let (a, b) = (self.idx(r, j), self.idx(k, j));
                        self.data[a] -= l * self.data[b];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    b[r] -= self.data[self.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }

    /// Solves Aᵀ x = b in place using the same factorization.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let reach = self.kl + self.ku;
        // Uᵀ z = b
        for k in 0..n {
            let mut s = b[k];
            for i in k.saturating_sub(reach)..k {
                s -= self.data[self.idx(i, k)] * b[i];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
        for k in (0..n).rev() {
            let mut s = 0.0;
            for r in k + 1..=(k + self.kl).min(n - 1) {
                s += self.data[self.idx(r, k)] * b[r];
            }
            b[k] -= s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}
