use std::collections::BTreeMap;

use rand::Rng;

/// Polynomial in (t, x_1, …, x_n) with real coefficients.
/// Keys are exponent vectors `[t, x_1, …, x_n]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(n_space: usize) -> Self {
        Polynomial { nvars: n_space + 1, terms: BTreeMap::new() }
    }

    pub fn monomial(n_space: usize, exps: Vec<u32>, coef: f64) -> Self {
        assert_eq!(exps.len(), n_space + 1);
        let mut p = Self::zero(n_space);
        p.add_term(exps, coef);
        p
    }

    /// Random polynomial with t-degree ≤ `deg_t` and total x-degree ≤ `deg_x`,
    /// coefficients uniform on [−1, 1].
    pub fn random<R: Rng>(n_space: usize, deg_t: u32, deg_x: u32, rng: &mut R) -> Self {
        let mut p = Self::zero(n_space);
        for a in 0..=deg_t {
            for k in 0..=deg_x {
                for alpha in super::multi_indices(n_space, k as usize) {
                    let mut e = vec![a];
                    e.extend(alpha);
                    p.add_term(e, rng.random_range(-1.0..=1.0));
                }
            }
        }
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let e = self.terms.entry(exps).or_insert(0.0);
        *e += coef;
    }

    pub fn add_scaled(&mut self, other: &Polynomial, s: f64) {
        for (e, &v) in &other.terms {
            self.add_term(e.clone(), s * v);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = Polynomial { nvars: self.nvars, terms: BTreeMap::new() };
        p.add_scaled(self, s);
        p
    }

    /// ∂^order with respect to variable `var` (0 = t).
    pub fn derivative(&self, var: usize, order: u32) -> Self {
        let mut out = Polynomial { nvars: self.nvars, terms: BTreeMap::new() };
        if order == 0 {
            return self.clone();
        }
        for (e, &v) in &self.terms {
            if e[var] < order {
                continue;
            }
            let mut f = 1.0;
            for i in 0..order {
                f *= (e[var] - i) as f64;
            }
            let mut e2 = e.clone();
            e2[var] -= order;
            out.add_term(e2, v * f);
        }
        out
    }

    /// ∂_t^{time} ∂_x^{alpha}.
    pub fn apply_derivative(&self, time: u32, alpha: &[u32]) -> Self {
        let mut p = self.derivative(0, time);
        for (i, &a) in alpha.iter().enumerate() {
            p = p.derivative(i + 1, a);
        }
        p
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, v)| v * e.iter().zip(point).map(|(&k, &z)| z.powi(k as i32)).product::<f64>())
            .sum()
    }
}
