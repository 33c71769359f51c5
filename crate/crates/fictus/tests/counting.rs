mod common;

use fictus::algebra::{binomial, build_prolonged_matrix, find_min_prolongation, multi_indices, prolongation_counts};
use fictus::Error;
use proptest::prelude::*;

/// Number of multi-indices in {0..=k}^n of order at most k, by exhaustive enumeration.
fn brute_f(n: usize, k: usize) -> usize {
    let total = (k + 1).pow(n as u32);
    (0..total)
        .filter(|&code| {
            let mut c = code;
            let mut s = 0;
            for _ in 0..n {
                s += c % (k + 1);
                c /= k + 1;
            }
            s <= k
        })
        .count()
}

#[test]
fn counts_match_enumeration() {
    for n in 1..=3 {
        for p in 0..=6 {
            let f_p = brute_f(n, p);
            let f_p2 = brute_f(n, p + 2);
            for m in 1..=6 {
                for c in 0..=m {
                    let k = prolongation_counts(m, n, c, p);
                    assert_eq!((k.f_p, k.f_p2), (f_p, f_p2), "n={n} p={p}");
                    assert_eq!(k.e, m * f_p);
                    assert_eq!(k.u, (m - c) * (f_p2 + f_p));
                }
            }
        }
    }
}

#[test]
fn multi_indices_are_exhaustive_and_graded() {
    for n in 1..=3 {
        for k in 0..=6 {
            let idx = multi_indices(n, k);
            assert_eq!(idx.len(), binomial(k + n - 1, n - 1));
            assert!(idx.iter().all(|a| a.iter().sum::<u32>() as usize == k));
            assert!(idx.windows(2).all(|w| w[0] > w[1]), "descending lexicographic");
        }
    }
}

#[test]
fn prolonged_matrix_has_counted_shape() {
    for n in 1..=3 {
        for p in 0..=3 {
            for (m, c) in [(2, 1), (3, 2), (5, 3)] {
                let sys = common::random_system_nd(m, n, c, (n * 100 + p) as u64);
                let pm = build_prolonged_matrix(&sys, p);
                let k = prolongation_counts(m, n, c, p);
                assert_eq!((pm.pattern.rows, pm.pattern.cols), (k.e, k.u), "m={m} c={c} n={n} p={p}");
            }
        }
    }
}

#[test]
fn no_prolongation_for_half_actuation() {
    for m in 2..=8 {
        for c in 0..=m / 2 {
            assert_eq!(find_min_prolongation(m, 1, c, 50), Err(Error::NoProlongationExists));
        }
    }
}

proptest! {
    #[test]
    fn min_prolongation_is_first_overdetermined(m in 2usize..9, n in 1usize..4, extra in 0usize..4) {
        let c = (m / 2 + 1 + extra).min(m);
        let p = find_min_prolongation(m, n, c, 64).unwrap();
        let k = prolongation_counts(m, n, c, p);
        prop_assert!(k.e > k.u);
        for q in 0..p {
            let k = prolongation_counts(m, n, c, q);
            prop_assert!(k.e <= k.u);
        }
    }
}
