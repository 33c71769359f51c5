mod common;

use std::time::Instant;

use fictus::algebra::{
    build_prolonged_matrix, dulmage_mendelsohn, find_square_candidate, hopcroft_karp, maximum_matching, Matching, SparsePattern, Tag,
};
use fictus::model::CoupledSystem;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Prolonged adjoint matrix for m = 5, c = 3, n = 1, p = 3, written out by hand.
const DISPLAYED: &str = include_str!("data/displayed_m5c3.txt");

/// Value of a symbolic entry. Diffusion entries come from −div(d∇) and carry −d.
fn token_value(sys: &CoupledSystem, tok: &str) -> f64 {
    let idx = |s: &str| -> (usize, usize) {
        let b = s.as_bytes();
        ((b[0] - b'1') as usize, (b[1] - b'1') as usize)
    };
    match tok {
        "0" => 0.0,
        "-1" => -1.0,
        "d1" => -sys.d1(3),
        "d2" => -sys.d1(4),
        t if t.starts_with("-a") => {
            let (l, j) = idx(&t[2..]);
            -sys.a[l][j]
        }
        t if t.starts_with('g') => {
            let (l, j) = idx(&t[1..]);
            sys.g1(l, j)
        }
        t => panic!("unknown token {t}"),
    }
}

/// Coefficients with pairwise distinct magnitudes so positions are unambiguous.
fn distinct_m5c3() -> CoupledSystem {
    let mut g = vec![vec![0.0; 5]; 5];
    let mut a = vec![vec![0.0; 5]; 5];
    for l in 0..5 {
        for j in 0..5 {
            a[l][j] = 0.1 + 0.01 * (5 * l + j) as f64;
            g[l][j] = -(0.5 + 0.013 * (5 * l + j) as f64);
        }
    }
    CoupledSystem::one_d(3, &[1.0, 1.1, 1.2, 1.7, 2.3], g, a, 1.0, 1.0, (0.3, 0.7))
}

fn displayed_matrix(sys: &CoupledSystem) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = DISPLAYED.lines().map(|r| r.split_whitespace().map(|t| token_value(sys, t)).collect()).collect();
    DMatrix::from_fn(20, 20, |i, j| rows[i][j])
}

#[test]
fn prolonged_matrix_matches_transcription() {
    let start = Instant::now();
    let sys = distinct_m5c3();
    let pm = build_prolonged_matrix(&sys, 3);
    assert_eq!((pm.pattern.rows, pm.pattern.cols), (20, 20));
    let expect = displayed_matrix(&sys);
    let got = pm.pattern.to_dense();
    for i in 0..20 {
        for j in 0..20 {
            assert_eq!(got[(i, j)], expect[(i, j)], "entry ({}, {})", i + 1, j + 1);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn time_columns_hold_a_single_minus_one() {
    let sys = distinct_m5c3();
    let pm = build_prolonged_matrix(&sys, 3);
    let cadj = pm.pattern.col_adjacency();
    for (c, lab) in pm.col_labels.iter().enumerate() {
        if lab.time {
            assert_eq!(cadj[c].len(), 1);
            let e = pm.pattern.get(cadj[c][0], c).unwrap();
            assert_eq!(e.value, -1.0);
            assert!(matches!(e.tag, Some(Tag::NegOne { .. })));
        }
    }
}

#[test]
fn overdetermined_block_and_square_candidate() {
    let sys = distinct_m5c3();
    let pm = build_prolonged_matrix(&sys, 3);
    let mt = maximum_matching(&pm.pattern);
    assert_eq!(mt.size, 18);
    let dm = dulmage_mendelsohn(&pm.pattern, &mt).unwrap();
    let mut vr = dm.vr.clone();
    vr.sort_unstable();
    let mut vc = dm.vc.clone();
    vc.sort_unstable();
    let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    assert_eq!(one_based(&vr), vec![1, 2, 3, 6, 7, 8, 11, 12, 13, 16, 17, 18]);
    assert_eq!(one_based(&vc), vec![1, 2, 5, 6, 7, 8, 11, 12, 15, 16]);

    let full = displayed_matrix(&sys);
    let tok = |s: &str| token_value(&sys, s);
    let c_rows = |shift: usize, out: &mut Vec<Vec<f64>>, width: usize| {
        for j in 1..=3 {
            let mut row = vec![0.0; width];
            row[shift] = tok(&format!("-a4{j}"));
            row[shift + 1] = tok(&format!("-a5{j}"));
            row[shift + 2] = tok(&format!("g4{j}"));
            row[shift + 3] = tok(&format!("g5{j}"));
            out.push(row);
        }
    };
    let mut stack = Vec::new();
    for b in 0..4 {
        c_rows(2 * b, &mut stack, 10);
    }
    for (ri, &r) in vr.iter().enumerate() {
        for (ci, &c) in vc.iter().enumerate() {
            assert_eq!(full[(r, c)], stack[ri][ci]);
            assert_eq!(pm.pattern.to_dense()[(r, c)], stack[ri][ci]);
        }
    }

    let cand = find_square_candidate(&sys, 3).unwrap();
    assert_eq!(one_based(&cand.rows), vec![1, 2, 3, 6, 7, 8]);
    assert_eq!(one_based(&cand.cols), vec![1, 2, 5, 6, 7, 8]);
    let mut dagger = Vec::new();
    c_rows(0, &mut dagger, 6);
    c_rows(2, &mut dagger, 6);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(cand.matrix[(i, j)], dagger[i][j]);
        }
    }
}

fn numeric_rank(pat: &SparsePattern) -> usize {
    let d = pat.to_dense();
    if d.nrows() == 0 || d.ncols() == 0 {
        return 0;
    }
    let sv = d.svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > smax * 1e-10).count()
}

fn random_pattern(rows: usize, cols: usize, bits: &[bool], vals: &[f64]) -> SparsePattern {
    let trip: Vec<(usize, usize, f64)> = (0..rows * cols)
        .filter(|&k| bits[k])
        .map(|k| (k / cols, k % cols, vals[k]))
        .collect();
    SparsePattern::from_triplets(rows, cols, &trip).unwrap()
}

fn sets(dm: &fictus::algebra::DMDecomposition) -> [Vec<usize>; 6] {
    let s = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    [s(&dm.vr), s(&dm.hr), s(&dm.sr), s(&dm.vc), s(&dm.hc), s(&dm.sc)]
}

fn pattern_strategy() -> impl Strategy<Value = SparsePattern> {
    (1usize..10, 1usize..10).prop_flat_map(|(r, c)| {
        (
            Just(r),
            Just(c),
            proptest::collection::vec(proptest::bool::weighted(0.3), r * c),
            proptest::collection::vec(0.5f64..2.0, r * c),
        )
            .prop_map(|(r, c, bits, vals)| random_pattern(r, c, &bits, &vals))
    })
}

proptest! {
    #[test]
    fn matching_bounds_numeric_rank(pat in pattern_strategy()) {
        let mt = maximum_matching(&pat);
        prop_assert!(mt.size >= numeric_rank(&pat));
        for (r, c) in mt.edges() {
            prop_assert!(pat.get(r, c).is_some());
        }
    }

    #[test]
    fn coarse_decomposition_invariants(pat in pattern_strategy()) {
        let mt = maximum_matching(&pat);
        let dm = dulmage_mendelsohn(&pat, &mt).unwrap();
        let [vr, hr, sr, vc, hc, sc] = sets(&dm);
        let mut rows: Vec<usize> = vr.iter().chain(&hr).chain(&sr).copied().collect();
        rows.sort_unstable();
        prop_assert_eq!(rows, (0..pat.rows).collect::<Vec<_>>());
        let mut cols: Vec<usize> = vc.iter().chain(&hc).chain(&sc).copied().collect();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..pat.cols).collect::<Vec<_>>());
        let (rb, cb) = dm.block_of();
        for e in &pat.entries {
            match rb[e.row] {
                0 => {}
                1 => prop_assert!(cb[e.col] >= 2, "square rows reach only square or vertical columns"),
                _ => prop_assert_eq!(cb[e.col], 3),
            }
        }
    }

    #[test]
    fn decomposition_does_not_depend_on_matching(pat in pattern_strategy()) {
        let a = maximum_matching(&pat);
        let mut radj = pat.row_adjacency();
        for l in radj.iter_mut() {
            l.reverse();
        }
        let b = hopcroft_karp(&radj, pat.cols, Some(Matching::empty(pat.rows, pat.cols)));
        prop_assert_eq!(a.size, b.size);
        let da = dulmage_mendelsohn(&pat, &a).unwrap();
        let db = dulmage_mendelsohn(&pat, &b).unwrap();
        prop_assert_eq!(sets(&da), sets(&db));
    }
}

#[test]
fn prolonged_matrices_are_block_triangular() {
    for seed in 0..5 {
        for (m, c, p) in [(5, 3, 3), (4, 3, 1), (3, 2, 2), (6, 4, 2)] {
            let sys = common::random_system(m, c, seed);
            let pm = build_prolonged_matrix(&sys, p);
            let mt = maximum_matching(&pm.pattern);
            let dm = dulmage_mendelsohn(&pm.pattern, &mt).unwrap();
            let (rb, cb) = dm.block_of();
            for e in &pm.pattern.entries {
                if rb[e.row] >= 2 {
                    assert_eq!(cb[e.col], 3);
                }
            }
            // rows of actuated equations are reachable from the unmatched ones
            for (r, lab) in pm.row_labels.iter().enumerate() {
                if lab.eq < c && mt.size < pm.pattern.rows {
                    assert!(dm.vr.contains(&r));
                }
            }
        }
    }
}
