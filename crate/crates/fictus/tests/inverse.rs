mod common;

use std::time::Instant;

use fictus::algebra::{
    apply_operator_polynomial, check_rank_condition, check_square_candidate, decide_solvability, extract_inverse_operator,
    verify_on_monomials, verify_right_inverse, verify_right_inverse_with, Polynomial, Regime, Verdict,
};
use fictus::model::CoupledSystem;
use fictus::Error;

fn first_solvable(m: usize, c: usize, from: u64) -> (u64, CoupledSystem) {
    (from..from + 200)
        .map(|s| (s, common::random_system(m, c, s)))
        .find(|(_, sys)| decide_solvability(sys, 8, 1e-12).verdict == Verdict::Solvable)
        .expect("a generic draw is solvable")
}

#[test]
fn rank_condition_on_random_m4c3() {
    let sys = common::random_system(4, 3, 7);
    let rep = check_rank_condition(&sys);
    assert_eq!(rep.regime, Regime::CGeH);
    assert_eq!(rep.verdict, Verdict::Solvable);
    // the three 2×2 determinants [[a4α, g4α], [a4β, g4β]]
    for (x, y) in [(0, 1), (0, 2), (1, 2)] {
        let det = sys.a[3][x] * sys.g1(3, y) - sys.a[3][y] * sys.g1(3, x);
        assert!(det.abs() > 1e-6);
    }
    assert_eq!(rep.condition_numbers.len(), 3);
}

#[test]
fn decoupled_last_row_is_not_solvable() {
    let mut sys = common::random_system(4, 3, 3);
    sys.a[3] = vec![0.0; 4];
    for k in 0..4 {
        sys.g[3][k] = vec![0.0];
    }
    let rep = check_rank_condition(&sys);
    assert_eq!(rep.verdict, Verdict::NotSolvable);
    assert_eq!(rep.failing_subset, Some(vec![1, 2]));
    assert_eq!(decide_solvability(&sys, 6, 1e-12).verdict, Verdict::NotSolvable);
}

#[test]
fn m5c3_uses_square_candidate() {
    let (_, sys) = first_solvable(5, 3, 11);
    let rep = decide_solvability(&sys, 8, 1e-12);
    assert_eq!(rep.regime, Regime::CLtH);
    // the 6×6 block sits in levels 0 and 1, so it can surface before p = 3
    let p = rep.p_used.unwrap();
    assert!(p <= 3);
    assert_eq!(rep.candidate.unwrap().size, 6);
    let direct = check_square_candidate(&sys, 3).unwrap();
    assert_eq!(direct.verdict, Verdict::Solvable);
    let cand = direct.candidate.unwrap();
    assert_eq!((cand.size, cand.q), (6, 1));
}

#[test]
fn proportional_unactuated_rows_are_not_solvable() {
    let mut sys = common::random_system(5, 3, 5);
    for k in 0..5 {
        sys.a[4][k] = 2.5 * sys.a[3][k];
        sys.g[4][k][0] = 2.5 * sys.g[3][k][0];
    }
    let rep = check_square_candidate(&sys, 3).unwrap();
    assert_eq!(rep.verdict, Verdict::NotSolvable);
    assert!(rep.failing_subset.is_some());
    assert!(matches!(extract_inverse_operator(&sys, 3), Err(Error::NotSolvableAtP { p: 3, .. })));
}

#[test]
fn right_inverse_identity_holds_exactly() {
    let start = Instant::now();
    for (m, c) in [(4, 3), (5, 3)] {
        let (seed, sys) = first_solvable(m, c, 100);
        let p = decide_solvability(&sys, 8, 1e-12).p_used.unwrap();
        let op = extract_inverse_operator(&sys, p).unwrap();
        assert!(op.max_time_order() <= 1);
        assert!(op.max_space_order() <= p + 2, "order {} at p = {p}", op.max_space_order());
        let r = verify_right_inverse(&sys, &op, 50).unwrap();
        assert!(r <= 1e-8, "m={m} seed={seed} residual {r:e}");
        assert!(verify_on_monomials(&sys, &op).unwrap() <= 1e-8);
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn corrupted_operator_is_detected() {
    let (_, sys) = first_solvable(5, 3, 100);
    let mut op = extract_inverse_operator(&sys, 3).unwrap();
    let (key, v) = op.entries[0][3].terms.iter().next().map(|(k, v)| (k.clone(), *v)).unwrap();
    op.entries[0][3].terms.insert(key, v + 1e-3);
    assert!(verify_right_inverse(&sys, &op, 10).unwrap() > 1e-6);

    // operator of one system against the coefficients of another
    let good = extract_inverse_operator(&sys, 3).unwrap();
    let mut other = sys.clone();
    other.a[4][0] += 0.1;
    assert!(verify_right_inverse_with(&other, &good, 10, 1).unwrap() > 1e-6);
}

#[test]
fn fully_actuated_inverse_is_negated_identity() {
    let sys = common::random_system(3, 3, 2);
    let op = extract_inverse_operator(&sys, 0).unwrap();
    let phi: Vec<Polynomial> = (0..3).map(|i| Polynomial::monomial(1, vec![1, i as u32 + 1], 1.0 + i as f64)).collect();
    let out = apply_operator_polynomial(&op, &phi).unwrap();
    for i in 0..3 {
        assert!(out[i].terms.is_empty());
        assert_eq!(out[3 + i], phi[i].scaled(-1.0));
    }
}

#[test]
fn verdict_is_invariant_under_coupling_scaling() {
    for seed in 0..10 {
        let sys = common::random_system(5, 3, seed);
        let mut scaled = sys.clone();
        for row in scaled.a.iter_mut() {
            row.iter_mut().for_each(|v| *v *= 3.0);
        }
        for row in scaled.g.iter_mut() {
            row.iter_mut().for_each(|v| v[0] *= 3.0);
        }
        let a = decide_solvability(&sys, 6, 1e-12);
        let b = decide_solvability(&scaled, 6, 1e-12);
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.p_used, b.p_used);
    }
}
