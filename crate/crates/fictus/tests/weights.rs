use std::time::Instant;

use fictus::carleman::{
    build_cutoffs, build_eta0, carleman_functional, compute_s1, regularity_constant, smoothstep, weight_bound_diagnostics,
    CarlemanWeights, S1Rule, WeightConfig,
};
use fictus::pde::{Grid, TrajectoryField};
use fictus::Error;

const T: f64 = 0.5;

fn reference(p: usize, lambda: f64) -> CarlemanWeights {
    let cut = build_cutoffs((0.3, 0.7), p, 0.01).unwrap();
    let eta = build_eta0(1.0, cut.innermost(), p).unwrap();
    let cfg = WeightConfig { lambda, lambda_min: 1e-4, p, ..Default::default() };
    CarlemanWeights::new(&cfg, eta, T).unwrap()
}

#[test]
fn weight_suite() {
    let start = Instant::now();
    for (p, lambda) in [(0, 0.00262), (1, 0.00262), (0, 1.0)] {
        let w = reference(p, lambda);
        let n = 200;
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            assert_eq!(w.eval_rho(0.0, x), 0.0);
            assert_eq!(w.eval_rho(T, x), 0.0);
            for k in 1..n - 1 {
                let t = T * k as f64 / (n - 1) as f64;
                let r = w.eval_rho(t, x);
                assert!((0.0..=1.0).contains(&r), "ρ({t}, {x}) = {r}");
                let (a1, x1) = w.eval_weights(t, x).unwrap();
                let (a2, x2) = w.eval_weights(T - t, x).unwrap();
                assert!((a1 - a2).abs() <= 1e-12 * a1.abs());
                assert!((x1 - x2).abs() <= 1e-12 * x1.abs());
            }
        }
        // minimum over [T/4, 3T/4] sits at the ends
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|k| w.log_rho(T / 4.0 + 0.5 * T * k as f64 / (n - 1) as f64, x)).collect();
            let argmin = (0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
            assert!(argmin == 0 || argmin == n - 1, "x = {x}: argmin {argmin}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 2.0);
}

#[test]
fn star_weights_bound_the_field() {
    let w = reference(0, 0.00262);
    for k in 1..50 {
        let t = T * k as f64 / 50.0;
        let (astar, xistar) = w.eval_star_weights(t).unwrap();
        for i in 0..=50 {
            let (a, xi) = w.eval_weights(t, i as f64 / 50.0).unwrap();
            assert!(a <= astar * (1.0 + 1e-14));
            assert!(xi >= xistar * (1.0 - 1e-14));
        }
    }
}

#[test]
fn s1_rules() {
    let cut = build_cutoffs((0.3, 0.7), 0, 0.01).unwrap();
    let eta = build_eta0(1.0, cut.innermost(), 0).unwrap();
    let lambda = 0.5;
    let cfg = WeightConfig { lambda, ..Default::default() };
    let info = compute_s1(&cfg, &eta, T, lambda);
    // η⁰ ≤ M = 1 and the ratio increases in η⁰, so the maximum is at η⁰ = M
    let direct = 3f64.powi(5) * 7.0 * lambda / 4f64.powi(10) * 11.0 / ((12.0 * lambda).exp() - (11.0 * lambda).exp());
    assert!((info.explicit_term - direct).abs() <= 1e-10 * direct);
    let with_floor = compute_s1(&WeightConfig { s0: 5.0, ..cfg.clone() }, &eta, T, lambda);
    assert_eq!(with_floor.s1, 5.0);
    let norm = compute_s1(&WeightConfig { rule: S1Rule::Normalized, sigma: 2.0, ..cfg }, &eta, T, lambda);
    assert!((norm.s1 - 2.0 * (T.powi(5) + T.powi(10))).abs() < 1e-15);
}

/// Independent midpoint-rule evaluation with analytic u and ∇u.
fn functional_oracle(w: &CarlemanWeights, s: f64, lambda: f64, nt: usize, nx: usize) -> f64 {
    let m = 1.0;
    let pi = std::f64::consts::PI;
    let (ht, hx) = (T / nt as f64, 1.0 / nx as f64);
    let mut total = 0.0;
    for k in 0..nt {
        let t = (k as f64 + 0.5) * ht;
        let tau = (t * (T - t)).powi(5);
        for i in 0..nx {
            let x = (i as f64 + 0.5) * hx;
            let e = w.eta.eval(x);
            let alpha = ((12.0 * lambda * m).exp() - (lambda * (10.0 * m + e)).exp()) / tau;
            let xi = (lambda * (10.0 * m + e)).exp() / tau;
            let u = (pi * x).sin() * t * (T - t);
            let du = pi * (pi * x).cos() * t * (T - t);
            let base = (-2.0 * s * alpha).exp();
            total += s.powi(3) * lambda.powi(4) * base * xi.powi(3) * u * u + s * lambda * lambda * base * xi * du * du;
        }
    }
    total * ht * hx
}

#[test]
fn functional_agrees_with_fine_quadrature() {
    let w = reference(0, 0.00262);
    let grid = Grid::new(100, 200, 1.0, T).unwrap();
    let u = TrajectoryField::from_fn(grid, 1, |t, x, _| (std::f64::consts::PI * x).sin() * t * (T - t));
    for s in [w.s1, 2.0 * w.s1] {
        let got = carleman_functional(&w, s, 0.00262, &u);
        let want = functional_oracle(&w, s, 0.00262, 4000, 2000);
        assert!(want > 0.0);
        assert!((got - want).abs() / want < 0.01, "s = {s}: {got:e} vs {want:e}");
    }
    assert_eq!(carleman_functional(&w, w.s1, 0.00262, &TrajectoryField::zeros(grid, 1)), 0.0);
}

#[test]
fn derivative_bounds_are_finite() {
    let w = reference(0, 0.00262);
    for a in [1.0, 3.0, 7.0] {
        for r in [1, 2, 3] {
            let d = weight_bound_diagnostics(&w, a, r, 200, 100);
            assert!(d.finite && d.time_constant > 0.0 && d.space_constant > 0.0, "{d:?}");
        }
    }
    let ck = regularity_constant(&w, 0.5, 200, 100);
    assert!(ck.is_finite() && ck > 0.0);
}

#[test]
fn eta_and_cutoffs() {
    for (a, b) in [(0.1, 0.2), (0.45, 0.55), (0.8, 0.95)] {
        let eta = build_eta0(1.0, (a, b), 0).unwrap();
        assert!(eta.kappa > 0.0);
        assert!(eta.derivative(0.5 * (a + b)).abs() < 1e-10);
    }
    assert!(matches!(build_eta0(1.0, (0.5, 1.2), 0), Err(Error::InvalidArgument(_))));
    let cut = build_cutoffs((0.3, 0.7), 2, 0.005).unwrap();
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        let th = cut.theta(x);
        assert!((0.0..=1.0).contains(&th));
        if cut.in_omega0(x) {
            assert_eq!(th, 1.0);
        }
        if x <= cut.support.0 || x >= cut.support.1 {
            assert_eq!(th, 0.0);
        }
    }
    assert!(matches!(build_cutoffs((0.3, 0.7), 2, 0.05), Err(Error::DegenerateRegion(_))));
    // flatness of the transition: S_N(z) = O(z^{N+1})
    let ratio = smoothstep(4, 1e-4) / smoothstep(4, 5e-5);
    assert!((ratio - 32.0).abs() < 0.5, "ratio {ratio}");
}
