use std::path::PathBuf;

use fictus_cli::config::{GridSpec, InitialSpec};
use fictus_cli::output::write_trajectory_csv;
use fictus_cli::pipeline::parse_triplets;
use fictus_cli::{parse_config, parse_config_str, run_synthesize, run_weights, CliError, PipelineConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples").join(name)
}

const MINIMAL: &str = r#"{
  "system": { "m": 2, "c": 2, "D": [1, 1], "G": [[0, 0], [0, 0]], "A": [[0, 1], [0, 0]], "T": 0.5, "omega": [0.3, 0.7] }
}"#;

fn problems(text: &str) -> Vec<String> {
    match parse_config_str(text) {
        Err(CliError::Config(p)) => p,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config_str(MINIMAL).unwrap();
    assert_eq!(cfg.grid, GridSpec { nx: 100, nt: 200 });
    assert_eq!(cfg.system.n, 1);
    assert_eq!(cfg.system.length, 1.0);
    assert_eq!(cfg.hum.k_schedule, vec![1e2, 1e3, 1e4, 1e5, 1e6]);
    assert_eq!(cfg.algebra.p_max, 12);
    assert_eq!(cfg.algebra.rank_tol, 1e-12);
    assert_eq!(cfg.weights.lambda_min, 1.0);
    assert_eq!(cfg.weights.c_generic, 1.0);
    assert_eq!(cfg.weights.s0, 0.0);
    assert_eq!(cfg.seed, 0);
    assert!(cfg.initial.is_none());
    let y0 = cfg.initial_on(100).unwrap();
    assert_eq!(y0.len(), 200);
}

#[test]
fn omega_outside_domain_is_rejected() {
    let text = MINIMAL.replace("[0.3, 0.7]", "[0.9, 1.2]");
    let p = problems(&text);
    assert!(p.iter().any(|s| s.contains("omega not strictly interior")), "{p:?}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL.replace("\"T\": 0.5", "\"T\": 0.5, \"Tmax\": 1");
    assert!(problems(&text)[0].contains("unknown field"));
    let text = MINIMAL.replacen('{', "{ \"extra\": true,", 1);
    assert!(problems(&text)[0].contains("unknown field"));
}

#[test]
fn every_violation_is_listed() {
    let text = r#"{
      "system": { "m": 2, "c": 3, "D": [1], "G": [[0, 0]], "A": [[0, 1], [0, 0]], "T": -1, "omega": [0.7, 0.3] },
      "grid": { "Nx": 5, "Nt": 2 },
      "hum": { "k_schedule": [10, 1], "cg_tol": 2 },
      "algebra": { "rank_tol": 0 }
    }"#;
    let p = problems(text);
    for needle in ["system.c", "system.D", "system.G", "system.T", "omega not strictly interior", "grid.Nx", "grid.Nt", "k_schedule", "cg_tol", "rank_tol"] {
        assert!(p.iter().any(|s| s.contains(needle)), "missing {needle} in {p:?}");
    }
}

#[test]
fn non_elliptic_and_shape_errors() {
    let p = problems(&MINIMAL.replace("\"D\": [1, 1]", "\"D\": [1, -1]"));
    assert!(p.iter().any(|s| s.contains("not positive")), "{p:?}");
    let bad_init = MINIMAL.replacen('{', r#"{ "initial": { "sine_power": { "power": 3, "amplitudes": [1] } },"#, 1);
    assert!(problems(&bad_init).iter().any(|s| s.contains("amplitudes")));
}

#[test]
fn reference_configs_round_trip() {
    for name in ["fully_actuated.json", "m4c3.json", "m5c3.json"] {
        let cfg = parse_config(&fixture(name)).unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = parse_config_str(&echo).unwrap();
        assert_eq!(cfg, back, "{name}");
    }
    let cfg = parse_config(&fixture("m4c3.json")).unwrap();
    assert_eq!((cfg.system.m, cfg.system.c), (4, 3));
    assert!(matches!(cfg.initial, Some(InitialSpec::SinePower { power: 3, .. })));
}

#[test]
fn missing_file_is_a_config_error() {
    let err = parse_config(&fixture("no_such_file.json")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

fn small_reference() -> PipelineConfig {
    let mut cfg = parse_config(&fixture("fully_actuated.json")).unwrap();
    cfg.grid = GridSpec { nx: 70, nt: 60 };
    cfg.hum.observability_samples = 8;
    cfg.hum.k_schedule = vec![1e2, 1e4];
    cfg
}

#[test]
fn reports_are_reproducible() {
    let cfg = small_reference();
    let a = run_synthesize(&cfg).unwrap().report;
    let b = run_synthesize(&cfg).unwrap().report;
    assert_eq!(a.exit_code(), 0);
    let ja = serde_json::to_string(&a.to_json_without_timings()).unwrap();
    let jb = serde_json::to_string(&b.to_json_without_timings()).unwrap();
    assert_eq!(ja, jb);
    assert!(!a.timings.is_empty());
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_synthesize(&other).unwrap().report;
    assert_ne!(serde_json::to_string(&c.to_json_without_timings()).unwrap(), ja);
}

#[test]
fn trajectory_csv_has_one_row_per_node_and_component() {
    let cfg = small_reference();
    let run = run_synthesize(&cfg).unwrap();
    let f = run.fields.unwrap();
    let mut buf = Vec::new();
    let rows = write_trajectory_csv(&mut buf, &f.y).unwrap();
    assert_eq!(rows, (cfg.grid.nt + 1) * cfg.grid.nx * cfg.system.m);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), rows + 1);
    assert_eq!(text.lines().next().unwrap(), "t,x,component,value");
}

#[test]
fn weights_dump_covers_the_grid() {
    let cfg = small_reference();
    let rows = run_weights(&cfg).unwrap();
    assert_eq!(rows.len(), (cfg.grid.nt + 1) * cfg.grid.nx);
    assert!(rows.iter().filter(|r| r.t == 0.0).all(|r| r.rho == 0.0 && r.alpha.is_infinite()));
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.theta) && (0.0..=1.0).contains(&r.rho)));
}

#[test]
fn unsolvable_system_stops_after_check() {
    // the unactuated third equation sees no other component
    let text = r#"{
      "system": { "m": 3, "c": 2, "D": [1, 1, 1], "G": [[0, 0.1, 0], [0.1, 0, 0], [0, 0, 0]],
                  "A": [[0, 1, 0.5], [1, 0, 0.5], [0, 0, 0.2]], "T": 0.5, "omega": [0.3, 0.7] }
    }"#;
    let cfg = parse_config_str(text).unwrap();
    let run = run_synthesize(&cfg).unwrap();
    assert_eq!(run.report.exit_code(), 2);
    assert!(run.report.weights.is_none() && run.report.hum.is_none() && run.report.composition.is_none());
    assert!(run.fields.is_none());
}

#[test]
fn triplet_parsing() {
    let pat = parse_triplets("# header\n0 0 1\n1 1 -2.5\n\n2 0 1 # trailing\n").unwrap();
    assert_eq!((pat.rows, pat.cols, pat.entries.len()), (3, 2, 3));
    assert!(matches!(parse_triplets("0 0\n"), Err(CliError::Config(_))));
    assert!(matches!(parse_triplets("0 0 1\n0 0 2\n"), Err(CliError::Config(_))));
}
