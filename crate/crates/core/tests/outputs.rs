use std::fs;

use gencol_core::cost::{build_cost_matrix, column_cost};
use gencol_core::experiment::{execute, reference_value, ReferenceKind, RunSpec};
use gencol_core::gencol::run_with_observer;
use gencol_core::io::read_columns;
use gencol_core::oracles::plan_marginal;
use gencol_core::{GenColConfig, Marginal, Termination};

fn homogeneous(n: u32, len: usize, seed: u64) -> GenColConfig {
    let mut cfg = GenColConfig::coulomb_1d(n, len, 0.1, Marginal::uniform(len)).unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn columns_file_recosts_to_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = homogeneous(5, 20, 3);
    let reference = reference_value(ReferenceKind::Monge, &cfg, 0).unwrap();
    execute(&cfg, reference, Some(tmp.path())).unwrap();

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let final_cost = summary["final_cost"].as_f64().unwrap();
    let costs = build_cost_matrix(&cfg.grid, &cfg.potential).unwrap();
    let plan = read_columns(&tmp.path().join("columns.csv")).unwrap();
    let recost: f64 = plan.iter().map(|(c, w)| w * column_cost(c, &costs).unwrap()).sum();
    assert!((recost - final_cost).abs() <= 1e-12 * final_cost.abs(), "{recost} vs {final_cost}");

    let marginal = plan_marginal(&plan);
    assert!(marginal.iter().all(|m| (m - 0.05).abs() < 1e-9));
}

#[test]
fn trace_has_one_row_per_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = homogeneous(3, 9, 5);
    let (result, _) = execute(&cfg, None, Some(tmp.path())).unwrap();
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), result.trace.records.len() + 1);
}

#[test]
fn run_invariants_hold_throughout() {
    let mut cfg = homogeneous(5, 20, 11);
    cfg.max_iter = 300;
    let capacity = cfg.capacity();
    let mut values = Vec::new();
    let result = run_with_observer(&cfg, |rec| {
        assert!(rec.certificate.holds(1e-8), "iteration {}: {:?}", rec.iteration, rec.certificate);
        assert!(rec.active <= capacity);
        if let Some(g) = rec.gain {
            assert!(g > 0.0);
        }
        values.push(rec.value);
    })
    .unwrap();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
    // The default initial pool is exactly βℓ, so the size bounds apply from the start.
    assert!(result.trace.max_pool_after_insert <= capacity + 1);
    assert!(result.trace.max_pool_after_prune <= capacity);
    let total: f64 = result.plan.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn sampling_budget_exhaustion_is_reported() {
    let mut cfg = homogeneous(5, 20, 2);
    cfg.max_samples = 1;
    cfg.max_iter = 10_000;
    let result = gencol_core::gencol::run(&cfg).unwrap();
    assert_eq!(result.trace.termination, Termination::SamplingBudgetExhausted);
}

#[test]
fn run_spec_matches_direct_config() {
    let spec = RunSpec::from_toml("particles = 5\ngridpoints = 20\nseed = 3\ninit-random = \"ntimesl\"\n").unwrap();
    let cfg = spec.to_config().unwrap();
    assert_eq!(cfg.init_random_columns, 100);
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.max_iter, 200 * 20);
    assert_eq!(cfg.max_samples, 1000);
}
