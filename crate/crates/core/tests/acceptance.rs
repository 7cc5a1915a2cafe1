//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use gencol_core::cost::{build_cost_matrix, column_cost, column_cost_bruteforce, pair_marginal, plan_pair_marginal};
use gencol_core::experiment::execute;
use gencol_core::gencol::{run_with_observer, seeded_rng};
use gencol_core::oracles::{
    cdp_bruteforce, clique_to_pdp, e_matrix_extremum_check, homogeneous_monge_solution, pdp_bruteforce, plan_cost,
    solve_full_lp, Graph,
};
use gencol_core::state_space::{column_count, enumerate_columns, random_column};
use gencol_core::{Certificate, CostMatrix, GenColConfig, GenColResult, Marginal};

const TAU: f64 = 1e-8;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        println!("{} criterion {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

/// Outcome of one GenCol run with per-solve bookkeeping.
struct Observed {
    result: GenColResult,
    worst: Certificate,
    monotone: bool,
}

fn observed_run(cfg: &GenColConfig) -> Observed {
    let mut worst = Certificate::default();
    let mut last = f64::INFINITY;
    let mut monotone = true;
    let result = run_with_observer(cfg, |rec| {
        worst = worst.merge(&rec.certificate);
        monotone &= rec.value <= last + TAU;
        last = rec.value;
    })
    .expect("run succeeds");
    Observed { result, worst, monotone }
}

fn homogeneous(n: u32, len: usize, seed: u64) -> (GenColConfig, f64) {
    let mut cfg = GenColConfig::coulomb_1d(n, len, 0.1, Marginal::uniform(len)).unwrap();
    cfg.init_random_columns = n as usize * len;
    cfg.seed = seed;
    let costs = build_cost_matrix(&cfg.grid, &cfg.potential).unwrap();
    let monge = plan_cost(&homogeneous_monge_solution(len, n).unwrap(), &costs);
    cfg.reference = Some(monge);
    (cfg, monge)
}

struct Thermo {
    runs: Vec<Observed>,
    monge: f64,
    elapsed: Duration,
}

impl Thermo {
    fn run(n: u32, len: usize) -> Self {
        let start = Instant::now();
        let mut monge = 0.0;
        let runs = (1..=5)
            .map(|seed| {
                let (cfg, m) = homogeneous(n, len, seed);
                monge = m;
                observed_run(&cfg)
            })
            .collect();
        Self { runs, monge, elapsed: start.elapsed() }
    }

    fn max_error(&self) -> f64 {
        self.runs.iter().map(|r| (r.result.cost - self.monge).abs()).fold(0.0, f64::max)
    }

    fn samples(&self) -> Vec<usize> {
        self.runs.iter().map(|r| r.result.trace.sampled_columns).collect()
    }

    fn average_samples(&self) -> f64 {
        let s = self.samples();
        s.iter().sum::<usize>() as f64 / s.len() as f64
    }
}

fn random_symmetric(len: usize, rng: &mut impl Rng) -> CostMatrix {
    let mut entries = vec![0.0; len * len];
    for i in 0..len {
        for j in i..len {
            let v = rng.random_range(0.0..10.0);
            entries[i * len + j] = v;
            entries[j * len + i] = v;
        }
    }
    CostMatrix::from_entries(len, entries).unwrap()
}

fn cost_equivalence(report: &mut Report) {
    let start = Instant::now();
    let mut rng = seeded_rng(101);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=40);
        let n = rng.random_range(2..=15);
        let c = random_symmetric(len, &mut rng);
        let col = random_column(len, n, &mut rng);
        let fast = column_cost(&col, &c).unwrap();
        let brute = column_cost_bruteforce(&col, &c).unwrap();
        worst = worst.max((fast - brute).abs() / (1.0 + brute.abs()));
    }
    let t = start.elapsed();
    report.check(
        1,
        "cost formula equivalence",
        worst <= 1e-10 && t < Duration::from_secs(5),
        format!("10000 columns, worst relative error {worst:.2e}, {:.2} s", t.as_secs_f64()),
    );
}

fn enumeration_counts(report: &mut Report) {
    let a = enumerate_columns(5, 3, u128::MAX).unwrap().len();
    let b = enumerate_columns(20, 5, u128::MAX).unwrap().len();
    let c = column_count(40, 10).unwrap();
    let ok = a == 35
        && b == 42_504
        && column_count(5, 3) == Some(35)
        && column_count(20, 5) == Some(42_504)
        && c == 8_217_822_536;
    report.check(2, "column enumeration counts", ok, format!("(5,3) -> {a}, (20,5) -> {b}, (40,10) -> {c}"));
}

fn small_exactness(report: &mut Report, certs: &mut Vec<(Certificate, bool)>) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (n, len) in [(2u32, 6usize), (3, 6), (3, 8)] {
        for seed in 1..=20u64 {
            let mut rng = seeded_rng(1000 + seed);
            let raw: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(1..=10u32))).collect();
            let total: f64 = raw.iter().sum();
            let marginal = Marginal::from_weights(raw.iter().map(|w| w / total).collect()).unwrap();
            let mut cfg = GenColConfig::coulomb_1d(n, len, 0.1, marginal.clone()).unwrap();
            cfg.seed = seed;
            let costs = build_cost_matrix(&cfg.grid, &cfg.potential).unwrap();
            let exact = solve_full_lp(n, &costs, &marginal, u128::MAX).unwrap().value;
            let obs = observed_run(&cfg);
            worst = worst.max((obs.result.cost - exact).abs());
            certs.push((obs.worst, obs.monotone));
            runs += 1;
        }
    }
    let t = start.elapsed();
    report.check(
        3,
        "small-instance exactness",
        worst <= 1e-8 && t < Duration::from_secs(60),
        format!("{runs} runs without reference, worst |cost - full LP| {worst:.2e}, {:.2} s", t.as_secs_f64()),
    );
}

fn pair_distances(result: &GenColResult) -> BTreeSet<usize> {
    plan_pair_marginal(&result.plan).unwrap().nonzeros(1e-12).into_iter().map(|(i, j, _)| i.abs_diff(j)).collect()
}

fn homogeneous_small(report: &mut Report, thermo: &Thermo) {
    let avg = thermo.average_samples();
    let expected: BTreeSet<usize> = [4, 8, 12, 16].into_iter().collect();
    let supports_ok = thermo.runs.iter().all(|r| pair_distances(&r.result) == expected);
    let (cfg, monge) = homogeneous(5, 20, 1);
    let costs = build_cost_matrix(&cfg.grid, &cfg.potential).unwrap();
    let full = solve_full_lp(5, &costs, &cfg.marginal, 42_504).unwrap().value;
    let ok = thermo.max_error() <= 1e-8
        && (51.16..=5116.0).contains(&avg)
        && supports_ok
        && (full - monge).abs() <= 1e-8
        && thermo.elapsed < Duration::from_secs(60);
    report.check(
        4,
        "homogeneous exactness N=5 l=20",
        ok,
        format!(
            "worst |cost - Monge| {:.2e}, samples {:?} average {avg:.1} (target 511.6), pair distances {}, full LP - Monge {:.2e}, {:.2} s",
            thermo.max_error(),
            thermo.samples(),
            if supports_ok { "{4,8,12,16}" } else { "unexpected" },
            full - monge,
            thermo.elapsed.as_secs_f64()
        ),
    );
}

fn homogeneous_medium(report: &mut Report, thermo: &Thermo) {
    let avg = thermo.average_samples();
    let ok =
        thermo.max_error() <= 1e-8 && (323.34..=32334.0).contains(&avg) && thermo.elapsed < Duration::from_secs(300);
    report.check(
        5,
        "homogeneous exactness N=10 l=40",
        ok,
        format!(
            "worst |cost - Monge| {:.2e}, samples {:?} average {avg:.1} (target 3233.4), {:.2} s",
            thermo.max_error(),
            thermo.samples(),
            thermo.elapsed.as_secs_f64()
        ),
    );
}

fn scaling(report: &mut Report, systems: &[(u32, &Thermo)]) {
    let avgs: Vec<(f64, f64)> = systems.iter().map(|(n, t)| (f64::from(*n), t.average_samples())).collect();
    let slopes: Vec<f64> = avgs.windows(2).map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln()).collect();
    let increasing = avgs.windows(2).all(|w| w[1].1 > w[0].1);
    let ok = increasing && slopes.iter().all(|&s| s < 3.5);
    let last = systems.last().unwrap().1;
    let exhausted =
        last.runs.iter().filter(|r| r.result.trace.termination.as_str() != "converged_to_reference").count();
    report.check(
        6,
        "sampling scales polynomially",
        ok,
        format!(
            "averages {:?}, log-log slopes {:?}, N=15 runs not reaching the optimum: {exhausted}/5, {:.2} s",
            avgs.iter().map(|a| format!("{:.1}", a.1)).collect::<Vec<_>>(),
            slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>(),
            last.elapsed.as_secs_f64()
        ),
    );
}

fn certificates(report: &mut Report, certs: &[(Certificate, bool)]) {
    let worst = certs.iter().fold(Certificate::default(), |acc, (c, _)| acc.merge(c));
    let monotone = certs.iter().all(|(_, m)| *m);
    report.check(
        7,
        "LP certificates on every solve",
        worst.holds(TAU) && monotone,
        format!(
            "{} runs, worst residual {:.1e} negativity {:.1e} dual {:.1e} gap {:.1e} slackness {:.1e}, values nonincreasing: {monotone}",
            certs.len(),
            worst.primal_residual,
            worst.negativity,
            worst.dual_violation,
            worst.relative_gap,
            worst.slackness
        ),
    );
}

fn pair_marginal_identities(report: &mut Report) {
    let mut rng = seeded_rng(808);
    let mut worst = 0.0f64;
    let mut symmetric_nonneg = true;
    for _ in 0..1000 {
        let len = rng.random_range(1..=30);
        let n = rng.random_range(2..=15);
        let col = random_column(len, n, &mut rng);
        let m = pair_marginal(&col).unwrap();
        for i in 0..len {
            for j in 0..len {
                symmetric_nonneg &= m.get(i, j) == m.get(j, i) && m.get(i, j) >= 0.0;
            }
        }
        worst = worst.max((m.total() - 1.0).abs());
        for (r, l) in m.row_sums().iter().zip(col.to_probability()) {
            worst = worst.max((r - l).abs());
        }
    }
    report.check(
        8,
        "pair marginal identities",
        symmetric_nonneg && worst <= 1e-12,
        format!("1000 columns, symmetric and nonnegative: {symmetric_nonneg}, worst sum/row error {worst:.1e}"),
    );
}

fn reduction(report: &mut Report) {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges = pairs.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &e)| e);
            let g = Graph::new(n, edges).unwrap();
            for k in 1..=n.min(5) {
                let clique = cdp_bruteforce(&g, k).unwrap();
                let pricing = pdp_bruteforce(&clique_to_pdp(&g, k).unwrap(), u128::MAX).unwrap();
                checked += 1;
                mismatches += usize::from(clique != pricing);
            }
        }
    }
    let t = start.elapsed();
    report.check(
        9,
        "clique reduction equivalence",
        mismatches == 0 && t < Duration::from_secs(120),
        format!("{checked} (graph, K') pairs with K' <= n, {mismatches} mismatches, {:.2} s", t.as_secs_f64()),
    );
}

fn lemma(report: &mut Report) {
    let mut ok = true;
    let mut found = Vec::new();
    for q in 2..=7u32 {
        let (max, argmax) = e_matrix_extremum_check(q).unwrap();
        ok &= u64::from(q * (q - 1)) == max && argmax == vec![vec![1; q as usize]];
        found.push(format!("q={q}:{max}"));
    }
    report.check(
        10,
        "extremum of the all-ones off-diagonal form",
        ok,
        format!("{}, unique all-ones maximizer", found.join(" ")),
    );
}

fn determinism(report: &mut Report) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (cfg, monge) = homogeneous(5, 20, 1);
    execute(&cfg, Some(monge), Some(a.path())).unwrap();
    execute(&cfg, Some(monge), Some(b.path())).unwrap();
    let ta = std::fs::read(a.path().join("trace.csv")).unwrap();
    let tb = std::fs::read(b.path().join("trace.csv")).unwrap();
    report.check(
        11,
        "deterministic traces",
        !ta.is_empty() && ta == tb,
        format!("two N=5 l=20 seed-1 runs, trace.csv {} bytes, identical: {}", ta.len(), ta == tb),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let mut certs = Vec::new();

    cost_equivalence(&mut report);
    enumeration_counts(&mut report);
    small_exactness(&mut report, &mut certs);

    let small = Thermo::run(5, 20);
    homogeneous_small(&mut report, &small);
    let medium = Thermo::run(10, 40);
    homogeneous_medium(&mut report, &medium);
    let large = Thermo::run(15, 60);
    scaling(&mut report, &[(5, &small), (10, &medium), (15, &large)]);

    for t in [&small, &medium] {
        certs.extend(t.runs.iter().map(|r| (r.worst, r.monotone)));
    }
    certificates(&mut report, &certs);
    pair_marginal_identities(&mut report);
    reduction(&mut report);
    lemma(&mut report);
    determinism(&mut report);

    if report.failures == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} acceptance criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
