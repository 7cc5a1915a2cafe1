//! Run configurations, reference values, and experiment suites.
//!
//! A [`RunSpec`] mirrors the command-line flags key for key, so the same
//! settings can live in a flat TOML file or be given on the command line.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{build_cost_matrix, PairPotential};
use crate::error::{Error, Result};
use crate::gencol::{run_with_observer, ExhaustionPolicy, GenColConfig, GenColResult, MutationStrategy};
use crate::io::{self, SummaryRecord, TraceWriter};
use crate::oracles::{homogeneous_monge_solution, plan_cost, solve_full_lp, DEFAULT_FULL_LP_CAP};
use crate::state_space::{column_count, Grid, Marginal, MarginalKind};

/// Settings for a single run. Every field is optional; unset fields take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunSpec {
    pub particles: Option<u32>,
    pub gridpoints: Option<usize>,
    pub spacing: Option<f64>,
    pub beta: Option<usize>,
    pub epsilon: Option<f64>,
    /// `uniform`, `sine`, or `file:PATH`.
    pub marginal: Option<String>,
    /// CSV of 1-based neighbour lists for grids loaded from file.
    pub neighbors: Option<PathBuf>,
    /// CSV ℓ×ℓ table replacing the Coulomb potential.
    pub cost_matrix: Option<PathBuf>,
    pub seed: Option<u64>,
    pub maxiter: Option<usize>,
    pub maxsamples: Option<usize>,
    /// `betaminus1`, `ntimesl`, or a count.
    pub init_random: Option<String>,
    /// `stochastic` or `best_neighbor`.
    pub mutation: Option<String>,
    /// `terminate` or `insert_last`.
    pub on_exhaustion: Option<String>,
    /// `none`, `full-lp`, or `monge`.
    pub reference: Option<String>,
    pub reference_tol: Option<f64>,
    pub full_lp_cap: Option<u64>,
    pub lp_tol: Option<f64>,
    pub activity_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceKind {
    None,
    FullLp,
    Monge,
}

impl RunSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Values set in `over` replace those in `self`.
    pub fn overlay(&self, over: &RunSpec) -> RunSpec {
        macro_rules! pick {
            ($($f:ident),*) => { RunSpec { $($f: over.$f.clone().or_else(|| self.$f.clone()),)* } };
        }
        pick!(
            particles,
            gridpoints,
            spacing,
            beta,
            epsilon,
            marginal,
            neighbors,
            cost_matrix,
            seed,
            maxiter,
            maxsamples,
            init_random,
            mutation,
            on_exhaustion,
            reference,
            reference_tol,
            full_lp_cap,
            lp_tol,
            activity_tol
        )
    }

    pub fn reference_kind(&self) -> Result<ReferenceKind> {
        match self.reference.as_deref().unwrap_or("none") {
            "none" => Ok(ReferenceKind::None),
            "full-lp" | "full_lp" => Ok(ReferenceKind::FullLp),
            "monge" => Ok(ReferenceKind::Monge),
            other => Err(Error::InvalidConfig(format!("unknown reference '{other}'"))),
        }
    }

    fn grid_and_marginal(&self) -> Result<(Grid, Marginal)> {
        let spacing = self.spacing.unwrap_or(1.0);
        match self.marginal.as_deref().unwrap_or("uniform") {
            spec @ ("uniform" | "sine") => {
                let len = self.gridpoints.ok_or_else(|| Error::InvalidConfig("--gridpoints is required".into()))?;
                let grid = Grid::uniform_1d(len, spacing)?;
                let kind = if spec == "uniform" { MarginalKind::Uniform } else { MarginalKind::Sine };
                Ok((grid, Marginal::build(&kind, len)?))
            }
            other => {
                let path = other
                    .strip_prefix("file:")
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown marginal '{other}'")))?;
                let (dim, coords, weights) = io::read_sites_csv(Path::new(path))?;
                let len = weights.len();
                if let Some(g) = self.gridpoints {
                    if g != len {
                        return Err(Error::DimensionMismatch { expected: g, got: len });
                    }
                }
                let grid = match &self.neighbors {
                    Some(p) => Grid::new(dim, coords, io::read_neighbors_csv(p, len)?)?,
                    None if dim == 1 => Grid::chain_1d(coords)?,
                    None => {
                        return Err(Error::InvalidConfig(
                            "grids with more than one dimension need a neighbours file".into(),
                        ))
                    }
                };
                Ok((grid, Marginal::from_weights(weights)?))
            }
        }
    }

    /// Builds the solver configuration.
    pub fn to_config(&self) -> Result<GenColConfig> {
        let n = self.particles.ok_or_else(|| Error::InvalidConfig("--particles is required".into()))?;
        let (grid, marginal) = self.grid_and_marginal()?;
        let potential = match &self.cost_matrix {
            Some(p) => PairPotential::Tabulated(io::read_cost_matrix_csv(p)?),
            None => PairPotential::coulomb(self.epsilon.unwrap_or(0.1)),
        };
        let len = grid.len();
        let mut cfg = GenColConfig::new(n, grid, marginal, potential);
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        cfg.init_random_columns = match self.init_random.as_deref().unwrap_or("betaminus1") {
            "betaminus1" => cfg.beta.saturating_sub(1) * len,
            "ntimesl" => n as usize * len,
            count => count.parse().map_err(|_| Error::InvalidConfig(format!("bad init-random value '{count}'")))?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.maxiter {
            cfg.max_iter = m;
        }
        if let Some(m) = self.maxsamples {
            cfg.max_samples = m;
        }
        cfg.mutation = match self.mutation.as_deref().unwrap_or("stochastic") {
            "stochastic" => MutationStrategy::Stochastic,
            "best_neighbor" | "best-neighbor" => MutationStrategy::BestNeighbor,
            other => return Err(Error::InvalidConfig(format!("unknown mutation '{other}'"))),
        };
        cfg.on_exhaustion = match self.on_exhaustion.as_deref().unwrap_or("terminate") {
            "terminate" => ExhaustionPolicy::Terminate,
            "insert_last" | "insert-last" => ExhaustionPolicy::InsertLast,
            other => return Err(Error::InvalidConfig(format!("unknown exhaustion policy '{other}'"))),
        };
        if let Some(t) = self.reference_tol {
            cfg.reference_tol = t;
        }
        if let Some(t) = self.lp_tol {
            cfg.lp_tol = t;
        }
        if let Some(t) = self.activity_tol {
            cfg.activity_tol = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference optimum for `cfg`, if one was requested.
    pub fn reference_value(&self, cfg: &GenColConfig) -> Result<Option<f64>> {
        reference_value(self.reference_kind()?, cfg, self.full_lp_cap.map_or(DEFAULT_FULL_LP_CAP, u128::from))
    }
}

pub fn reference_value(kind: ReferenceKind, cfg: &GenColConfig, cap: u128) -> Result<Option<f64>> {
    let costs = build_cost_matrix(&cfg.grid, &cfg.potential)?;
    match kind {
        ReferenceKind::None => Ok(None),
        ReferenceKind::FullLp => Ok(Some(solve_full_lp(cfg.n_particles, &costs, &cfg.marginal, cap)?.value)),
        ReferenceKind::Monge => {
            if !cfg.marginal.is_uniform() {
                return Err(Error::InvalidConfig("the Monge reference needs a uniform marginal".into()));
            }
            if cfg.grid.dim() != 1 {
                return Err(Error::InvalidConfig("the Monge reference needs a 1D chain".into()));
            }
            let plan = homogeneous_monge_solution(cfg.grid.len(), cfg.n_particles)?;
            Ok(Some(plan_cost(&plan, &costs)))
        }
    }
}

/// Runs one configuration; streams `trace.csv` and writes the other outputs into `out` when given.
pub fn execute(
    cfg: &GenColConfig,
    reference: Option<f64>,
    out: Option<&Path>,
) -> Result<(GenColResult, SummaryRecord)> {
    let mut cfg = cfg.clone();
    cfg.reference = reference;
    let mut trace = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(TraceWriter::create(&dir.join("trace.csv"))?)
        }
        None => None,
    };
    let start = Instant::now();
    let mut write_err = None;
    let result = run_with_observer(&cfg, |rec| {
        if let Some(t) = trace.as_mut() {
            if let Err(e) = t.write(rec) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let wall = start.elapsed().as_secs_f64();
    let summary = SummaryRecord::new(&result, reference, cfg.reference_tol, wall);
    if let Some(dir) = out {
        io::emit_results(&result, &cfg.grid, dir, &summary)?;
    }
    Ok((result, summary))
}

/// A batch of experiments, each run once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentManifest {
    pub output: PathBuf,
    #[serde(default)]
    pub parallel: bool,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Experiment {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(flatten)]
    pub spec: RunSpec,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.experiments {
            let mut seen = std::collections::HashSet::new();
            if e.seeds.is_empty() {
                return Err(Error::InvalidConfig(format!("experiment '{}' has no seeds", e.name)));
            }
            if let Some(s) = e.seeds.iter().find(|s| !seen.insert(**s)) {
                return Err(Error::InvalidConfig(format!("experiment '{}' repeats seed {s}", e.name)));
            }
            if e.name.is_empty() || e.name.contains(['/', '\\']) {
                return Err(Error::InvalidConfig(format!("bad experiment name '{}'", e.name)));
            }
            e.spec.reference_kind()?;
        }
        Ok(())
    }
}

/// One row of a suite summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub experiment: String,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: SummaryRecord,
}

/// Per-experiment aggregate in the layout of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentAggregate {
    pub experiment: String,
    pub particles: u32,
    pub gridpoints: usize,
    /// Size of the full column space, as a decimal string (it can exceed 64 bits).
    pub total_columns: String,
    pub accepted_columns: Vec<usize>,
    pub sampled_columns: Vec<usize>,
    pub sampled_average: f64,
    pub all_matched: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub runs: Vec<SuiteRun>,
    pub aggregates: Vec<ExperimentAggregate>,
}

/// Runs every (experiment, seed) pair, each in its own `output/<name>/seed-<seed>` directory,
/// then writes `suite_summary.json` and `suite_summary.csv` into `output`.
pub fn run_suite(manifest: &ExperimentManifest) -> Result<SuiteSummary> {
    manifest.validate()?;
    let mut jobs = Vec::new();
    for e in &manifest.experiments {
        let base = e.spec.to_config()?;
        let reference = e.spec.reference_value(&base)?;
        for &seed in &e.seeds {
            let mut cfg = base.clone();
            cfg.seed = seed;
            let dir = manifest.output.join(&e.name).join(format!("seed-{seed}"));
            jobs.push((e.name.clone(), seed, cfg, reference, dir));
        }
    }
    let exec = |(name, seed, cfg, reference, dir): &(String, u64, GenColConfig, Option<f64>, PathBuf)| {
        execute(cfg, *reference, Some(dir)).map(|(_, summary)| SuiteRun {
            experiment: name.clone(),
            seed: *seed,
            summary,
        })
    };
    let runs: Vec<SuiteRun> = if manifest.parallel {
        jobs.par_iter().map(exec).collect::<Result<_>>()?
    } else {
        jobs.iter().map(exec).collect::<Result<_>>()?
    };

    let aggregates = manifest
        .experiments
        .iter()
        .map(|e| {
            let mine: Vec<&SuiteRun> = runs.iter().filter(|r| r.experiment == e.name).collect();
            let cfg = &jobs.iter().find(|j| j.0 == e.name).expect("job per experiment").2;
            let sampled: Vec<usize> = mine.iter().map(|r| r.summary.sampled_columns).collect();
            let matched: Option<Vec<bool>> = mine.iter().map(|r| r.summary.matched).collect();
            ExperimentAggregate {
                experiment: e.name.clone(),
                particles: cfg.n_particles,
                gridpoints: cfg.grid.len(),
                total_columns: column_count(cfg.grid.len(), cfg.n_particles)
                    .map_or_else(|| "overflow".into(), |c| c.to_string()),
                accepted_columns: mine.iter().map(|r| r.summary.accepted_columns).collect(),
                sampled_average: sampled.iter().sum::<usize>() as f64 / sampled.len() as f64,
                sampled_columns: sampled,
                all_matched: matched.map(|m| m.iter().all(|&b| b)),
            }
        })
        .collect();

    let summary = SuiteSummary { runs, aggregates };
    std::fs::create_dir_all(&manifest.output)?;
    io::write_json(&manifest.output.join("suite_summary.json"), &summary)?;
    write_suite_csv(&manifest.output.join("suite_summary.csv"), &summary)?;
    Ok(summary)
}

fn write_suite_csv(path: &Path, summary: &SuiteSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "experiment",
        "particles",
        "gridpoints",
        "total_columns",
        "accepted_columns",
        "sampled_columns",
        "sampled_average",
        "all_matched",
    ])?;
    for a in &summary.aggregates {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        w.write_record([
            a.experiment.clone(),
            a.particles.to_string(),
            a.gridpoints.to_string(),
            a.total_columns.clone(),
            join(&a.accepted_columns),
            join(&a.sampled_columns),
            io::fmt_f64(a.sampled_average),
            a.all_matched.map_or_else(String::new, |b| b.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
