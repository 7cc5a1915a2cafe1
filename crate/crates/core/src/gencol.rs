//! Genetic column generation.
//!
//! The pool of candidate configurations is grown one column at a time: solve
//! the restricted problem, mutate randomly chosen active configurations until a
//! child prices out with positive gain `λᵀy − c_λ` against the current dual,
//! insert it, and when the pool has reached `βℓ` columns drop the `ℓ` oldest
//! inactive ones.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{build_cost_matrix, column_cost_unchecked, CostMatrix, PairPotential};
use crate::error::{Error, Result};
use crate::rmp::{
    dual_value, solve_rmp_with, Certificate, LpOptions, RestrictedProblem, RmpSolution, DEFAULT_ACTIVITY_TOL,
    DEFAULT_LP_TOL,
};
use crate::state_space::{column_count, mutate, random_column, Column, Grid, Marginal};

/// The random number generator behind every run: ChaCha with 8 rounds, seeded
/// from a single `u64` through `SeedableRng::seed_from_u64`.
pub type RunRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RunRng {
    RunRng::seed_from_u64(seed)
}

/// How a child is derived from its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationStrategy {
    /// Move one random particle to a random neighbouring site.
    #[default]
    Stochastic,
    /// Move one random particle to whichever neighbouring site gives the highest gain.
    BestNeighbor,
}

/// What to do when an outer iteration uses up its sampling budget without a positive-gain child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionPolicy {
    /// Stop the run.
    #[default]
    Terminate,
    /// Insert the last sampled child anyway (unless it duplicates a pool column) and continue.
    InsertLast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenColConfig {
    pub n_particles: u32,
    pub grid: Grid,
    pub marginal: Marginal,
    pub potential: PairPotential,
    /// Pool capacity factor; the pool is pruned once it holds `beta * ℓ` columns.
    pub beta: usize,
    pub max_iter: usize,
    /// Sampling budget per outer iteration.
    pub max_samples: usize,
    pub seed: u64,
    pub init_random_columns: usize,
    pub activity_tol: f64,
    pub lp_tol: f64,
    /// Children are accepted when their gain exceeds this.
    pub gain_tol: f64,
    pub mutation: MutationStrategy,
    pub on_exhaustion: ExhaustionPolicy,
    /// Stop as soon as the restricted optimum is within `reference_tol` of this value.
    pub reference: Option<f64>,
    pub reference_tol: f64,
}

impl GenColConfig {
    /// Defaults: `β = 5`, `(β−1)ℓ` random initial columns, `200ℓ` outer
    /// iterations, 1000 samples per iteration, seed 0.
    pub fn new(n_particles: u32, grid: Grid, marginal: Marginal, potential: PairPotential) -> Self {
        let len = grid.len();
        let beta = 5;
        Self {
            n_particles,
            grid,
            marginal,
            potential,
            beta,
            max_iter: 200 * len,
            max_samples: 1000,
            seed: 0,
            init_random_columns: (beta - 1) * len,
            activity_tol: DEFAULT_ACTIVITY_TOL,
            lp_tol: DEFAULT_LP_TOL,
            gain_tol: 1e-12,
            mutation: MutationStrategy::Stochastic,
            on_exhaustion: ExhaustionPolicy::Terminate,
            reference: None,
            reference_tol: 1e-9,
        }
    }

    /// Uniform 1D chain with unit spacing and regularized Coulomb interaction.
    pub fn coulomb_1d(n_particles: u32, len: usize, epsilon: f64, marginal: Marginal) -> Result<Self> {
        Ok(Self::new(n_particles, Grid::uniform_1d(len, 1.0)?, marginal, PairPotential::coulomb(epsilon)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::TooFewParticles(self.n_particles));
        }
        if self.beta < 2 {
            return Err(Error::InvalidConfig(format!("beta must be at least 2, got {}", self.beta)));
        }
        if self.max_iter == 0 || self.max_samples == 0 {
            return Err(Error::InvalidConfig("maxiter and maxsamples must be positive".into()));
        }
        if self.marginal.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: self.marginal.len() });
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.beta * self.grid.len()
    }
}

/// The growing set of candidate columns with their insertion order.
#[derive(Debug, Clone)]
pub struct Pool {
    problem: RestrictedProblem,
    ages: Vec<u64>,
    next_age: u64,
    members: HashSet<Column>,
}

impl Pool {
    pub fn new(marginal: Marginal) -> Self {
        Self {
            problem: RestrictedProblem::new(Vec::new(), Vec::new(), marginal).expect("empty problem"),
            ages: Vec::new(),
            next_age: 0,
            members: HashSet::new(),
        }
    }

    pub fn problem(&self) -> &RestrictedProblem {
        &self.problem
    }

    pub fn len(&self) -> usize {
        self.problem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problem.is_empty()
    }

    /// Insertion counter of each column, in pool order.
    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn contains(&self, col: &Column) -> bool {
        self.members.contains(col)
    }

    /// Adds a column unless an identical one is already present.
    pub fn insert(&mut self, column: Column, cost: f64) -> Result<bool> {
        if self.members.contains(&column) {
            return Ok(false);
        }
        self.problem.push(column.clone(), cost)?;
        self.members.insert(column);
        self.ages.push(self.next_age);
        self.next_age += 1;
        Ok(true)
    }

    fn retain(&mut self, keep: &[bool]) {
        for (k, col) in self.problem.columns().iter().enumerate() {
            if !keep[k] {
                self.members.remove(col);
            }
        }
        self.problem.retain_indices(|k| keep[k]);
        let mut it = keep.iter();
        self.ages.retain(|_| *it.next().unwrap());
    }
}

/// Builds the initial pool: one stacked configuration per site, then up to
/// `init_random_columns` distinct uniformly random configurations.
pub fn initialize_pool<R: Rng + ?Sized>(config: &GenColConfig, costs: &CostMatrix, rng: &mut R) -> Result<Pool> {
    let len = config.grid.len();
    let n = config.n_particles;
    let mut pool = Pool::new(config.marginal.clone());
    for site in 0..len {
        let col = Column::stacked(len, site, n);
        let c = column_cost_unchecked(&col, costs);
        pool.insert(col, c)?;
    }
    let available = column_count(len, n).map_or(usize::MAX, |c| usize::try_from(c).unwrap_or(usize::MAX));
    let target = config.init_random_columns.min(available.saturating_sub(len));
    let mut attempts = 0usize;
    let max_attempts = 20 * target + 100;
    let mut added = 0;
    while added < target && attempts < max_attempts {
        attempts += 1;
        let col = random_column(len, n, rng);
        let c = column_cost_unchecked(&col, costs);
        if pool.insert(col, c)? {
            added += 1;
        }
    }
    Ok(pool)
}

/// `λᵀy − c_λ` with `λ = occupancy / N`.
pub fn gain(candidate: &Column, y: &[f64], cost: f64) -> f64 {
    dual_value(candidate, y) - cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub column: Column,
    pub cost: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// First child with gain above the threshold that is not already in the pool.
    pub accepted: Option<Candidate>,
    /// Most recently evaluated child that is not already in the pool.
    pub last: Option<Candidate>,
    pub samples: usize,
}

/// Everything the sampler needs besides the pool itself.
pub struct SamplerContext<'a> {
    pub grid: &'a Grid,
    pub costs: &'a CostMatrix,
    pub activity_tol: f64,
    pub gain_tol: f64,
    pub mutation: MutationStrategy,
}

/// Mutates uniformly chosen active parents until a child with positive gain
/// appears or `max_samples` children have been evaluated. Duplicates of pool
/// columns count as samples and are never accepted.
pub fn sample_candidate<R: Rng + ?Sized>(
    pool: &Pool,
    solution: &RmpSolution,
    ctx: &SamplerContext<'_>,
    rng: &mut R,
    max_samples: usize,
) -> SampleOutcome {
    let active = solution.active_indices(ctx.activity_tol);
    let mut out = SampleOutcome { accepted: None, last: None, samples: 0 };
    if active.is_empty() {
        return out;
    }
    let y = &solution.dual;
    let columns = pool.problem().columns();
    while out.samples < max_samples {
        let parent = &columns[active[rng.random_range(0..active.len())]];
        let children: Vec<Column> = match ctx.mutation {
            MutationStrategy::Stochastic => vec![mutate(parent, ctx.grid, rng)],
            MutationStrategy::BestNeighbor => {
                let from = parent.particle_sites()[rng.random_range(0..parent.n_particles() as usize)];
                ctx.grid.neighbors(from).iter().map(|&to| parent.moved(from, to)).collect()
            }
        };
        let mut best: Option<Candidate> = None;
        for child in children {
            if out.samples >= max_samples {
                break;
            }
            out.samples += 1;
            let cost = column_cost_unchecked(&child, ctx.costs);
            let g = gain(&child, y, cost);
            if best.as_ref().is_none_or(|b| g > b.gain) {
                best = Some(Candidate { column: child, cost, gain: g });
            }
        }
        let Some(best) = best else { break };
        if pool.contains(&best.column) {
            continue;
        }
        if best.gain > ctx.gain_tol {
            out.accepted = Some(best.clone());
            out.last = Some(best);
            return out;
        }
        out.last = Some(best);
    }
    out
}

/// Once the pool holds at least `capacity` columns, removes the `remove_max`
/// oldest inactive ones. Columns beyond the end of `solution.alpha` (inserted
/// after the solve) are never removed. Returns the number removed.
pub fn prune(pool: &mut Pool, solution: &RmpSolution, capacity: usize, remove_max: usize, activity_tol: f64) -> usize {
    if pool.len() < capacity {
        return 0;
    }
    let mut inactive: Vec<usize> =
        (0..solution.alpha.len().min(pool.len())).filter(|&k| solution.alpha[k] <= activity_tol).collect();
    inactive.sort_by_key(|&k| pool.ages[k]);
    inactive.truncate(remove_max);
    if inactive.is_empty() {
        return 0;
    }
    let mut keep = vec![true; pool.len()];
    for &k in &inactive {
        keep[k] = false;
    }
    pool.retain(&keep);
    inactive.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxiterReached,
    SamplingBudgetExhausted,
    ConvergedToReference,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MaxiterReached => "maxiter_reached",
            Self::SamplingBudgetExhausted => "sampling_budget_exhausted",
            Self::ConvergedToReference => "converged_to_reference",
        }
    }
}

/// One restricted-problem solve and the sampling that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Optimal value of the restricted problem.
    pub value: f64,
    /// Gain of the inserted column, if one was inserted.
    pub gain: Option<f64>,
    pub samples: usize,
    /// Pool size at the time of the solve.
    pub pool_size: usize,
    pub active: usize,
    pub lp_iterations: usize,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub accepted_columns: usize,
    pub sampled_columns: usize,
    pub termination: Termination,
    /// Largest pool size seen right after an insertion.
    pub max_pool_after_insert: usize,
    /// Largest pool size seen after pruning.
    pub max_pool_after_prune: usize,
    pub initial_pool_size: usize,
}

impl RunTrace {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.value)
    }

    /// Largest increase between consecutive restricted optima (≤ 0 when monotone).
    pub fn max_increase(&self) -> f64 {
        self.records.windows(2).map(|w| w[1].value - w[0].value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Componentwise worst certificate over every solve.
    pub fn worst_certificate(&self) -> Certificate {
        self.records.iter().fold(Certificate::default(), |acc, r| acc.merge(&r.certificate))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenColResult {
    /// Configurations with positive weight in the final restricted optimum, in pool order.
    pub plan: Vec<(Column, f64)>,
    /// Final dual potential, one value per site.
    pub dual: Vec<f64>,
    pub cost: f64,
    pub certificate: Certificate,
    pub trace: RunTrace,
}

impl GenColResult {
    pub fn active_count(&self, activity_tol: f64) -> usize {
        self.plan.iter().filter(|(_, w)| *w > activity_tol).count()
    }
}

pub fn run(config: &GenColConfig) -> Result<GenColResult> {
    run_with_observer(config, |_| {})
}

/// Runs GenCol, calling `observe` after each record is complete.
pub fn run_with_observer(config: &GenColConfig, mut observe: impl FnMut(&IterationRecord)) -> Result<GenColResult> {
    config.validate()?;
    let costs = build_cost_matrix(&config.grid, &config.potential)?;
    let mut rng = seeded_rng(config.seed);
    let mut pool = initialize_pool(config, &costs, &mut rng)?;
    let len = config.grid.len();
    let capacity = config.capacity();
    let lp = LpOptions::with_tol(config.lp_tol);
    let ctx = SamplerContext {
        grid: &config.grid,
        costs: &costs,
        activity_tol: config.activity_tol,
        gain_tol: config.gain_tol,
        mutation: config.mutation,
    };

    let mut trace = RunTrace {
        records: Vec::new(),
        accepted_columns: 0,
        sampled_columns: 0,
        termination: Termination::MaxiterReached,
        max_pool_after_insert: 0,
        max_pool_after_prune: 0,
        initial_pool_size: pool.len(),
    };

    let mut iteration = 0usize;
    loop {
        let solution = solve_rmp_with(pool.problem(), &lp)?;
        let certificate = solution.certificate(pool.problem());
        let mut record = IterationRecord {
            iteration,
            value: solution.value,
            gain: None,
            samples: 0,
            pool_size: pool.len(),
            active: solution.active_indices(config.activity_tol).len(),
            lp_iterations: solution.iterations,
            certificate,
        };

        let stop = if config.reference.is_some_and(|r| (solution.value - r).abs() <= config.reference_tol) {
            Some(Termination::ConvergedToReference)
        } else if iteration >= config.max_iter {
            Some(Termination::MaxiterReached)
        } else {
            let outcome = sample_candidate(&pool, &solution, &ctx, &mut rng, config.max_samples);
            record.samples = outcome.samples;
            trace.sampled_columns += outcome.samples;
            let chosen = match (outcome.accepted, config.on_exhaustion) {
                (Some(c), _) => Some(c),
                (None, ExhaustionPolicy::InsertLast) => outcome.last,
                (None, ExhaustionPolicy::Terminate) => None,
            };
            match chosen {
                Some(c) => {
                    record.gain = Some(c.gain);
                    pool.insert(c.column, c.cost)?;
                    trace.accepted_columns += 1;
                    trace.max_pool_after_insert = trace.max_pool_after_insert.max(pool.len());
                    prune(&mut pool, &solution, capacity, len, config.activity_tol);
                    trace.max_pool_after_prune = trace.max_pool_after_prune.max(pool.len());
                    None
                }
                None => Some(Termination::SamplingBudgetExhausted),
            }
        };

        observe(&record);
        trace.records.push(record);

        if let Some(t) = stop {
            trace.termination = t;
            let plan = solution
                .alpha
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0.0)
                .map(|(k, &a)| (pool.problem().columns()[k].clone(), a))
                .collect();
            return Ok(GenColResult { plan, dual: solution.dual, cost: solution.value, certificate, trace });
        }
        iteration += 1;
    }
}
