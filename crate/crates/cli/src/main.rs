//! Command-line front end for GenCol.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gencol_core::cost::build_cost_matrix;
use gencol_core::experiment::{execute, run_suite, ExperimentManifest, RunSpec};
use gencol_core::io::{fmt_f64, write_columns};
use gencol_core::oracles::{
    cdp_bruteforce, clique_to_pdp, e_matrix_extremum_check, homogeneous_monge_solution, pdp_bruteforce, plan_cost,
    solve_full_lp, Graph, DEFAULT_FULL_LP_CAP,
};
use gencol_core::state_space::{column_count, enumerate_columns};
use gencol_core::RestrictedProblem;

#[derive(Parser)]
#[command(name = "gencol", version, about = "Genetic column generation for multi-marginal optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run GenCol on one instance.
    Solve(Box<SolveArgs>),
    /// Run every experiment in a manifest.
    Suite {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Exact reference computations.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Build the pricing instance for a clique question and decide both by brute force.
    Reduce {
        /// Edge list, one `u v` pair per line, 1-based.
        #[arg(long)]
        graph: PathBuf,
        /// Clique size.
        #[arg(long)]
        k: usize,
        /// Vertex count, if isolated vertices are not listed.
        #[arg(long)]
        vertices: Option<usize>,
        /// Where to write the pricing instance.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    particles: Option<u32>,
    #[arg(long)]
    gridpoints: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// uniform, sine, or file:PATH.
    #[arg(long)]
    marginal: Option<String>,
    #[arg(long)]
    neighbors: Option<PathBuf>,
    #[arg(long)]
    cost_matrix: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    maxiter: Option<usize>,
    #[arg(long)]
    maxsamples: Option<usize>,
    /// betaminus1, ntimesl, or a count.
    #[arg(long)]
    init_random: Option<String>,
    /// stochastic or best_neighbor.
    #[arg(long)]
    mutation: Option<String>,
    /// terminate or insert_last.
    #[arg(long)]
    on_exhaustion: Option<String>,
    /// none, full-lp, or monge.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    reference_tol: Option<f64>,
    #[arg(long)]
    full_lp_cap: Option<u64>,
    #[arg(long)]
    lp_tol: Option<f64>,
    #[arg(long)]
    activity_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolveArgs {
    fn spec(&self) -> RunSpec {
        RunSpec {
            particles: self.particles,
            gridpoints: self.gridpoints,
            spacing: self.spacing,
            beta: self.beta,
            epsilon: self.epsilon,
            marginal: self.marginal.clone(),
            neighbors: self.neighbors.clone(),
            cost_matrix: self.cost_matrix.clone(),
            seed: self.seed,
            maxiter: self.maxiter,
            maxsamples: self.maxsamples,
            init_random: self.init_random.clone(),
            mutation: self.mutation.clone(),
            on_exhaustion: self.on_exhaustion.clone(),
            reference: self.reference.clone(),
            reference_tol: self.reference_tol,
            full_lp_cap: self.full_lp_cap,
            lp_tol: self.lp_tol,
            activity_tol: self.activity_tol,
        }
    }
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Solve the master problem over every configuration.
    FullLp {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = DEFAULT_FULL_LP_CAP as u64)]
        cap: u64,
        /// Write the optimal plan as columns.csv here.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Write the full problem in LP format here.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Cost of the uniformly spaced solution for a uniform marginal.
    Monge {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Number of N-particle configurations on ℓ sites.
    Count {
        #[arg(long)]
        particles: u32,
        #[arg(long)]
        gridpoints: usize,
    },
    /// Maximize λᵀEλ over q-particle configurations on q sites.
    Lemma {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=7))]
        q: u32,
    },
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    particles: Option<u32>,
    #[arg(long)]
    gridpoints: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    marginal: Option<String>,
    #[arg(long)]
    cost_matrix: Option<PathBuf>,
}

impl InstanceArgs {
    fn spec(&self) -> Result<RunSpec> {
        let flags = RunSpec {
            particles: self.particles,
            gridpoints: self.gridpoints,
            spacing: self.spacing,
            epsilon: self.epsilon,
            marginal: self.marginal.clone(),
            cost_matrix: self.cost_matrix.clone(),
            ..RunSpec::default()
        };
        Ok(load_config(self.config.as_ref())?.overlay(&flags))
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunSpec> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunSpec::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(RunSpec::default()),
    }
}

fn solve(args: &SolveArgs) -> Result<()> {
    let spec = load_config(args.config.as_ref())?.overlay(&args.spec());
    let cfg = spec.to_config()?;
    let reference = spec.reference_value(&cfg)?;
    let (_, summary) = execute(&cfg, reference, args.out.as_deref())?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn oracle(which: &OracleCommand) -> Result<()> {
    match which {
        OracleCommand::FullLp { instance, cap, plan, dump_lp } => {
            let cfg = instance.spec()?.to_config()?;
            let costs = build_cost_matrix(&cfg.grid, &cfg.potential)?;
            if let Some(path) = dump_lp {
                let columns = enumerate_columns(cfg.grid.len(), cfg.n_particles, u128::from(*cap))?;
                let problem = RestrictedProblem::with_cost_matrix(columns, &costs, cfg.marginal.clone())?;
                let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                problem.write_lp(std::io::BufWriter::new(file))?;
            }
            let sol = solve_full_lp(cfg.n_particles, &costs, &cfg.marginal, u128::from(*cap))?;
            if let Some(path) = plan {
                write_columns(path, &sol.plan())?;
            }
            println!("{}", fmt_f64(sol.value));
        }
        OracleCommand::Monge { instance, plan } => {
            let cfg = instance.spec()?.to_config()?;
            if !cfg.marginal.is_uniform() {
                bail!("the uniformly spaced solution needs a uniform marginal");
            }
            let costs = build_cost_matrix(&cfg.grid, &cfg.potential)?;
            let monge = homogeneous_monge_solution(cfg.grid.len(), cfg.n_particles)?;
            if let Some(path) = plan {
                write_columns(path, &monge)?;
            }
            println!("{}", fmt_f64(plan_cost(&monge, &costs)));
        }
        OracleCommand::Count { particles, gridpoints } => match column_count(*gridpoints, *particles) {
            Some(c) => println!("{c}"),
            None => bail!("count overflows 128 bits"),
        },
        OracleCommand::Lemma { q } => {
            let (max, argmax) = e_matrix_extremum_check(*q)?;
            println!("max {max} expected {}", q * (q - 1));
            for a in argmax {
                println!("{}", a.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
            }
        }
    }
    Ok(())
}

fn reduce(graph: &PathBuf, k: usize, vertices: Option<usize>, out: Option<&PathBuf>) -> Result<()> {
    let text = fs::read_to_string(graph).with_context(|| format!("reading {}", graph.display()))?;
    let g = Graph::parse_edge_list(&text, vertices)?;
    let inst = clique_to_pdp(&g, k)?;
    if let Some(path) = out {
        fs::write(path, inst.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("clique {}", cdp_bruteforce(&g, k)?);
    println!("pricing {}", pdp_bruteforce(&inst, DEFAULT_FULL_LP_CAP)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Suite { manifest } => {
            let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let manifest = ExperimentManifest::from_toml(&text)?;
            let summary = run_suite(&manifest)?;
            for a in &summary.aggregates {
                println!(
                    "{}: N={} l={} sampled average {} matched {}",
                    a.experiment,
                    a.particles,
                    a.gridpoints,
                    a.sampled_average,
                    a.all_matched.map_or_else(|| "n/a".to_string(), |b| b.to_string())
                );
            }
            Ok(())
        }
        Command::Oracle { which } => oracle(which),
        Command::Reduce { graph, k, vertices, out } => reduce(graph, *k, *vertices, out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
