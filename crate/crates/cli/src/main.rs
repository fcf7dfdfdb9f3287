//! `sarrt` — depth constants and exact simulation for scaled attachment
//! random recursive trees and random k-dag greedy walks.
//!
//! Exit status: 0 on success, 1 on verification failure or runtime error,
//! 2 on usage errors (clap's default).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sarrt_core::{
    build_kdag, build_depths, reduction_check, table1, AttachmentLaw, DepthConstants,
    ExperimentPlan, GreedyMode, PathEvent, PathEventConfig, RandomStream, RateEvaluator,
    RenderSpec, RotationConfig, Statistic,
};

mod output;
mod verify;

use output::{sink, Format};

/// Fixed default seed: results are reproducible unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Parser)]
#[command(
    name = "sarrt",
    version,
    about = "Scaled attachment random recursive trees: constants, rate functions, simulation",
    after_help = "LAW SPECS:\n  uniform | max:k | min:k | pow:beta | const:theta | atom:p+<base> | table:<path.csv>\n  (the CSV has an `x,density` header and one breakpoint per line)\n\nENVIRONMENT:\n  SARRT_THREADS  default worker count when --threads is not given"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all randomness (fixed default for reproducibility).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads (default: SARRT_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Depth constants 1/mu, alpha_max, alpha_min for a law.
    Constants {
        #[arg(long)]
        law: String,
    },
    /// Greedy k-dag constants for k = 1..5, four decimals.
    Table1,
    /// Evaluate Lambda, Lambda* and Psi at a point.
    Rate {
        #[arg(long)]
        law: String,
        /// Dual argument (z < 0; Psi is reported at c = -1/z).
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        /// Also evaluate Lambda at this lambda.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
    },
    /// Run a convergence experiment over an n grid.
    Simulate(SimulateArgs),
    /// Run the Monte Carlo verification suite; exit 1 on any failure.
    Verify {
        /// Shrink every trial budget 20x for a fast smoke run.
        #[arg(long)]
        quick: bool,
        /// Override the per-check trial budgets.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Greedy min/max-label distances in a random k-dag.
    Dag {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Start node of the walks (default: n).
        #[arg(long)]
        node: Option<u64>,
        /// Also replay the walks against min:k / max:k trees and count
        /// mismatches (exit 1 if any).
        #[arg(long)]
        check_reduction: bool,
    },
    /// Render one tree as a radial SVG.
    Render {
        #[arg(long)]
        law: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 900.0)]
        canvas: f64,
        #[arg(long, default_value_t = 2.5)]
        node_radius: f64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    law: String,
    /// Node counts, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Statistics to record per n.
    #[arg(long, value_delimiter = ',', default_value = "d_last,height,min_depth",
          value_parser = parse_statistic)]
    stats: Vec<Statistic>,
    /// Path-event corridor: which side.
    #[arg(long, value_enum)]
    event: Option<EventKind>,
    #[arg(long, default_value_t = 12)]
    event_steps: u64,
    #[arg(long, default_value_t = 0.6065306597126334)]
    event_beta: f64,
    #[arg(long, default_value_t = 10)]
    rotation_steps: u64,
    #[arg(long, default_value_t = 0.6065306597126334)]
    rotation_beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EventKind {
    /// Labels stay above n*beta^j (start window {2n+1..3n}).
    Large,
    /// Labels stay below 2n*beta^j (start window {n+1..2n}).
    Small,
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    Statistic::parse(s).ok_or_else(|| {
        format!("unknown statistic `{s}` (expected d_last, height, min_depth, renewal, clt, path_event, rotation)")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("SARRT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            b = b.num_threads(t);
        }
        match b.build() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("sarrt: failed to build thread pool: {e}");
                return ExitCode::from(1);
            }
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sarrt: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Constants { law } => {
            let law = AttachmentLaw::parse(law)?;
            let c = DepthConstants::compute(&law)?;
            output::emit_constants(&c, cli.format, sink(&cli.output)?)?;
        }
        Command::Table1 => {
            let rows = table1()?;
            output::emit_table1(&rows, cli.format, sink(&cli.output)?)?;
        }
        Command::Rate { law, z, lambda } => {
            if *z >= 0.0 {
                bail!("--z must be negative (callers pass z = -1/c)");
            }
            let law = AttachmentLaw::parse(law)?;
            let ev = RateEvaluator::new(law);
            let report = output::RateReport::evaluate(&ev, *z, *lambda);
            output::emit_rate(&report, cli.format, sink(&cli.output)?)?;
        }
        Command::Simulate(args) => {
            let plan = build_plan(args, cli.seed)?;
            let report = sarrt_core::run_plan(&plan)?;
            output::emit_plan(&report, cli.format, sink(&cli.output)?)?;
        }
        Command::Verify { quick, trials } => {
            let scale = if *quick { 20 } else { 1 };
            let ok = verify::run_verification(cli.seed, scale, *trials, sink(&cli.output)?)?;
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Dag {
            n,
            k,
            trials,
            node,
            check_reduction,
        } => {
            let start = node.unwrap_or(*n);
            if start > *n {
                bail!("--node must be <= --n");
            }
            let mut rows = Vec::new();
            for trial in 0..*trials {
                let stream = RandomStream::new(cli.seed, trial);
                let dag = build_kdag(&stream, *n, *k)?;
                rows.push((
                    trial,
                    dag.greedy_distance(start, GreedyMode::MinLabel),
                    dag.greedy_distance(start, GreedyMode::MaxLabel),
                ));
            }
            let mismatches = check_reduction
                .then(|| reduction_check(*n, *k, cli.seed, *trials))
                .transpose()?;
            output::emit_dag(*n, *k, start, &rows, mismatches, cli.format, sink(&cli.output)?)?;
            if mismatches.is_some_and(|m| m > 0) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Render {
            law,
            n,
            canvas,
            node_radius,
        } => {
            let Some(path) = &cli.output else {
                bail!("render needs --output <file.svg>");
            };
            let law = AttachmentLaw::parse(law)?;
            let tree = build_depths(&law, &RandomStream::new(cli.seed, 0), *n, true)?;
            let spec = RenderSpec {
                canvas: *canvas,
                node_radius: *node_radius,
                ..RenderSpec::default()
            };
            sarrt_core::render_svg(&tree, &spec, path)
                .with_context(|| format!("rendering {n} nodes"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn build_plan(args: &SimulateArgs, seed: u64) -> anyhow::Result<ExperimentPlan> {
    let law = AttachmentLaw::parse(&args.law)?;
    let path_event = args.event.map(|kind| PathEventConfig {
        event: match kind {
            EventKind::Large => PathEvent::LargeLabels,
            EventKind::Small => PathEvent::SmallLabels,
        },
        steps: args.event_steps,
        beta: args.event_beta,
    });
    let rotation = args
        .stats
        .contains(&Statistic::Rotation)
        .then_some(RotationConfig {
            steps: args.rotation_steps,
            beta: args.rotation_beta,
        });
    let plan = ExperimentPlan {
        law,
        n_grid: args.n.clone(),
        trials: args.trials,
        seed,
        statistics: args.stats.clone(),
        path_event,
        rotation,
    };
    plan.validate()?;
    Ok(plan)
}
