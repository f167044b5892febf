use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fptp_core::collection::{generate_dataset, load_dataset, save_dataset, Collection, Distribution};
use fptp_core::executor::CostModel;
use fptp_core::harness::{
    cache_experiment, run_experiment, DatasetSource, ExperimentConfig, NoiseModel, TimingMode, DEFAULT_DIM,
    DEFAULT_REPS,
};
use fptp_core::optimizer::{CacheMode, Optimizer, RaceKnobs};
use fptp_core::plans::{enumerate_candidates, OptimizerVariant, PlanId};
use fptp_core::query::{Field, RangePredicate};
use fptp_core::scenario::{Scenario, Workbench};
use fptp_core::viz::{write_report, HeatmapScale, Palette, ReportOptions, DEFAULT_R_MAX};

#[derive(Parser)]
#[command(name = "fptp", version, about = "First-past-the-post query optimizer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset CSV.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "uniform-distinct")]
        dist: Distribution,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the selectivity grid, measure every cell and write the report.
    Run(RunArgs),
    /// Race the candidate plans of one query and print their statistics.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV; generated from --n/--dist/--data-seed when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value = "uniform-distinct")]
    dist: Distribution,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn load(&self) -> Result<(Collection, DatasetSource)> {
        match &self.data {
            Some(path) => {
                let coll = load_dataset(path)?;
                let n = coll.len();
                Ok((
                    coll,
                    DatasetSource::File {
                        path: path.display().to_string(),
                        n,
                    },
                ))
            }
            None => {
                let coll = generate_dataset(self.n, self.dist, self.data_seed)?;
                let source = DatasetSource::Generated {
                    n: self.n,
                    distribution: self.dist,
                    seed: self.data_seed,
                };
                Ok((coll, source))
            }
        }
    }
}

#[derive(Args)]
struct KnobArgs {
    #[arg(long, default_value = "vanilla")]
    variant: OptimizerVariant,
    /// Cost model as `c_seq,c_idx,c_fetch`.
    #[arg(long, value_parser = parse_cost, default_value = "1,1,4")]
    cost: CostModel,
    #[arg(long, default_value_t = 10_000)]
    works: u64,
    #[arg(long, default_value_t = 101)]
    max_results: u64,
    #[arg(long, default_value_t = 0.3)]
    coll_fraction: f64,
}

impl KnobArgs {
    fn knobs(&self) -> RaceKnobs {
        RaceKnobs {
            evaluation_works: self.works,
            coll_fraction: self.coll_fraction,
            max_results: self.max_results,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Timing {
    Sim,
    Noisy,
    WallClock,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Scenario,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    knobs: KnobArgs,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
    /// Pre-seed the plan cache with this plan and disable replanning.
    #[arg(long, value_parser = parse_plan)]
    cache_primed: Option<PlanId>,
    #[arg(long, value_enum, default_value = "sim")]
    timing: Timing,
    /// Measurement threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Ratio at which the impact heatmap saturates.
    #[arg(long, default_value_t = DEFAULT_R_MAX)]
    r_max: f64,
    /// Also write SVG versions of the three images.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    scenario: Scenario,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    knobs: KnobArgs,
    #[arg(long = "lowA", allow_negative_numbers = true)]
    low_a: i64,
    #[arg(long = "highA", allow_negative_numbers = true)]
    high_a: i64,
    #[arg(long = "lowB", allow_negative_numbers = true)]
    low_b: i64,
    #[arg(long = "highB", allow_negative_numbers = true)]
    high_b: i64,
    #[arg(long, value_parser = parse_plan)]
    hint: Option<PlanId>,
}

fn parse_cost(s: &str) -> Result<CostModel, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [seq, idx, fetch] = parts[..] else {
        return Err("expected three values c_seq,c_idx,c_fetch".into());
    };
    CostModel::new(seq, idx, fetch).map_err(|e| e.to_string())
}

fn parse_plan(s: &str) -> Result<PlanId, String> {
    fptp_core::plans::parse_plan_hint(s).map_err(|e| e.to_string())
}

fn run(args: RunArgs) -> Result<()> {
    let (collection, source) = args.data.load()?;
    let bench = Workbench::new(collection, args.scenario)?;
    let config = ExperimentConfig {
        variant: args.knobs.variant,
        dim: args.dim,
        seed: args.seed,
        reps: args.reps,
        cost: args.knobs.cost,
        knobs: args.knobs.knobs(),
        timing: match args.timing {
            Timing::Sim => TimingMode::Sim,
            Timing::Noisy => TimingMode::Noisy(NoiseModel::default()),
            Timing::WallClock => TimingMode::WallClock,
        },
        cache_primed: None,
        cache_mode: CacheMode::Off,
        jobs: args.jobs,
    };
    let (grid, metrics) = match args.cache_primed {
        Some(plan) => cache_experiment(&bench, plan, &config, source)?,
        None => run_experiment(&bench, &config, source)?,
    };
    let options = ReportOptions {
        scale: HeatmapScale {
            r_max: args.r_max,
            ..Default::default()
        },
        svg: args.svg,
    };
    let paths = write_report(&grid, metrics, &args.out, &Palette::default(), options)?;
    for plan in PlanId::ALL {
        let chosen = grid.iter().filter(|c| c.chosen == plan).count();
        let optimal = grid.iter().filter(|c| c.optimal == Some(plan)).count();
        if chosen + optimal > 0 {
            println!("{plan:<10} chosen {chosen:>5} optimal {optimal:>5}");
        }
    }
    println!("report: {}", display_dir(&args.out, &paths.summary));
    println!("accuracy={:.4} impact={:.4}", metrics.accuracy, metrics.impact_pct);
    Ok(())
}

fn display_dir(dir: &Path, summary: &Path) -> String {
    format!(
        "{} ({})",
        dir.display(),
        summary.file_name().unwrap_or_default().to_string_lossy()
    )
}

fn explain(args: ExplainArgs) -> Result<()> {
    let (collection, _) = args.data.load()?;
    let bench = Workbench::new(collection, args.scenario)?;
    let a = RangePredicate::new(Field::A, args.low_a, args.high_a)?;
    let b = RangePredicate::new(Field::B, args.low_b, args.high_b)?;
    let mut query = args.scenario.make_query(a, b)?;
    if let Some(hint) = args.hint {
        query = query.with_hint(hint);
    }
    let variant = args.knobs.variant;
    let optimizer = Optimizer::new(&bench.collection, &bench.catalog, variant)
        .with_knobs(args.knobs.knobs())
        .with_cost(args.knobs.cost);
    let decision = optimizer.optimize(&query, None, CacheMode::Off)?;
    let plans = enumerate_candidates(&query, &bench.catalog, variant, optimizer.collscan_allowed)?;

    println!("query: {query}");
    println!("shape: {}", query.shape());
    println!(
        "selectivity: A {:.6} B {:.6} (N={})",
        bench.selectivity(&a),
        bench.selectivity(&b),
        bench.n()
    );
    println!(
        "variant: {variant}  rounds: {}  candidates: {}",
        decision.rounds,
        decision.trials.len()
    );
    for (trial, plan) in decision.trials.iter().zip(&plans) {
        let (s, sc) = (&trial.stats, &trial.score);
        println!();
        println!("{}  [{}]", s.plan, plan.describe());
        println!("  works {}  results {}  eof {}", s.works, s.results, s.reached_eof);
        println!(
            "  has_fetch {}  has_blocking_sort {}  has_ixisect {}",
            s.has_fetch, s.has_blocking_sort, s.has_ixisect
        );
        println!(
            "  score {:.6} = base {} + productivity {:.6} + noFetch {:.6} + noSort {:.6} + noIxisect {:.6} + eof {}",
            sc.total, sc.base, sc.productivity, sc.no_fetch_bonus, sc.no_sort_bonus, sc.no_ixisect_bonus, sc.eof_bonus
        );
    }
    println!();
    println!("winner: {}", decision.chosen);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { n, dist, seed, out } => gen(n, dist, seed, &out),
        Command::Run(args) => run(args),
        Command::Explain(args) => explain(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn gen(n: usize, dist: Distribution, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let coll = generate_dataset(n, dist, seed)?;
    save_dataset(&coll, out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {n} records to {}", out.display());
    Ok(())
}
