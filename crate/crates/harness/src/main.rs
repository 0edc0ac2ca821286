use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qrinit::data::PixelScaling;
use qrinit::initializers::{self, InitializerSpec, TensorShape};
use qrinit::nn::OptimizerConfig;
use qrinit::samplers::{self, DistributionSpec, RandomSource};
use qrinit::seed_select::SeedSearchConfig;
use qrinit::sobol::DirectionNumberTable;
use qrinit::stats::threshold_grid;
use qrinit_harness::compare::{compare, save_comparison, ComparisonRecord};
use qrinit_harness::grid::{run_and_store, run_grid, GridSpec};
use qrinit_harness::plot::write_plot_data;
use qrinit_harness::store::{load_trace, read_json, write_json};
use qrinit_harness::{Arm, Context, ExperimentPlan, HarnessError, ModelVariant, PreparedData, SearchScope, SeedPolicy};

#[derive(Parser)]
#[command(name = "qrinit", version, about = "Quasirandom weight initialization experiments")]
struct Cli {
    /// Joe-Kuo style direction-number file; the bundled table is used when absent.
    #[arg(long, global = true, env = "QRINIT_DIRECTION_FILE")]
    direction_file: Option<PathBuf>,
    /// Directory holding the MNIST IDX files.
    #[arg(long, global = true, env = "QRINIT_DATA_DIR", default_value = "data/mnist")]
    data_dir: PathBuf,
    #[arg(long, global = true, env = "QRINIT_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "QRINIT_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, env = "QRINIT_MASTER_SEED", default_value_t = 0)]
    master_seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print raw draws, one per line.
    Sample(SampleArgs),
    /// Print an initialized weight tensor as CSV, one row per line.
    Init(InitArgs),
    /// Run the quasirandom seed search for one repetition of a plan.
    SeedSearch(SeedSearchArgs),
    /// Run one plan and store its trace and manifest.
    Train(TrainArgs),
    /// Compare a stored qrng trace with a stored prng trace.
    Compare(CompareArgs),
    /// Run and compare every qrng/prng pair of a facet grid.
    Grid(GridArgs),
    /// Write plotting grids and the accuracy-gap histogram.
    PlotData(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceKind {
    Qrng,
    Prng,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistKind {
    Uniform,
    Normal,
    TruncatedNormal,
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long, value_enum)]
    source: SourceKind,
    /// Sobol' dimension for the qrng source.
    #[arg(long, default_value_t = 1)]
    dimension: usize,
    /// MT19937 seed for the prng source.
    #[arg(long, default_value_t = 0)]
    seed: u32,
}

impl SourceArgs {
    fn open(&self, cli: &Cli) -> Result<RandomSource, HarnessError> {
        Ok(match self.source {
            SourceKind::Qrng => RandomSource::quasi(load_table(cli)?, self.dimension)?,
            SourceKind::Prng => RandomSource::pseudo(self.seed),
        })
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "uniform")]
    dist: DistKind,
    /// Comma-separated `a,b` for uniform or `mu,sigma` for the normals.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    #[arg(long)]
    count: usize,
}

#[derive(Args)]
struct InitArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    initializer: String,
    /// Comma-separated tensor dimensions, e.g. `784,32`.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    /// Overrides: `a,b` for random_uniform, `mu,sigma` for random_normal and
    /// truncated_normal, `gain` for orthogonal.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
}

#[derive(Args, Clone)]
struct PlanArgs {
    /// JSON plan file; when given the other plan flags are ignored.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// `mlp-32-32` or `single-<units>`.
    #[arg(long, default_value = "mlp-32-32")]
    model: String,
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Learning rate; the optimizer default when absent.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value = "glorot_uniform")]
    initializer: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init_params: Vec<f64>,
    #[arg(long, value_enum, default_value = "prng")]
    arm: SourceKind,
    /// Fixed Sobol' starting dimension for the qrng arm.
    #[arg(long)]
    nu: Option<usize>,
    /// `W,Z,X,Y,R`: seed range, candidates, trial epochs, repeats.
    #[arg(long, value_delimiter = ',')]
    seed_search: Vec<usize>,
    /// Run one seed search for the whole plan instead of one per repetition.
    #[arg(long)]
    search_per_plan: bool,
    /// Continue training from the winning trial instead of a fresh model.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_enum, default_value = "raw")]
    pixels: Pixels,
    /// Serve Sobol' draws from a precomputed table.
    #[arg(long)]
    sobol_cache: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pixels {
    Raw,
    Unit,
}

impl From<Pixels> for PixelScaling {
    fn from(p: Pixels) -> Self {
        match p {
            Pixels::Raw => PixelScaling::Raw,
            Pixels::Unit => PixelScaling::UnitInterval,
        }
    }
}

#[derive(Args)]
struct SeedSearchArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Repetition whose search seed is used.
    #[arg(long, default_value_t = 0)]
    repetition: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Output directory of the qrng plan.
    #[arg(long)]
    qrng: PathBuf,
    /// Output directory of the prng plan.
    #[arg(long)]
    prng: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// JSON grid spec; when given the other grid flags are ignored.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "mlp-32-32")]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "sgd,adam")]
    optimizers: Vec<String>,
    /// Initializer names; all ten when absent.
    #[arg(long, value_delimiter = ',')]
    initializers: Vec<String>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seed_search: Vec<usize>,
    #[arg(long)]
    search_per_plan: bool,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_enum, default_value = "raw")]
    pixels: Pixels,
    #[arg(long)]
    sobol_cache: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// grid.json or comparison.json files, or directories searched for them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Destination directory; `<out-dir>/plot` when absent.
    #[arg(long)]
    dest: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::InvalidPlan(msg.into())
}

fn load_table(cli: &Cli) -> Result<Arc<DirectionNumberTable>, HarnessError> {
    Ok(Arc::new(match &cli.direction_file {
        Some(path) => DirectionNumberTable::from_path(path)?,
        None => DirectionNumberTable::bundled(),
    }))
}

fn distribution(kind: DistKind, params: &[f64]) -> Result<DistributionSpec, HarnessError> {
    let pair = |default: (f64, f64)| match params {
        [] => Ok(default),
        [x, y] => Ok((*x, *y)),
        _ => Err(invalid("--params takes exactly two values")),
    };
    let spec = match kind {
        DistKind::Uniform => {
            let (a, b) = pair((0.0, 1.0))?;
            DistributionSpec::Uniform { a, b }
        }
        DistKind::Normal => {
            let (mu, sigma) = pair((0.0, 1.0))?;
            DistributionSpec::Normal { mu, sigma }
        }
        DistKind::TruncatedNormal => {
            let (mu, sigma) = pair((0.0, 1.0))?;
            DistributionSpec::TruncatedNormal { mu, sigma }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn initializer(name: &str, params: &[f64]) -> Result<InitializerSpec, HarnessError> {
    let spec: InitializerSpec = name.parse()?;
    Ok(match (spec, params) {
        (spec, []) => spec,
        (InitializerSpec::Orthogonal { .. }, [gain]) => InitializerSpec::Orthogonal { gain: *gain },
        (InitializerSpec::RandomUniform { .. }, [a, b]) => InitializerSpec::RandomUniform { a: *a, b: *b },
        (InitializerSpec::RandomNormal { .. }, [mu, sigma]) => InitializerSpec::RandomNormal { mu: *mu, sigma: *sigma },
        (InitializerSpec::TruncatedNormal { .. }, [mu, sigma]) => {
            InitializerSpec::TruncatedNormal { mu: *mu, sigma: *sigma }
        }
        (spec, _) => return Err(invalid(format!("unexpected parameters for {spec}"))),
    })
}

fn optimizer(name: &str, lr: Option<f64>) -> Result<OptimizerConfig, HarnessError> {
    let base = match name {
        "sgd" => OptimizerConfig::sgd(),
        "adam" => OptimizerConfig::adam(),
        other => return Err(invalid(format!("unknown optimizer `{other}`; use sgd or adam"))),
    };
    Ok(lr.map_or(base, |lr| base.with_lr(lr)))
}

fn search_config(values: &[usize], warm_start: bool) -> Result<SeedSearchConfig, HarnessError> {
    let mut cfg = SeedSearchConfig {
        warm_start,
        ..SeedSearchConfig::default()
    };
    match values {
        [] => {}
        [w, z, x, y, r] => {
            cfg.min_seed = *w;
            cfg.max_seed = *z;
            cfg.candidates = *x;
            cfg.trial_epochs = *y;
            cfg.repeats = *r;
        }
        _ => return Err(invalid("--seed-search takes W,Z,X,Y,R")),
    }
    Ok(cfg)
}

fn qrng_policy(nu: Option<usize>, search: &[usize], per_plan: bool, warm: bool) -> Result<SeedPolicy, HarnessError> {
    match nu {
        Some(nu) if search.is_empty() => Ok(SeedPolicy::Fixed { nu }),
        Some(_) => Err(invalid("--nu and --seed-search are mutually exclusive")),
        None => Ok(SeedPolicy::Auto {
            search: search_config(search, warm)?,
            scope: if per_plan {
                SearchScope::PerPlan
            } else {
                SearchScope::PerRepetition
            },
        }),
    }
}

fn build_plan(cli: &Cli, a: &PlanArgs) -> Result<ExperimentPlan, HarnessError> {
    if let Some(path) = &a.plan {
        let plan: ExperimentPlan = read_json(path)?;
        plan.validate()?;
        return Ok(plan);
    }
    let arm = match a.arm {
        SourceKind::Prng => Arm::Prng,
        SourceKind::Qrng => Arm::Qrng {
            seed: qrng_policy(a.nu, &a.seed_search, a.search_per_plan, a.warm_start)?,
        },
    };
    let mut plan = ExperimentPlan::new(
        a.model.parse::<ModelVariant>()?,
        optimizer(&a.optimizer, a.lr)?,
        initializer(&a.initializer, &a.init_params)?,
        arm,
    );
    plan.repetitions = a.repetitions;
    plan.epochs = a.epochs;
    plan.batch_size = a.batch_size;
    plan.master_seed = cli.master_seed;
    plan.pixel_scaling = a.pixels.into();
    plan.sobol_cache = a.sobol_cache;
    plan.validate()?;
    Ok(plan)
}

fn context(cli: &Cli, scaling: PixelScaling) -> Result<Context, HarnessError> {
    Ok(Context {
        table: load_table(cli)?,
        data: Arc::new(PreparedData::load(&cli.data_dir, scaling)?),
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn collect_comparisons(path: &Path, out: &mut Vec<ComparisonRecord>) -> Result<(), HarnessError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(HarnessError::io(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for entry in entries {
            let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if entry.is_dir() || name == "comparison.json" || name == "grid.json" {
                collect_comparisons(&entry, out)?;
            }
        }
        return Ok(());
    }
    match path.file_name().and_then(|n| n.to_str()) {
        Some("grid.json") => out.extend(read_json::<qrinit_harness::grid::GridReport>(path)?.comparisons),
        _ => out.push(read_json(path)?),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Sample(a) => {
            let dist = distribution(a.dist, &a.params)?;
            let mut src = a.source.open(cli)?;
            for v in samplers::sample(&mut src, &dist, a.count)? {
                println!("{v}");
            }
        }
        Command::Init(a) => {
            let spec = initializer(&a.initializer, &a.params)?;
            let shape = TensorShape::new(a.shape.clone())?;
            let mut src = a.source.open(cli)?;
            let w = initializers::initialize(&spec, &shape, &mut src)?;
            let cols = *shape.dims().last().unwrap_or(&1);
            for row in w.values.chunks(cols) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                println!("{}", line.join(","));
            }
        }
        Command::SeedSearch(a) => {
            let mut args = a.plan.clone();
            args.arm = SourceKind::Qrng;
            args.nu = None;
            let plan = build_plan(cli, &args)?;
            let search = match plan.arm {
                Arm::Qrng {
                    seed: SeedPolicy::Auto { search, .. },
                } => search,
                _ => return Err(invalid("seed-search needs an automatic qrng seed policy")),
            };
            let ctx = context(cli, plan.pixel_scaling)?;
            let outcome = ctx.search_only(&plan, &search, a.repetition)?;
            print_json(&outcome);
        }
        Command::Train(a) => {
            let plan = build_plan(cli, &a.plan)?;
            let ctx = context(cli, plan.pixel_scaling)?;
            let dir = run_and_store(&ctx, &cli.out_dir, std::slice::from_ref(&plan))?.remove(0);
            println!("{}", dir.display());
        }
        Command::Compare(a) => {
            let rec = compare(&load_trace(&a.qrng)?, &load_trace(&a.prng)?, &threshold_grid())?;
            let dir = save_comparison(&cli.out_dir, &rec)?;
            eprintln!("{}", dir.display());
            print_json(&rec.result);
        }
        Command::Grid(a) => {
            let spec = match &a.spec {
                Some(path) => read_json(path)?,
                None => GridSpec {
                    dataset: "mnist".into(),
                    models: a.models.iter().map(|m| m.parse()).collect::<Result<_, _>>()?,
                    optimizers: a.optimizers.iter().map(|o| optimizer(o, None)).collect::<Result<_, _>>()?,
                    initializers: if a.initializers.is_empty() {
                        InitializerSpec::all().to_vec()
                    } else {
                        a.initializers.iter().map(|i| initializer(i, &[])).collect::<Result<_, _>>()?
                    },
                    qrng_seed: qrng_policy(a.nu, &a.seed_search, a.search_per_plan, false)?,
                    repetitions: a.repetitions,
                    epochs: a.epochs,
                    batch_size: a.batch_size,
                    master_seed: cli.master_seed,
                    pixel_scaling: a.pixels.into(),
                    sobol_cache: a.sobol_cache,
                },
            };
            let ctx = context(cli, spec.pixel_scaling)?;
            let (dir, report) = run_grid(&ctx, &cli.out_dir, &spec, &threshold_grid())?;
            println!("{}", dir.display());
            if let Some(all) = report.summaries.first() {
                print_json(&all.rows);
            }
        }
        Command::PlotData(a) => {
            let mut records = Vec::new();
            for input in &a.inputs {
                collect_comparisons(input, &mut records)?;
            }
            if records.is_empty() {
                return Err(invalid("no comparisons found in the given inputs"));
            }
            let dest = a.dest.clone().unwrap_or_else(|| cli.out_dir.join("plot"));
            write_plot_data(&dest, &records)?;
            write_json(&dest.join("comparisons.json"), &records)?;
            println!("{}", dest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("{e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serializes"));
            ExitCode::FAILURE
        }
    }
}
