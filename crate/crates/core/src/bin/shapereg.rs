//! Command-line driver for the simulation study and single fits.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shapereg::analysis::{posterior_mean_curve, uniform_grid};
use shapereg::bernstein::ShapeClass;
use shapereg::experiment::{emit_report, run_experiment, ExperimentConfig, Preset};
use shapereg::model::{empirical_hyperparams, estimate_sigma_sq, Dataset, HyperparamRule, TestFunction};
use shapereg::samplers::{run_chain, write_trace, BalanceMode, SamplerConfig, SamplerKind};
use shapereg::{Error, Result};

#[derive(Parser)]
#[command(name = "shapereg", version, about = "Shape-restricted Bayesian regression with Bernstein polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Monotone,
    Convex,
    Concave,
}

impl From<Shape> for ShapeClass {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Monotone => ShapeClass::Monotone,
            Shape::Convex => ShapeClass::UnimodalConvex,
            Shape::Concave => ShapeClass::UnimodalConcave,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Function {
    F1,
    F2,
    F3,
    F4,
}

impl From<Function> for TestFunction {
    fn from(f: Function) -> Self {
        match f {
            Function::F1 => TestFunction::F1,
            Function::F2 => TestFunction::F2,
            Function::F3 => TestFunction::F3,
            Function::F4 => TestFunction::F4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Quick,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Mhra,
    Ima,
}

impl From<Sampler> for SamplerKind {
    fn from(s: Sampler) -> Self {
        match s {
            Sampler::Mhra => SamplerKind::Mhra,
            Sampler::Ima => SamplerKind::Ima,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Replicated simulation study on one test function.
    Run(RunArgs),
    /// Fit a single dataset read from a CSV file with columns x,y.
    Fit(FitArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    function: Option<Function>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Defaults to the natural shape of the test function.
    #[arg(long, value_enum)]
    shape: Option<Shape>,
    #[arg(long, value_enum, default_value = "paper")]
    preset: PresetArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to `output_dir` from the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    sampler: Option<Sampler>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    shape: Shape,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 100_000)]
    updates: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let function: TestFunction = args
                .function
                .ok_or_else(|| Error::Config("--function is required without --config".into()))?
                .into();
            let sigma = args
                .sigma
                .ok_or_else(|| Error::Config("--sigma is required without --config".into()))?;
            let shape = args.shape.map_or(function.natural_shape(), Into::into);
            let preset = match args.preset {
                PresetArg::Paper => Preset::Paper,
                PresetArg::Quick => Preset::Quick,
            };
            ExperimentConfig::preset(preset, function, sigma, shape)
        }
    };
    if let Some(f) = args.function {
        cfg.function = f.into();
    }
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    if let Some(s) = args.shape {
        cfg.shape = s.into();
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(s) = args.sampler {
        cfg.sampler.kind = s.into();
    }
    if let Some(u) = args.updates {
        cfg.sampler.updates = u;
    }
    if let Some(b) = args.burnin {
        cfg.sampler.burn_in = b;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(g) = args.grid {
        cfg.grid_size = g;
    }
    if let Some(p) = args.parallel {
        cfg.parallelism = p;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = run_config(&args)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    let rep = run_experiment(&cfg)?;
    emit_report(&rep, &out)?;
    println!(
        "{:?} sigma={} replicates={}: L1={:.4} sup={:.4} MSE={:.4} acceptance={:.4} ESS={:.1}",
        cfg.function,
        cfg.sigma,
        rep.per_replicate.len(),
        rep.aggregate.l1,
        rep.aggregate.sup,
        rep.aggregate.mse,
        rep.mean_acceptance,
        rep.mean_ess
    );
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let data = Dataset::load_csv(&args.data, args.tau)?;
    let hyper = empirical_hyperparams(&data, args.shape.into(), &HyperparamRule::default())?;
    let sigma_sq = estimate_sigma_sq(&data)?;
    let cfg = SamplerConfig {
        kind: SamplerKind::Mhra,
        c: 0.35,
        bounds: hyper.bounds,
        updates: args.updates,
        burn_in: args.burnin,
        thinning: 1,
        seed: args.seed,
        balance: BalanceMode::Paper,
    };
    let trace = run_chain(&data, &hyper.spec, &cfg, sigma_sq)?;
    let curve = posterior_mean_curve(&trace, &uniform_grid(args.tau, args.grid)?)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let path = args.out.join("posterior_mean.csv");
    let mut text = String::from("t,estimate\n");
    for (t, v) in curve.grid.iter().zip(&curve.values) {
        text.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    write_trace(&trace, &args.out.join("trace.json"))?;
    println!("sigma^2 estimate {sigma_sq:.5}, acceptance {:.4}", trace.acceptance_rate());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
