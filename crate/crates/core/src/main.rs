use std::f64::consts::TAU;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tvps_sim::harness::{self, ControlChoice, ExperimentConfig, PairSpec};
use tvps_sim::{verify, Result};

#[derive(Parser)]
#[command(name = "tvps-sim", version, about = "Time-varying processor-sharing queue simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write report, series and manifest files.
    Run(Box<RunArgs>),
    /// Run the analytic self-checks.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; omitted keys take the standard grid's values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the list of arrival-rate frequencies.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Horizons for the --gamma values, one each.
    #[arg(long, value_delimiter = ',')]
    horizon: Vec<f64>,
    /// Replace the list of target response times.
    #[arg(long, value_delimiter = ',')]
    target: Vec<f64>,
    /// Replace the list of controls: sr, dm, const:<mu>.
    #[arg(long, value_delimiter = ',')]
    control: Vec<ControlChoice>,
    /// Replace the list of pairs, e.g. ER/LN.
    #[arg(long, value_delimiter = ',')]
    pair: Vec<PairSpec>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn apply_overrides(mut cfg: ExperimentConfig, args: &RunArgs) -> ExperimentConfig {
    if !args.gamma.is_empty() {
        let horizons = if args.horizon.is_empty() {
            args.gamma
                .iter()
                .map(|&g| {
                    cfg.gammas
                        .iter()
                        .position(|&known| known == g)
                        .map(|i| cfg.horizons[i])
                        .unwrap_or_else(|| (3.0 * TAU / g).ceil())
                })
                .collect()
        } else {
            args.horizon.clone()
        };
        cfg.gammas = args.gamma.clone();
        cfg.horizons = horizons;
    } else if !args.horizon.is_empty() {
        cfg.horizons = args.horizon.clone();
    }
    if !args.target.is_empty() {
        cfg.targets = args.target.clone();
    }
    if !args.control.is_empty() {
        cfg.controls = args.control.clone();
    }
    if !args.pair.is_empty() {
        cfg.pairs = args.pair.clone();
    }
    if let Some(n) = args.reps {
        cfg.n_reps = n;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = apply_overrides(cfg, &args);
    cfg.validate()?;
    let total = cfg.cells().len();
    let summary = harness::run_all_with(&cfg, |i, cell| {
        let r = &cell.report;
        eprintln!(
            "[{}/{total}] {}: avg {:.4} RA {:.2}% RG {:.3}%{}",
            i + 1,
            cell.cell.label(),
            r.spatial_average,
            r.ra_percent,
            r.rg_percent,
            if r.is_good() { " good" } else { "" }
        );
    })?;
    println!("{}", summary.report_path.display());
    println!("{}", summary.manifest_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => {
            if let Some(n) = args.jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
            run(*args).map(|()| true)
        }
        Command::Verify => verify::run_checks().map(|checks| {
            for c in &checks {
                println!("{c}");
            }
            checks.iter().all(|c| c.passed)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
