//! Experiment grid: configuration, per-cell replication ensembles, and CSV
//! artifacts.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::{self, FirstArrival};
use crate::controls::{ControlKind, ControlSpec};
use crate::distributions::{DistributionSpec, Family, Sampler};
use crate::engine;
use crate::error::{Error, Result};
use crate::metrics::{self, EnsembleSeries, StabilizationReport};
use crate::rates::{CumulativeRate, RateFunction};
use crate::stream::{Purpose, RandomStream};
use crate::virtual_response::{self, SizePolicy};

pub const DEFAULT_REPS: usize = 500;
/// Replays may run this many target response times past their epoch.
pub const REPLAY_CAP_FACTOR: f64 = 50.0;

/// An (arrival base, job size) distribution pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairEntry")]
pub struct PairSpec {
    pub name: String,
    pub arrival: DistributionSpec,
    pub jobsize: DistributionSpec,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PairEntry {
    Named(String),
    Explicit {
        name: Option<String>,
        arrival: DistributionSpec,
        jobsize: DistributionSpec,
    },
}

impl TryFrom<PairEntry> for PairSpec {
    type Error = Error;

    fn try_from(entry: PairEntry) -> Result<Self> {
        match entry {
            PairEntry::Named(name) => name.parse(),
            PairEntry::Explicit { name, arrival, jobsize } => Ok(PairSpec {
                name: name.unwrap_or_else(|| format!("{}/{}", arrival.family().short_name(), jobsize.family().short_name())),
                arrival,
                jobsize,
            }),
        }
    }
}

/// Unit-mean EXP (scv 1), ER (scv 0.5), or LN (scv 2).
fn standard_distribution(short: &str) -> Result<DistributionSpec> {
    match short.to_ascii_uppercase().as_str() {
        "EXP" => DistributionSpec::new(Family::Exponential, 1.0, 1.0),
        "ER" => DistributionSpec::new(Family::Erlang, 1.0, 0.5),
        "LN" => DistributionSpec::new(Family::Lognormal, 1.0, 2.0),
        other => Err(Error::Config(format!("unknown distribution {other:?}; expected EXP, ER or LN"))),
    }
}

impl FromStr for PairSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, j) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("pair {s:?} should look like ER/LN")))?;
        Ok(PairSpec {
            name: format!("{}/{}", a.trim().to_ascii_uppercase(), j.trim().to_ascii_uppercase()),
            arrival: standard_distribution(a.trim())?,
            jobsize: standard_distribution(j.trim())?,
        })
    }
}

impl PairSpec {
    /// The five pairs of the experiment grid.
    pub fn standard_pairs() -> Vec<PairSpec> {
        ["EXP/EXP", "ER/ER", "LN/LN", "ER/LN", "LN/ER"]
            .iter()
            .map(|p| p.parse().expect("standard pair"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlChoice {
    Sr,
    Dm,
    Const(f64),
}

impl ControlChoice {
    pub fn kind(self) -> ControlKind {
        match self {
            ControlChoice::Sr => ControlKind::SquareRoot,
            ControlChoice::Dm => ControlKind::DifferenceMatching,
            ControlChoice::Const(mu) => ControlKind::Constant(mu),
        }
    }
}

impl fmt::Display for ControlChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlChoice::Sr => write!(f, "sr"),
            ControlChoice::Dm => write!(f, "dm"),
            ControlChoice::Const(mu) => write!(f, "const:{mu}"),
        }
    }
}

impl FromStr for ControlChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sr" => Ok(ControlChoice::Sr),
            "dm" => Ok(ControlChoice::Dm),
            other => match other.strip_prefix("const:") {
                Some(mu) => mu
                    .parse()
                    .map(ControlChoice::Const)
                    .map_err(|_| Error::Config(format!("bad constant service rate in {s:?}"))),
                None => Err(Error::Config(format!("unknown control {s:?}; expected sr, dm or const:<mu>"))),
            },
        }
    }
}

/// λ(t) = a + b·sin(γt); `b = 0` gives a constant rate and γ is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRateConfig {
    pub a: f64,
    pub b: f64,
}

impl Default for ArrivalRateConfig {
    fn default() -> Self {
        ArrivalRateConfig { a: 1.0, b: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstArrivalMode {
    #[default]
    Inverted,
    Literal,
}

impl From<FirstArrivalMode> for FirstArrival {
    fn from(m: FirstArrivalMode) -> Self {
        match m {
            FirstArrivalMode::Inverted => FirstArrival::Inverted,
            FirstArrivalMode::Literal => FirstArrival::Literal,
        }
    }
}

fn default_pairs() -> Vec<PairSpec> {
    PairSpec::standard_pairs()
}
fn default_gammas() -> Vec<f64> {
    vec![0.001, 0.01, 0.1]
}
fn default_horizons() -> Vec<f64> {
    vec![20_000.0, 2_000.0, 2_000.0]
}
fn default_targets() -> Vec<f64> {
    vec![0.1, 10.0]
}
fn default_controls() -> Vec<ControlChoice> {
    vec![ControlChoice::Sr, ControlChoice::Dm]
}
fn default_reps() -> usize {
    DEFAULT_REPS
}
fn default_seed() -> u64 {
    20_180_101
}
fn default_epochs_per_period() -> usize {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_pairs")]
    pub pairs: Vec<PairSpec>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Replication length for each entry of `gammas`.
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_targets")]
    pub targets: Vec<f64>,
    #[serde(default = "default_controls")]
    pub controls: Vec<ControlChoice>,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_epochs_per_period")]
    pub epochs_per_period: usize,
    /// Epoch spacing when the arrival rate is constant; defaults to horizon/1000.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_spacing: Option<f64>,
    #[serde(default)]
    pub arrival_rate: ArrivalRateConfig,
    #[serde(default)]
    pub size_policy: SizePolicy,
    #[serde(default)]
    pub first_arrival: FirstArrivalMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(Error::Config(format!("n_reps must be at least 2, got {}", self.n_reps)));
        }
        if self.gammas.len() != self.horizons.len() {
            return Err(Error::Config(format!(
                "{} gammas but {} horizons; give one horizon per gamma",
                self.gammas.len(),
                self.horizons.len()
            )));
        }
        if self.epochs_per_period == 0 {
            return Err(Error::Config("epochs_per_period must be positive".into()));
        }
        for &s in &self.targets {
            if !(s > 0.0) {
                return Err(Error::Config(format!("target response time must be positive, got {s}")));
            }
        }
        for (&gamma, &horizon) in self.gammas.iter().zip(&self.horizons) {
            if self.arrival_rate.b != 0.0 {
                RateFunction::sinusoidal(self.arrival_rate.a, self.arrival_rate.b, gamma)?;
                let period = TAU / gamma;
                if horizon < 3.0 * period {
                    return Err(Error::Config(format!(
                        "horizon {horizon} for gamma {gamma} covers fewer than 3 periods of {period:.1}"
                    )));
                }
            } else if !(horizon > 0.0) {
                return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
            }
        }
        Ok(())
    }

    /// Every cell of the grid, pairs outermost, controls innermost.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for pair in &self.pairs {
            for (&gamma, &horizon) in self.gammas.iter().zip(&self.horizons) {
                for &target_s in &self.targets {
                    for &control in &self.controls {
                        cells.push(CellSpec {
                            pair: pair.clone(),
                            control,
                            arrival_rate: self.arrival_rate,
                            gamma,
                            target_s,
                            horizon,
                            n_reps: self.n_reps,
                            master_seed: self.master_seed,
                            epochs_per_period: self.epochs_per_period,
                            epoch_spacing: self.epoch_spacing,
                            size_policy: self.size_policy,
                            first_arrival: self.first_arrival,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// One experiment cell: a pair, a control, an arrival rate and a target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSpec {
    pub pair: PairSpec,
    pub control: ControlChoice,
    pub arrival_rate: ArrivalRateConfig,
    pub gamma: f64,
    pub target_s: f64,
    pub horizon: f64,
    pub n_reps: usize,
    pub master_seed: u64,
    pub epochs_per_period: usize,
    pub epoch_spacing: Option<f64>,
    pub size_policy: SizePolicy,
    pub first_arrival: FirstArrivalMode,
}

impl CellSpec {
    pub fn arrival_rate_function(&self) -> Result<RateFunction> {
        let ArrivalRateConfig { a, b } = self.arrival_rate;
        if b == 0.0 {
            RateFunction::constant(a)
        } else {
            RateFunction::sinusoidal(a, b, self.gamma)
        }
    }

    pub fn control_spec(&self) -> Result<ControlSpec> {
        ControlSpec::new(
            self.control.kind(),
            self.target_s,
            self.pair.jobsize.mean(),
            self.pair.arrival.scv(),
            self.pair.jobsize.scv(),
        )
    }

    pub fn period(&self) -> Option<f64> {
        (self.arrival_rate.b != 0.0).then(|| TAU / self.gamma)
    }

    /// Recording epochs `k · spacing` on `[0, horizon]`: `epochs_per_period`
    /// per period for a sinusoidal rate, `epoch_spacing` otherwise.
    pub fn epochs(&self) -> Vec<f64> {
        let spacing = match self.period() {
            Some(p) => p / self.epochs_per_period as f64,
            None => self.epoch_spacing.unwrap_or(self.horizon / 1000.0),
        };
        let count = (self.horizon / spacing * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|k| (k as f64 * spacing).min(self.horizon)).collect()
    }

    /// Report window: the last full period on the grid, or the second half
    /// of the run for a constant arrival rate. Returns `(start, length)`.
    pub fn report_window(&self, epochs: &[f64]) -> Result<(f64, f64)> {
        let last = epochs.len() - 1;
        match self.period() {
            Some(period) => {
                if last < self.epochs_per_period {
                    return Err(Error::Config(format!("horizon {} is shorter than one period", self.horizon)));
                }
                Ok((epochs[last - self.epochs_per_period], period))
            }
            None => {
                let start = epochs[last / 2];
                Ok((start, epochs[last] - start))
            }
        }
    }

    /// Replay budget for a virtual job of size `v`.
    pub fn replay_cap(&self, v: f64) -> f64 {
        REPLAY_CAP_FACTOR * self.target_s * (v / self.pair.jobsize.mean()).max(1.0)
    }

    /// Extra stream length past the horizon so that late probes still see
    /// future arrivals.
    pub fn lookahead(&self) -> f64 {
        REPLAY_CAP_FACTOR * self.target_s
    }

    pub fn label(&self) -> String {
        format!(
            "{}_{}_g{}_s{}",
            self.pair.name.replace('/', "-"),
            self.control.to_string().replace(':', ""),
            self.gamma,
            self.target_s
        )
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: CellSpec,
    pub queue: EnsembleSeries,
    pub response: EnsembleSeries,
    /// λ(t) on the epoch grid.
    pub lambda: Vec<f64>,
    pub report: StabilizationReport,
}

impl CellResult {
    pub fn write_series_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,mean_q,q_lo95,q_hi95,mean_r,r_lo95,r_hi95,lambda\n");
        for i in 0..self.queue.epochs.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.queue.epochs[i],
                self.queue.mean[i],
                self.queue.lo95(i),
                self.queue.hi95(i),
                self.response.mean[i],
                self.response.lo95(i),
                self.response.hi95(i),
                self.lambda[i]
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn report_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.cell.pair.name,
            self.cell.control,
            self.cell.gamma,
            self.cell.target_s,
            r.amplitude,
            r.spatial_average,
            r.ra_percent,
            r.rg_percent,
            r.is_good()
        )
    }
}

pub const REPORT_HEADER: &str = "pair,control,gamma,s,amplitude,spatial_avg,ra_percent,rg_percent,good";

/// Runs every replication of a cell, probes the virtual response time at each
/// epoch, and summarizes. Replication `i` draws from streams seeded by
/// `(master_seed, i)` only, so results do not depend on the control, the
/// cell order, or the number of worker threads.
pub fn run_cell(cell: &CellSpec) -> Result<CellResult> {
    if cell.n_reps < 2 {
        return Err(Error::TooFewReplications(cell.n_reps));
    }
    let lambda_fn = cell.arrival_rate_function()?;
    let mu = CumulativeRate::new(RateFunction::controlled(cell.control_spec()?, lambda_fn.clone())?);
    let lambda = CumulativeRate::new(lambda_fn);
    let arrival = Sampler::new(cell.pair.arrival);
    let jobsize = Sampler::new(cell.pair.jobsize);
    let epochs = cell.epochs();
    let stream_horizon = cell.horizon + cell.lookahead();
    let cap = |v: f64| cell.replay_cap(v);

    let reps = (0..cell.n_reps)
        .into_par_iter()
        .map(|rep| {
            let rep = rep as u64;
            let mut rng = RandomStream::new(cell.master_seed, rep, Purpose::Arrivals);
            let stream = arrivals::generate(&arrival, &lambda, stream_horizon, cell.first_arrival.into(), &mut rng)?;
            let mut rng = RandomStream::new(cell.master_seed, rep, Purpose::JobSizes);
            let stream = arrivals::attach_sizes(stream, &jobsize, &mut rng);
            let path = engine::run(stream, &mu, cell.horizon, &epochs)?;
            let q: Vec<f64> = path.snapshots.iter().map(|s| s.jobs.len() as f64).collect();
            let mut rng = RandomStream::new(cell.master_seed, rep, Purpose::Probes);
            let r = virtual_response::probe_series(&path, &mu, &epochs, &jobsize, cell.size_policy, &cap, &mut rng)?
                .into_iter()
                .map(|p| p.response)
                .collect::<Vec<f64>>();
            Ok((q, r))
        })
        .collect::<Result<Vec<(Vec<f64>, Vec<f64>)>>>()?;

    let (q, r): (Vec<Vec<f64>>, Vec<Vec<f64>>) = reps.into_iter().unzip();
    let queue = metrics::ensemble_from_values(&epochs, &q)?;
    let response = metrics::ensemble_from_values(&epochs, &r)?;
    let (start, length) = cell.report_window(&epochs)?;
    let report = metrics::stabilization_report(&response, cell.target_s, length, start)?;
    let lambda = epochs.iter().map(|&t| lambda.rate(t)).collect();
    Ok(CellResult {
        cell: cell.clone(),
        queue,
        response,
        lambda,
        report,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    cells: Vec<ManifestCell>,
}

#[derive(Serialize)]
struct ManifestCell {
    label: String,
    pair: String,
    control: String,
    gamma: f64,
    target_s: f64,
    horizon: f64,
    series: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub results: Vec<CellResult>,
}

/// Runs every cell and writes `report.csv`, one `series_<label>.csv` per
/// cell, and `manifest.json` into the output directory.
pub fn run_all(config: &ExperimentConfig) -> Result<RunSummary> {
    run_all_with(config, |_, _| {})
}

/// [`run_all`] with a callback after each finished cell.
pub fn run_all_with(config: &ExperimentConfig, mut on_cell: impl FnMut(usize, &CellResult)) -> Result<RunSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cells = config.cells();
    let mut results = Vec::with_capacity(cells.len());
    let mut report = format!("{REPORT_HEADER}\n");
    let mut manifest_cells = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let result = run_cell(cell)?;
        let series = format!("series_{}.csv", cell.label());
        result.write_series_csv(&dir.join(&series))?;
        report.push_str(&result.report_row());
        report.push('\n');
        manifest_cells.push(ManifestCell {
            label: cell.label(),
            pair: cell.pair.name.clone(),
            control: cell.control.to_string(),
            gamma: cell.gamma,
            target_s: cell.target_s,
            horizon: cell.horizon,
            series,
        });
        on_cell(i, &result);
        results.push(result);
    }
    let report_path = dir.join("report.csv");
    std::fs::write(&report_path, report).map_err(|e| Error::io(&report_path, e))?;
    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        cells: manifest_cells,
    };
    let mut file = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    serde_json::to_writer_pretty(&mut file, &manifest).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(file).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(RunSummary {
        report_path,
        manifest_path,
        results,
    })
}
