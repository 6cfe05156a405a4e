//! Ensemble statistics and the two stabilization metrics.
//!
//! Over one period window `[x, x + T]` of the mean response-time process:
//!
//! * relative amplitude `RA = (max − min) / (2 · avg) × 100%`
//! * relative gap `RG = (s − avg) / s × 100%`
//!
//! where `avg` is the spatial (time) average over the window, computed with
//! the trapezoid rule on the epoch grid.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

const Z_95: f64 = 1.96;
/// Thresholds for calling a control "good".
pub const GOOD_RA_PERCENT: f64 = 10.0;
pub const GOOD_RG_PERCENT: f64 = 0.1;

/// One replication's values on an epoch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub epochs: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSeries {
    pub epochs: Vec<f64>,
    pub mean: Vec<f64>,
    /// 95% normal-approximation half-width, `1.96 · s / √n`.
    pub ci_half: Vec<f64>,
    pub n_reps: usize,
}

impl EnsembleSeries {
    pub fn lo95(&self, i: usize) -> f64 {
        self.mean[i] - self.ci_half[i]
    }

    pub fn hi95(&self, i: usize) -> f64 {
        self.mean[i] + self.ci_half[i]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,mean,lo95,hi95").map_err(io)?;
        for i in 0..self.epochs.len() {
            writeln!(w, "{},{},{},{}", self.epochs[i], self.mean[i], self.lo95(i), self.hi95(i)).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Pointwise mean and confidence half-width across replications.
pub fn ensemble_mean(per_rep: &[Series]) -> Result<EnsembleSeries> {
    let first = per_rep.first().ok_or(Error::TooFewReplications(0))?;
    for (i, s) in per_rep.iter().enumerate() {
        if s.epochs.len() != s.values.len() {
            return Err(Error::Misaligned(format!("replication {i} has {} epochs but {} values", s.epochs.len(), s.values.len())));
        }
        if s.epochs != first.epochs {
            return Err(Error::Misaligned(format!("replication {i} uses a different epoch grid")));
        }
    }
    let values: Vec<Vec<f64>> = per_rep.iter().map(|s| s.values.clone()).collect();
    ensemble_from_values(&first.epochs, &values)
}

/// [`ensemble_mean`] for value rows that are known to share `epochs`.
pub fn ensemble_from_values(epochs: &[f64], per_rep: &[Vec<f64>]) -> Result<EnsembleSeries> {
    let n = per_rep.len();
    if n < 2 {
        return Err(Error::TooFewReplications(n));
    }
    if let Some(i) = per_rep.iter().position(|v| v.len() != epochs.len()) {
        return Err(Error::Misaligned(format!(
            "replication {i} has {} values for {} epochs",
            per_rep[i].len(),
            epochs.len()
        )));
    }
    let nf = n as f64;
    let mut mean = vec![0.0; epochs.len()];
    for row in per_rep {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut ss = vec![0.0; epochs.len()];
    for row in per_rep {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let ci_half = ss.iter().map(|s| Z_95 * (s / (nf - 1.0) / nf).sqrt()).collect();
    Ok(EnsembleSeries {
        epochs: epochs.to_vec(),
        mean,
        ci_half,
        n_reps: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilizationReport {
    pub amplitude: f64,
    pub spatial_average: f64,
    pub ra_percent: f64,
    pub rg_percent: f64,
    pub window: (f64, f64),
    pub period_used: f64,
    /// Epoch spacing inside the window; bounds how well max/min are resolved.
    pub grid_spacing: f64,
}

impl StabilizationReport {
    pub fn is_good(&self) -> bool {
        self.ra_percent <= GOOD_RA_PERCENT && self.rg_percent.abs() <= GOOD_RG_PERCENT
    }
}

/// Amplitude and spatial average of a series over one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub amplitude: f64,
    pub spatial_average: f64,
    pub ra_percent: f64,
    pub window: (f64, f64),
    pub period_used: f64,
    pub grid_spacing: f64,
}

fn window_indices(epochs: &[f64], start: f64, period: f64) -> Result<(usize, usize)> {
    let end = start + period;
    let eps = |t: f64| 1e-9 * t.abs().max(1.0);
    let (first, last) = match (epochs.first(), epochs.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::OutOfRange { what: "window start", value: start, lo: 0.0, hi: 0.0 }),
    };
    if !(period > 0.0) || start < first - eps(first) || end > last + eps(last) {
        return Err(Error::OutOfRange {
            what: "window start",
            value: start,
            lo: first,
            hi: last - period,
        });
    }
    let i = epochs.partition_point(|&t| t < start - eps(start));
    let j = epochs.partition_point(|&t| t <= end + eps(end));
    if j < i + 2 {
        return Err(Error::Precondition(format!("window [{start}, {end}] holds fewer than two epochs")));
    }
    Ok((i, j))
}

pub fn relative_amplitude(series: &EnsembleSeries, period: f64, window_start: f64) -> Result<WindowStats> {
    let (i, j) = window_indices(&series.epochs, window_start, period)?;
    let t = &series.epochs[i..j];
    let y = &series.mean[i..j];
    let integral: f64 = t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum();
    let span = t[t.len() - 1] - t[0];
    let avg = integral / span;
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude = max - min;
    Ok(WindowStats {
        amplitude,
        spatial_average: avg,
        ra_percent: amplitude / (2.0 * avg) * 100.0,
        window: (t[0], t[t.len() - 1]),
        period_used: span,
        grid_spacing: span / (t.len() - 1) as f64,
    })
}

pub fn relative_gap(series: &EnsembleSeries, target_s: f64, period: f64, window_start: f64) -> Result<f64> {
    if !(target_s > 0.0) {
        return Err(Error::Precondition(format!("target must be positive, got {target_s}")));
    }
    let stats = relative_amplitude(series, period, window_start)?;
    Ok(gap_percent(target_s, stats.spatial_average))
}

fn gap_percent(target_s: f64, avg: f64) -> f64 {
    (target_s - avg) / target_s * 100.0
}

pub fn stabilization_report(series: &EnsembleSeries, target_s: f64, period: f64, window_start: f64) -> Result<StabilizationReport> {
    if !(target_s > 0.0) {
        return Err(Error::Precondition(format!("target must be positive, got {target_s}")));
    }
    let w = relative_amplitude(series, period, window_start)?;
    Ok(StabilizationReport {
        amplitude: w.amplitude,
        spatial_average: w.spatial_average,
        ra_percent: w.ra_percent,
        rg_percent: gap_percent(target_s, w.spatial_average),
        window: w.window,
        period_used: w.period_used,
        grid_spacing: w.grid_spacing,
    })
}
