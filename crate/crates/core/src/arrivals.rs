//! Nonstationary non-Poisson arrival streams by the inversion method.
//!
//! A stationary renewal process `N` with base interrenewal distribution `F`
//! is composed with the cumulative arrival function: `A(t) = N(Λ(t))`. The
//! first renewal is drawn from the stationary-excess distribution so that
//! `E[A(t)] = Λ(t)` (for a unit-mean base) at every `t`, not just
//! asymptotically.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::distributions::Sampler;
use crate::error::{Error, Result};
use crate::rates::CumulativeRate;

/// How the first arrival is placed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FirstArrival {
    /// The equilibrium draw lives on the renewal time scale and is mapped
    /// through Λ⁻¹(·; 0) like every other renewal.
    #[default]
    Inverted,
    /// The equilibrium draw is used as the first arrival time as is.
    Literal,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrivalStream {
    pub times: Vec<f64>,
    /// Job sizes aligned with `times`; empty until [`attach_sizes`] runs.
    pub sizes: Vec<f64>,
    pub horizon: f64,
}

impl ArrivalStream {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of arrivals in (0, t].
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&a| a <= t)
    }

    /// Builds a stream from explicit arrivals, e.g. for hand-made scenarios.
    pub fn from_jobs(jobs: &[(f64, f64)], horizon: f64) -> Result<Self> {
        let stream = ArrivalStream {
            times: jobs.iter().map(|j| j.0).collect(),
            sizes: jobs.iter().map(|j| j.1).collect(),
            horizon,
        };
        stream.validate()?;
        Ok(stream)
    }

    fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition("arrival times must be nondecreasing".into()));
        }
        if self.times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Precondition("arrival times must be nonnegative".into()));
        }
        if self.sizes.len() != self.times.len() || self.sizes.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Precondition("every arrival needs a positive size".into()));
        }
        Ok(())
    }

    /// Writes `time,size` rows. Floats use the shortest exact representation,
    /// so a read-back reproduces the stream bit for bit.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# horizon={}", self.horizon).map_err(io)?;
        writeln!(w, "time,size").map_err(io)?;
        for (t, s) in self.times.iter().zip(&self.sizes) {
            writeln!(w, "{t},{s}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |line: &str| Error::Config(format!("{}: malformed trace line {line:?}", path.display()));
        let mut stream = ArrivalStream::default();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if let Some(h) = line.strip_prefix("# horizon=") {
                stream.horizon = h.parse().map_err(|_| bad(&line))?;
                continue;
            }
            if line == "time,size" || line.is_empty() {
                continue;
            }
            let (t, s) = line.split_once(',').ok_or_else(|| bad(&line))?;
            stream.times.push(t.parse().map_err(|_| bad(&line))?);
            stream.sizes.push(s.parse().map_err(|_| bad(&line))?);
        }
        stream.validate()?;
        Ok(stream)
    }
}

/// Generates arrival times on `(0, horizon)`. Generation stops at the first
/// arrival at or beyond the horizon, which is dropped.
pub fn generate<R: Rng + ?Sized>(
    base: &Sampler,
    lambda: &CumulativeRate,
    horizon: f64,
    first: FirstArrival,
    rng: &mut R,
) -> Result<ArrivalStream> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    let mut times = Vec::with_capacity((lambda.value(horizon) / base.spec().mean() * 1.1) as usize + 16);
    let equilibrium = base.sample_equilibrium(rng);
    // Position on the renewal (Λ) scale of the latest arrival.
    let (mut renewal, mut t) = match first {
        FirstArrival::Inverted => (equilibrium, lambda.inverse_value(equilibrium)),
        FirstArrival::Literal => (lambda.value(equilibrium), equilibrium),
    };
    while t < horizon {
        times.push(t);
        renewal += base.sample(rng);
        let next = lambda.inverse_value(renewal);
        // A sub-ulp gap would collapse two arrivals onto one instant.
        t = if next > t { next } else { next.next_up() };
    }
    Ok(ArrivalStream {
        times,
        sizes: Vec::new(),
        horizon,
    })
}

/// Draws one independent job size per arrival.
pub fn attach_sizes<R: Rng + ?Sized>(mut stream: ArrivalStream, jobsize: &Sampler, rng: &mut R) -> ArrivalStream {
    stream.sizes = stream.times.iter().map(|_| jobsize.sample(rng)).collect();
    stream
}
