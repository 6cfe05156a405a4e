//! Virtual response time by snapshot and replay.
//!
//! At a recording epoch the stored system state is restored, a virtual job is
//! inserted, and the queue is replayed forward with the replication's own
//! future arrivals until the virtual job completes. The elapsed time is one
//! realization of R(epoch).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Sampler;
use crate::engine::{PsServer, SimulationPath};
use crate::error::{Error, Result};
use crate::metrics::{ensemble_from_values, EnsembleSeries};
use crate::rates::CumulativeRate;
use crate::stream::{Purpose, RandomStream};

/// Id of the inserted job; larger than any real id, so it loses ties.
const VIRTUAL_ID: usize = usize::MAX;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizePolicy {
    /// Fresh draw from the job-size distribution for every probe.
    #[default]
    RandomSize,
    /// Always the mean job size.
    FixedMeanSize,
}

impl SizePolicy {
    pub fn draw<R: Rng + ?Sized>(self, jobsize: &Sampler, rng: &mut R) -> f64 {
        match self {
            SizePolicy::RandomSize => jobsize.sample(rng),
            SizePolicy::FixedMeanSize => jobsize.spec().mean(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualProbe {
    pub epoch: f64,
    pub virtual_size: f64,
    pub response: f64,
}

/// Outcome of a replay from a snapshot.
#[derive(Debug, Clone, Default)]
pub(crate) struct Replay {
    pub virtual_departure: Option<f64>,
    /// Real jobs that departed during the replay, in order.
    pub departures: Vec<(usize, f64)>,
}

/// Replays from the snapshot at `epoch`, optionally with a virtual job of
/// `virtual_size`. With a virtual job the replay stops when it departs;
/// without one it stops after `until`. Exceeding `epoch + cap` with the
/// virtual job still present is an error.
pub(crate) fn replay(
    path: &SimulationPath,
    mu: &CumulativeRate,
    epoch: f64,
    virtual_size: Option<f64>,
    until: f64,
    cap: f64,
) -> Result<Replay> {
    let snapshot = path.snapshot(epoch)?;
    let epoch = snapshot.epoch;
    let m0 = mu.value(epoch);
    let mut server = PsServer::new(m0);
    for job in &snapshot.jobs {
        server.admit(m0, job.id, job.remaining);
    }
    if let Some(v) = virtual_size {
        server.admit(m0, VIRTUAL_ID, v);
    }
    let stop = if virtual_size.is_some() { epoch + cap } else { until };

    let times = &path.stream.times;
    let sizes = &path.stream.sizes;
    let mut next = times.partition_point(|&t| t <= epoch);
    let mut arrival_m = times.get(next).map(|&t| mu.value(t));
    let mut now = epoch;
    let mut out = Replay::default();
    loop {
        let departure_m = server.next_departure_m();
        let departs_first = match (departure_m, arrival_m) {
            (Some(d), Some(a)) => d <= a,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let t = if departs_first {
            mu.inverse_value(departure_m.expect("departure pending")).max(now)
        } else {
            times[next]
        };
        if t > stop {
            if virtual_size.is_some() {
                return Err(Error::ReplayCapExceeded { epoch, cap });
            }
            break;
        }
        now = t;
        if departs_first {
            let id = server.depart(departure_m.expect("departure pending"));
            if id == VIRTUAL_ID {
                out.virtual_departure = Some(t);
                break;
            }
            out.departures.push((id, t));
        } else {
            server.admit(arrival_m.expect("arrival pending"), next, sizes[next]);
            next += 1;
            arrival_m = times.get(next).map(|&t| mu.value(t));
        }
    }
    Ok(out)
}

/// Virtual response time of a job of `virtual_size` inserted at `epoch`.
/// `cap` bounds how long the replay may run.
pub fn probe(path: &SimulationPath, mu: &CumulativeRate, epoch: f64, virtual_size: f64, cap: f64) -> Result<f64> {
    if !(virtual_size > 0.0) {
        return Err(Error::Precondition(format!("virtual size must be positive, got {virtual_size}")));
    }
    let out = replay(path, mu, epoch, Some(virtual_size), f64::INFINITY, cap)?;
    match out.virtual_departure {
        Some(d) => Ok(d - path.snapshot(epoch)?.epoch),
        // Only reachable if the stream ends and the server empties without
        // the virtual job, which cannot happen.
        None => Err(Error::ReplayCapExceeded { epoch, cap }),
    }
}

/// Probes every epoch of one path, drawing virtual sizes per `policy`.
pub fn probe_series<R: Rng + ?Sized>(
    path: &SimulationPath,
    mu: &CumulativeRate,
    epochs: &[f64],
    jobsize: &Sampler,
    policy: SizePolicy,
    cap: &dyn Fn(f64) -> f64,
    rng: &mut R,
) -> Result<Vec<VirtualProbe>> {
    epochs
        .iter()
        .map(|&epoch| {
            let virtual_size = policy.draw(jobsize, rng);
            let response = probe(path, mu, epoch, virtual_size, cap(virtual_size))?;
            Ok(VirtualProbe {
                epoch,
                virtual_size,
                response,
            })
        })
        .collect()
}

/// E[R(t)] over a set of replications sharing one epoch grid. Path `i` draws
/// its probe sizes from stream `(master_seed, i, Probes)`.
#[allow(clippy::too_many_arguments)]
pub fn mean_response_series(
    paths: &[SimulationPath],
    mu: &CumulativeRate,
    epochs: &[f64],
    jobsize: &Sampler,
    policy: SizePolicy,
    master_seed: u64,
    cap: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<EnsembleSeries> {
    if paths.len() < 2 {
        return Err(Error::TooFewReplications(paths.len()));
    }
    let values = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let mut rng = RandomStream::new(master_seed, i as u64, Purpose::Probes);
            let probes = probe_series(path, mu, epochs, jobsize, policy, cap, &mut rng)?;
            Ok(probes.into_iter().map(|p| p.response).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ensemble_from_values(epochs, &values)
}
