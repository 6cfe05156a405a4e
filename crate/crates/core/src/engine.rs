//! Event-driven simulation of a single-server processor-sharing queue with a
//! time-varying service rate.
//!
//! Between events the queue length `Q` is constant, so every job in system
//! receives `(M(t₂) − M(t₁)) / Q` units of work. The server therefore runs on
//! the cumulative-service scale `M`: it tracks the attained per-job service
//! since the system last emptied, each job departs when the attained service
//! reaches its target, and the next departure happens at
//! `M⁻¹(M(t) + Q · r_min)`. Real time is only recovered when an event is
//! placed.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::arrivals::ArrivalStream;
use crate::error::{Error, Result};
use crate::rates::CumulativeRate;

/// Remaining work below this counts as departed.
pub const DRAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub job: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobState {
    pub id: usize,
    pub arrival: f64,
    pub remaining: f64,
}

/// State of the system at a recording epoch, after every event at or before
/// the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: f64,
    /// Jobs in system, sorted by id.
    pub jobs: Vec<JobState>,
}

#[derive(Debug, Clone)]
pub struct SimulationPath {
    pub events: Vec<Event>,
    /// Queue length right after each event, aligned with `events`.
    pub queue: Vec<usize>,
    pub snapshots: Vec<Snapshot>,
    /// Departure time per job id; `None` if still in system at the horizon
    /// or never admitted.
    pub departures: Vec<Option<f64>>,
    pub stream: ArrivalStream,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    target: f64,
    id: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.target.total_cmp(&other.target).then(self.id.cmp(&other.id))
    }
}

/// Processor-sharing server on the cumulative-service scale. Per-job
/// remaining work is `target − attained`, so an event costs O(log Q).
#[derive(Debug, Clone, Default)]
pub(crate) struct PsServer {
    m_now: f64,
    attained: f64,
    jobs: BinaryHeap<Reverse<Pending>>,
}

impl PsServer {
    pub(crate) fn new(m_now: f64) -> Self {
        PsServer {
            m_now,
            ..Default::default()
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.jobs.len()
    }

    pub(crate) fn m_now(&self) -> f64 {
        self.m_now
    }

    fn advance(&mut self, m: f64) {
        if !self.jobs.is_empty() {
            self.attained += (m - self.m_now) / self.jobs.len() as f64;
        }
        self.m_now = m;
    }

    pub(crate) fn admit(&mut self, m: f64, id: usize, work: f64) {
        self.advance(m);
        self.jobs.push(Reverse(Pending {
            target: self.attained + work,
            id,
        }));
    }

    /// Cumulative-service value at which the next job departs.
    pub(crate) fn next_departure_m(&self) -> Option<f64> {
        self.jobs.peek().map(|Reverse(p)| {
            let r = p.target - self.attained;
            let r = if r < DRAIN_TOL { 0.0 } else { r };
            self.m_now + self.jobs.len() as f64 * r
        })
    }

    /// Removes the job with the least remaining work, which drains to exactly
    /// zero at `m`.
    pub(crate) fn depart(&mut self, m: f64) -> usize {
        let m = m.max(self.m_now);
        self.advance(m);
        let Reverse(p) = self.jobs.pop().expect("departure from an empty server");
        if self.jobs.is_empty() {
            self.attained = 0.0;
        } else {
            self.attained = self.attained.max(p.target);
        }
        p.id
    }

    /// Remaining work of every job as of cumulative service `m >= m_now`.
    pub(crate) fn remaining_at(&self, m: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let share = if self.jobs.is_empty() {
            0.0
        } else {
            (m - self.m_now) / self.jobs.len() as f64
        };
        let attained = self.attained + share;
        self.jobs.iter().map(move |Reverse(p)| (p.id, (p.target - attained).max(0.0)))
    }
}

/// Simulates the queue on `[0, horizon]` driven by `stream` (which must carry
/// sizes). Arrivals at or after the horizon are not admitted; jobs still in
/// system at the horizon are left incomplete. Snapshots are taken at each
/// of `record_epochs`.
pub fn run(stream: ArrivalStream, mu: &CumulativeRate, horizon: f64, record_epochs: &[f64]) -> Result<SimulationPath> {
    if stream.sizes.len() != stream.times.len() {
        return Err(Error::Precondition("arrival stream has no job sizes attached".into()));
    }
    if record_epochs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("record epochs must be sorted".into()));
    }
    if let Some(&e) = record_epochs.iter().find(|&&e| !(0.0..=horizon).contains(&e)) {
        return Err(Error::OutOfRange {
            what: "record epoch",
            value: e,
            lo: 0.0,
            hi: horizon,
        });
    }

    let admitted = stream.times.partition_point(|&t| t < horizon);
    let mut events = Vec::with_capacity(2 * admitted);
    let mut queue = Vec::with_capacity(2 * admitted);
    let mut departures = vec![None; admitted];
    let mut snapshots = Vec::with_capacity(record_epochs.len());
    let mut server = PsServer::new(0.0);
    let mut now = 0.0f64;
    let mut next_arrival = 0usize;
    let mut next_epoch = 0usize;

    let mut take_snapshots = |until: f64, server: &PsServer, snapshots: &mut Vec<Snapshot>, inclusive: bool| {
        while next_epoch < record_epochs.len()
            && (record_epochs[next_epoch] < until || (inclusive && record_epochs[next_epoch] <= until))
        {
            let epoch = record_epochs[next_epoch];
            let m = mu.value(epoch).max(server.m_now());
            let mut jobs: Vec<JobState> = server
                .remaining_at(m)
                .map(|(id, remaining)| JobState {
                    id,
                    arrival: stream.times[id],
                    remaining,
                })
                .collect();
            jobs.sort_by_key(|j| j.id);
            snapshots.push(Snapshot { epoch, jobs });
            next_epoch += 1;
        }
    };

    let mut arrival_m = (next_arrival < admitted).then(|| mu.value(stream.times[0]));
    loop {
        let departure_m = server.next_departure_m();
        let departs_first = match (departure_m, arrival_m) {
            (Some(d), Some(a)) => d <= a,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if departs_first {
            let m = departure_m.expect("departure pending");
            let t = mu.inverse_value(m).max(now);
            if t > horizon {
                break;
            }
            take_snapshots(t, &server, &mut snapshots, false);
            let id = server.depart(m);
            now = t;
            departures[id] = Some(t);
            events.push(Event {
                time: t,
                kind: EventKind::Departure,
                job: id,
            });
        } else {
            let m = arrival_m.expect("arrival pending");
            let t = stream.times[next_arrival];
            take_snapshots(t, &server, &mut snapshots, false);
            server.admit(m, next_arrival, stream.sizes[next_arrival]);
            now = t;
            events.push(Event {
                time: t,
                kind: EventKind::Arrival,
                job: next_arrival,
            });
            next_arrival += 1;
            arrival_m = (next_arrival < admitted).then(|| mu.value(stream.times[next_arrival]));
        }
        queue.push(server.len());
    }
    take_snapshots(horizon, &server, &mut snapshots, true);

    Ok(SimulationPath {
        events,
        queue,
        snapshots,
        departures,
        stream,
        horizon,
    })
}

fn epoch_matches(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

impl SimulationPath {
    /// Q(t), right-continuous: includes arrivals at `t` and excludes
    /// departures at `t`.
    pub fn queue_length_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange {
                what: "time",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        let k = self.events.partition_point(|e| e.time <= t);
        Ok(if k == 0 { 0 } else { self.queue[k - 1] })
    }

    /// (1/(t1−t0)) ∫_{t0}^{t1} Q(t) dt.
    pub fn time_average_queue(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(0.0 <= t0 && t0 < t1 && t1 <= self.horizon) {
            return Err(Error::Precondition(format!("bad averaging window [{t0}, {t1}]")));
        }
        let mut area = 0.0;
        let mut last = t0;
        let mut q = self.queue_length_at(t0)? as f64;
        let start = self.events.partition_point(|e| e.time <= t0);
        for (e, &after) in self.events[start..].iter().zip(&self.queue[start..]) {
            if e.time >= t1 {
                break;
            }
            area += q * (e.time - last);
            last = e.time;
            q = after as f64;
        }
        area += q * (t1 - last);
        Ok(area / (t1 - t0))
    }

    pub fn snapshot(&self, epoch: f64) -> Result<&Snapshot> {
        let k = self.snapshots.partition_point(|s| s.epoch < epoch && !epoch_matches(s.epoch, epoch));
        self.snapshots
            .get(k)
            .filter(|s| epoch_matches(s.epoch, epoch))
            .ok_or(Error::MissingSnapshot(epoch))
    }

    /// `(arrival, sojourn)` of every job that completed before the horizon.
    pub fn sojourn_times(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.departures
            .iter()
            .enumerate()
            .filter_map(|(id, d)| d.map(|d| (self.stream.times[id], d - self.stream.times[id])))
    }

    /// ∫ μ(s)/Q(s) ds over the job's stay, re-integrated along the recorded
    /// path. Equals the job's size for every completed job.
    pub fn service_received(&self, mu: &CumulativeRate, job: usize) -> Option<f64> {
        let arrival = self.stream.times[job];
        let departure = self.departures.get(job).copied().flatten()?;
        let start = self.events.partition_point(|e| e.time < arrival);
        let mut total = 0.0;
        let mut last = arrival;
        let mut q = 0usize;
        for (e, &after) in self.events[start..].iter().zip(&self.queue[start..]) {
            if e.time > last && q > 0 {
                total += (mu.value(e.time) - mu.value(last)) / q as f64;
                last = e.time;
            }
            if e.kind == EventKind::Departure && e.job == job {
                break;
            }
            q = after;
            if e.time > departure {
                break;
            }
        }
        Some(total)
    }

    pub fn write_events_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "time,kind,job,queue").map_err(io)?;
        for (e, q) in self.events.iter().zip(&self.queue) {
            let kind = match e.kind {
                EventKind::Arrival => "arrival",
                EventKind::Departure => "departure",
            };
            writeln!(w, "{},{kind},{},{q}", e.time, e.job).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn write_snapshots_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "epoch,job,arrival,remaining").map_err(io)?;
        for s in &self.snapshots {
            for j in &s.jobs {
                writeln!(w, "{},{},{},{}", s.epoch, j.id, j.arrival, j.remaining).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}
