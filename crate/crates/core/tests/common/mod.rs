#![allow(dead_code)]

use rand::Rng;
use tvps_sim::arrivals::ArrivalStream;
use tvps_sim::engine::{self, SimulationPath};
use tvps_sim::rates::{CumulativeRate, RateFunction};
use tvps_sim::stream::RandomStream;

/// Fixed-step processor-sharing integrator. Time advances in steps of `dt`;
/// a step is split where a job arrives or finishes, and each job receives
/// `μ(mid) · h / Q` work over a (sub)step of length `h`. Returns departure
/// times per job.
pub fn brute_force_departures(jobs: &[(f64, f64)], rate: &RateFunction, dt: f64) -> Vec<f64> {
    let mut remaining: Vec<f64> = jobs.iter().map(|j| j.1).collect();
    let mut departure = vec![f64::NAN; jobs.len()];
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut t = 0.0;
    let mut step = 0u64;
    let mut done = 0;
    while done < jobs.len() {
        while next < jobs.len() && jobs[next].0 <= t {
            active.push(next);
            next += 1;
        }
        let mut step_end = (step + 1) as f64 * dt;
        while step_end <= t {
            step += 1;
            step_end = (step + 1) as f64 * dt;
        }
        // land exactly on boundaries so that t always advances
        let mut t_next = step_end;
        if next < jobs.len() && jobs[next].0 < t_next {
            t_next = jobs[next].0;
        }
        if active.is_empty() {
            t = t_next;
            continue;
        }
        let mut h = t_next - t;
        let per_job = rate.rate(t + 0.5 * h) / active.len() as f64;
        let smallest = active.iter().map(|&i| remaining[i]).fold(f64::INFINITY, f64::min);
        if smallest < per_job * h {
            h = smallest / per_job;
            t_next = t + h;
        }
        for &i in &active {
            remaining[i] -= per_job * h;
        }
        t = t_next;
        active.retain(|&i| {
            if remaining[i] <= 1e-12 {
                departure[i] = t;
                done += 1;
                false
            } else {
                true
            }
        });
    }
    departure
}

/// A random instance: at most `max_jobs` jobs arriving in [0, 5) with sizes
/// in [0.1, 2).
pub fn random_jobs(rng: &mut RandomStream, max_jobs: usize) -> Vec<(f64, f64)> {
    let n = rng.random_range(1..=max_jobs);
    let mut jobs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..5.0), rng.random_range(0.1..2.0)))
        .collect();
    jobs.sort_by(|a, b| a.0.total_cmp(&b.0));
    jobs
}

pub fn run_to_completion(jobs: &[(f64, f64)], mu: &CumulativeRate) -> SimulationPath {
    let stream = ArrivalStream::from_jobs(jobs, f64::INFINITY).unwrap();
    engine::run(stream, mu, 1e4, &[]).unwrap()
}
