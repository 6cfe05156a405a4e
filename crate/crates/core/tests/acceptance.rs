//! Acceptance criteria. Each prints one PASS/FAIL line; the process exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force_departures, random_jobs, run_to_completion};
use tvps_sim::arrivals::{self, FirstArrival};
use tvps_sim::controls::{self, ControlKind, ControlSpec};
use tvps_sim::distributions::DistributionSpec;
use tvps_sim::engine;
use tvps_sim::harness::{self, ArrivalRateConfig, CellSpec, ControlChoice, ExperimentConfig, PairSpec};
use tvps_sim::rates::{CumulativeRate, RateFunction};
use tvps_sim::stream::{Purpose, RandomStream};
use tvps_sim::verify::{self, matches_printed};

type Outcome = Result<(bool, String), tvps_sim::Error>;
type Criterion = (&'static str, fn() -> Outcome);

fn cell(pair: &str, control: ControlChoice, gamma: f64, s: f64, reps: usize) -> CellSpec {
    let cfg = ExperimentConfig {
        pairs: vec![pair.parse().unwrap()],
        targets: vec![s],
        controls: vec![control],
        n_reps: reps,
        ..ExperimentConfig::default()
    };
    cfg.cells().into_iter().find(|c| c.gamma == gamma).expect("gamma in the standard grid")
}

fn stationary_oracle() -> Outcome {
    let (reps, horizon) = (200, 5000.0);
    let mut c = cell("EXP/EXP", ControlChoice::Const(2.0), 0.01, 1.0, reps);
    c.arrival_rate = ArrivalRateConfig { a: 1.0, b: 0.0 };
    c.horizon = horizon;
    c.epoch_spacing = Some(5.0);
    let r = harness::run_cell(&c)?.report.spatial_average;

    let exp = c.pair.arrival.sampler();
    let lambda = CumulativeRate::new(RateFunction::constant(1.0)?);
    let mu = CumulativeRate::new(RateFunction::constant(2.0)?);
    let mut q = 0.0;
    for rep in 0..reps as u64 {
        let mut rng = RandomStream::new(c.master_seed, rep, Purpose::Arrivals);
        let s = arrivals::generate(&exp, &lambda, horizon, FirstArrival::Inverted, &mut rng)?;
        let mut rng = RandomStream::new(c.master_seed, rep, Purpose::JobSizes);
        let s = arrivals::attach_sizes(s, &exp, &mut rng);
        q += engine::run(s, &mu, horizon, &[])?.time_average_queue(0.1 * horizon, horizon)?;
    }
    let q = q / reps as f64;
    Ok((
        (r - 1.0).abs() <= 0.03 && (q - 1.0).abs() <= 0.03,
        format!("mean virtual response {r:.4}, time-average Q {q:.4} (exact 1, tol 0.03)"),
    ))
}

fn lambda_grid() -> Vec<f64> {
    let rate = RateFunction::sinusoidal(1.0, 0.2, 0.01).unwrap();
    let period = rate.period().unwrap();
    (0..10_000).map(|i| rate.rate(period * i as f64 / 1e4)).collect()
}

fn unit_scv_coincidence() -> Outcome {
    let pair: PairSpec = "EXP/EXP".parse()?;
    let grid = lambda_grid();
    let gap = [0.1, 10.0]
        .iter()
        .map(|&s| verify::max_control_gap(&pair, s, &grid, false))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((gap <= 1e-12, format!("max |mu_sr - mu_dm| = {gap:.2e} on 10^4 points")))
}

fn heavy_traffic_coincidence() -> Outcome {
    let grid = lambda_grid();
    let mut ok = true;
    let mut detail = Vec::new();
    for pair in PairSpec::standard_pairs() {
        let gaps = [1e2, 1e3, 1e4]
            .iter()
            .map(|&s| verify::max_control_gap(&pair, s, &grid, true))
            .collect::<Result<Vec<_>, _>>()?;
        // identical controls have a zero gap at every s
        let decreasing = gaps.iter().all(|&g| g == 0.0) || gaps.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing && gaps[2] <= 1e-3;
        detail.push(format!("{} {:.1e}>{:.1e}>{:.1e}", pair.name, gaps[0], gaps[1], gaps[2]));
    }
    Ok((ok, detail.join("; ")))
}

fn variability_table() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, fcfs, ps) in verify::VARIABILITY_TABLE {
        let pair: PairSpec = name.parse()?;
        let (vf, vp) = controls::variability_factors(pair.arrival.scv(), pair.jobsize.scv());
        let row = matches_printed(vf, fcfs) && matches_printed(vp, ps);
        ok &= row;
        detail.push(format!("{name} ({vf:.4},{vp:.4}) vs ({fcfs},{ps})"));
    }
    Ok((ok, detail.join("; ")))
}

fn light_traffic_table() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, mu_printed, r_printed) in verify::LIGHT_TRAFFIC_TABLE {
        let pair: PairSpec = name.parse()?;
        let spec = ControlSpec::new(ControlKind::DifferenceMatching, 0.1, 1.0, pair.arrival.scv(), pair.jobsize.scv())?;
        let (_, mu) = spec.light_traffic_constants();
        let r = spec.beta() / mu;
        ok &= matches_printed(mu, mu_printed) && matches_printed(r, r_printed);
        detail.push(format!("{name} mu {mu:.4} R {r:.4}"));
    }
    Ok((ok, detail.join("; ")))
}

fn arrival_count_mean() -> Outcome {
    let base = DistributionSpec::erlang(1.0, 0.5)?.sampler();
    let lambda = CumulativeRate::new(RateFunction::sinusoidal(1.0, 0.2, 0.01)?);
    let checkpoints = [500.0, 1000.0, 2000.0];
    let streams = 2000u64;
    let mut counts = vec![Vec::new(); checkpoints.len()];
    for rep in 0..streams {
        let mut rng = RandomStream::new(99, rep, Purpose::Arrivals);
        let s = arrivals::generate(&base, &lambda, 2000.0, FirstArrival::Inverted, &mut rng)?;
        for (c, &t) in counts.iter_mut().zip(&checkpoints) {
            c.push(s.count_until(t) as f64);
        }
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for (c, &t) in counts.iter().zip(&checkpoints) {
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let se = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let exact = lambda.value(t);
        let z = (mean - exact) / se;
        ok &= z.abs() <= 3.0;
        detail.push(format!("t={t}: {mean:.2} vs {exact:.2} ({z:+.2} se)"));
    }
    Ok((ok, detail.join("; ")))
}

fn sr_light_traffic() -> Outcome {
    let r = harness::run_cell(&cell("ER/ER", ControlChoice::Sr, 0.01, 0.1, 500))?.report;
    Ok((
        r.ra_percent <= 10.0 && r.rg_percent.abs() <= 5.0,
        format!("average {:.4}, RA {:.2}%, RG {:.2}%", r.spatial_average, r.ra_percent, r.rg_percent),
    ))
}

fn dm_light_traffic() -> Outcome {
    let r = harness::run_cell(&cell("ER/ER", ControlChoice::Dm, 0.001, 0.1, 500))?.report;
    Ok((
        (0.13..=0.17).contains(&r.spatial_average),
        format!("average {:.4} (expected near 0.15), RA {:.2}%", r.spatial_average, r.ra_percent),
    ))
}

fn heavy_traffic_ordering() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for pair in ["ER/ER", "LN/LN"] {
        let sr = harness::run_cell(&cell(pair, ControlChoice::Sr, 0.001, 10.0, 500))?.report;
        let dm = harness::run_cell(&cell(pair, ControlChoice::Dm, 0.001, 10.0, 500))?.report;
        ok &= dm.rg_percent.abs() < sr.rg_percent.abs();
        detail.push(format!("{pair} RG dm {:.2}% sr {:.2}%", dm.rg_percent, sr.rg_percent));
    }
    Ok((ok, detail.join("; ")))
}

fn engine_vs_brute_force() -> Outcome {
    let rate = RateFunction::sinusoidal(1.0, 0.5, 2.0)?;
    let mu = CumulativeRate::new(rate.clone());
    let mut rng = RandomStream::from_seed(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let jobs = random_jobs(&mut rng, 10);
        let path = run_to_completion(&jobs, &mu);
        for (id, expected) in brute_force_departures(&jobs, &rate, 1e-4).into_iter().enumerate() {
            let got = path.departures[id].unwrap_or(f64::INFINITY);
            worst = worst.max((got - expected).abs());
        }
    }
    Ok((worst <= 1e-3, format!("max departure difference {worst:.2e} over 20 instances")))
}

fn determinism() -> Outcome {
    let c = cell("LN/ER", ControlChoice::Sr, 0.1, 10.0, 20);
    let dir = tempfile::tempdir().map_err(|e| tvps_sim::Error::Config(e.to_string()))?;
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    harness::run_cell(&c)?.write_series_csv(&a)?;
    harness::run_cell(&c)?.write_series_csv(&b)?;
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    Ok((x == y && !x.is_empty(), format!("{} bytes, identical: {}", x.len(), x == y)))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("stationary M/M/1/PS oracle", stationary_oracle),
        ("controls coincide for unit scv", unit_scv_coincidence),
        ("controls coincide as s grows", heavy_traffic_coincidence),
        ("variability factor table", variability_table),
        ("light-traffic constants table", light_traffic_table),
        ("mean arrival count equals cumulative rate", arrival_count_mean),
        ("SR light-traffic stabilization", sr_light_traffic),
        ("DM light-traffic miss near 0.15", dm_light_traffic),
        ("DM more accurate in heavy traffic", heavy_traffic_ordering),
        ("engine matches brute-force integrator", engine_vs_brute_force),
        ("byte-identical reruns", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(outcome) => outcome,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
