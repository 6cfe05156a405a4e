use std::path::Path;

use tvps_sim::harness::{self, ArrivalRateConfig, ControlChoice, ExperimentConfig};
use tvps_sim::Error;

fn small_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        pairs: vec!["ER/LN".parse().unwrap()],
        gammas: vec![0.1],
        horizons: vec![200.0],
        targets: vec![0.1, 10.0],
        controls: vec![ControlChoice::Sr, ControlChoice::Dm],
        n_reps: 4,
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn cell(pair: &str, control: ControlChoice, gamma: f64, horizon: f64, s: f64, reps: usize) -> harness::CellSpec {
    let cfg = ExperimentConfig {
        pairs: vec![pair.parse().unwrap()],
        gammas: vec![gamma],
        horizons: vec![horizon],
        targets: vec![s],
        controls: vec![control],
        n_reps: reps,
        ..ExperimentConfig::default()
    };
    cfg.cells().remove(0)
}

#[test]
fn unit_scv_controls_give_identical_series() {
    let sr = harness::run_cell(&cell("EXP/EXP", ControlChoice::Sr, 0.01, 2000.0, 0.1, 500)).unwrap();
    let dm = harness::run_cell(&cell("EXP/EXP", ControlChoice::Dm, 0.01, 2000.0, 0.1, 500)).unwrap();
    assert_eq!(sr.response.mean, dm.response.mean);
    assert_eq!(sr.queue.mean, dm.queue.mean);
    assert!(sr.report.rg_percent.abs() <= 5.0, "RG {}", sr.report.rg_percent);
}

#[test]
fn unit_scv_light_traffic_is_flat() {
    // E[R(t)] is exactly 0.1 here, so RA only measures sampling noise: about
    // 11% at 500 replications, half that at 2000
    let r = harness::run_cell(&cell("EXP/EXP", ControlChoice::Sr, 0.01, 2000.0, 0.1, 2000)).unwrap();
    assert!(r.report.ra_percent <= 10.0, "RA {}", r.report.ra_percent);
    assert!(r.report.rg_percent.abs() <= 1.0, "RG {}", r.report.rg_percent);
}

#[test]
fn heavy_traffic_dm_is_closer_to_target() {
    let sr = harness::run_cell(&cell("ER/ER", ControlChoice::Sr, 0.01, 2000.0, 10.0, 200)).unwrap();
    let dm = harness::run_cell(&cell("ER/ER", ControlChoice::Dm, 0.01, 2000.0, 10.0, 200)).unwrap();
    assert!(
        (dm.report.spatial_average - 10.0).abs() < (sr.report.spatial_average - 10.0).abs(),
        "DM {} SR {}",
        dm.report.spatial_average,
        sr.report.spatial_average
    );
}

#[test]
fn constant_control_on_constant_arrivals_is_mm1_ps() {
    let mut c = cell("EXP/EXP", ControlChoice::Const(2.0), 1.0, 2000.0, 1.0, 200);
    c.arrival_rate = ArrivalRateConfig { a: 1.0, b: 0.0 };
    c.epoch_spacing = Some(5.0);
    let r = harness::run_cell(&c).unwrap();
    assert!((r.report.spatial_average - 1.0).abs() < 0.05, "average {}", r.report.spatial_average);
    assert!(r.lambda.iter().all(|&l| l == 1.0));
}

#[test]
fn standard_grid_has_sixty_cells() {
    assert_eq!(ExperimentConfig::default().cells().len(), 60);
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        pairs: vec![],
        ..small_config(dir.path())
    };
    let summary = harness::run_all(&cfg).unwrap();
    assert!(summary.results.is_empty());
    let report = std::fs::read_to_string(&summary.report_path).unwrap();
    assert_eq!(report, format!("{}\n", harness::REPORT_HEADER));
    assert!(summary.manifest_path.exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = harness::run_all(&small_config(a.path())).unwrap();
    harness::run_all(&small_config(b.path())).unwrap();
    assert_eq!(sa.results.len(), 4);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4 + 2);
    for name in names {
        if name == "manifest.json" {
            continue;
        }
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
    let report = std::fs::read_to_string(&sa.report_path).unwrap();
    assert_eq!(report.lines().count(), 5);
    assert!(report.lines().nth(1).unwrap().starts_with("ER/LN,sr,0.1,0.1,"));
    let series = std::fs::read_to_string(a.path().join("series_ER-LN_dm_g0.1_s10.csv")).unwrap();
    assert!(series.starts_with("t,mean_q,q_lo95,q_hi95,mean_r,r_lo95,r_hi95,lambda\n"));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let c = cell("LN/ER", ControlChoice::Sr, 0.1, 200.0, 10.0, 6);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| harness::run_cell(&c)).unwrap();
    let b = three.install(|| harness::run_cell(&c)).unwrap();
    assert_eq!(a.response.mean, b.response.mean);
    assert_eq!(a.queue.ci_half, b.queue.ci_half);
}

#[test]
fn manifest_reproduces_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let summary = harness::run_all(&cfg).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary.manifest_path).unwrap()).unwrap();
    let stored = toml::to_string(&manifest["config"]).unwrap();
    let back = ExperimentConfig::from_toml(&stored).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn infeasible_and_invalid_cells_are_errors() {
    let c = cell("EXP/EXP", ControlChoice::Sr, 0.1, 200.0, 0.1, 1);
    assert!(matches!(harness::run_cell(&c), Err(Error::TooFewReplications(1))));
    let mut c = cell("EXP/EXP", ControlChoice::Sr, 0.1, 200.0, 0.1, 2);
    c.arrival_rate = ArrivalRateConfig { a: 1.0, b: 1.5 };
    assert!(harness::run_cell(&c).is_err());
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let grid = ExperimentConfig::load(&dir.join("grid.toml")).unwrap();
    assert_eq!(grid.cells().len(), 60);
    assert_eq!(grid, ExperimentConfig { output_dir: "out/grid".into(), ..ExperimentConfig::default() });
    let mm1 = ExperimentConfig::load(&dir.join("mm1_ps.toml")).unwrap();
    assert_eq!(mm1.cells()[0].period(), None);
}
