use std::fs;

use cocwave::field::read_csv;
use cocwave::harness::*;
use cocwave::*;

fn exp_pair(frame: Frame, v: f64) -> SystemConfig {
    SystemConfig::new(
        vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
        frame,
        v,
    )
}

fn small_vn(workers: Option<usize>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(ExperimentKind::VnConvergence, exp_pair(Frame::FREE, 0.0));
    s.n_list = vec![10, 30];
    s.horizons = vec![200.0];
    s.replicas = 3;
    s.seed = 41;
    s.workers = workers;
    s
}

#[test]
fn spec_validation() {
    let mut s = small_vn(None);
    assert!(s.validate().is_ok());
    s.replicas = 0;
    assert_eq!(s.validate().unwrap_err().code(), ErrorCode::ParamRange);
    let mut s = small_vn(None);
    s.n_list = vec![30, 10];
    assert!(s.validate().is_err());
    let mut s = small_vn(None);
    s.horizons = vec![1.0, 2.0, 3.0];
    assert!(s.validate().is_err());
}

#[test]
fn spec_json_round_trip_and_defaults() {
    let s = small_vn(Some(2));
    let back = ExperimentSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(s, back);

    let cfg = exp_pair(Frame::left(0.0), 2.0).to_json().unwrap();
    let text = format!(
        r#"{{"kind": "ssai_left", "config": {cfg}, "n_list": [100], "horizons": [10], "replicas": 1, "seed": 5}}"#
    );
    let s = ExperimentSpec::from_json(&text).unwrap();
    assert_eq!(s.kind, ExperimentKind::SsaiLeft);
    assert_eq!(s.nu, 0.5);
    assert!(matches!(s.config, ConfigSource::Inline(_)));
    assert!(
        ExperimentSpec::from_json(&text.replace("\"replicas\": 1", "\"replicas\": 0")).is_err()
    );
}

#[test]
fn config_from_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let cfg = exp_pair(Frame::FREE, 0.0);
    fs::write(&path, cfg.to_json().unwrap()).unwrap();
    assert_eq!(ConfigSource::Path(path).load().unwrap(), cfg);
    let missing = ConfigSource::Path(dir.path().join("none.json"));
    assert_eq!(missing.load().unwrap_err().code(), ErrorCode::Io);
}

#[test]
fn emitted_files_read_back() {
    let mut s = ExperimentSpec::new(ExperimentKind::SpeedRangeReport, exp_pair(Frame::FREE, 0.0));
    s.seed = 2;
    let rep = run_experiment(&s).unwrap();
    assert!(rep.passed());
    assert!(!rep.fields.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&rep, dir.path()).unwrap();
    assert_eq!(files.len(), 2 + rep.fields.len());
    let stem = rep.stem();
    assert!(stem.starts_with("speed_range_report_") && stem.ends_with("_2"));

    // cells, report and fields
    assert_eq!(read_cells(&files[0]).unwrap(), rep.cells);
    assert_eq!(read_report(&files[1]).unwrap(), rep);
    let f = read_csv(fs::File::open(&files[2]).unwrap()).unwrap();
    assert_eq!(f, rep.fields[0].field);
}

#[test]
fn same_seed_gives_identical_files() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = emit(&run_experiment(&small_vn(None)).unwrap(), dirs[0].path()).unwrap();
    let b = emit(&run_experiment(&small_vn(Some(3))).unwrap(), dirs[1].path()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let mut other = small_vn(None);
    other.seed = 42;
    let c = run_experiment(&other).unwrap();
    assert_ne!(c.cells, read_report(&a[1]).unwrap().cells);
}

#[test]
fn regulated_runs_refuse_wave_speeds() {
    let mut s = ExperimentSpec::new(ExperimentKind::SsaiLeft, exp_pair(Frame::left(0.0), 0.8));
    s.n_list = vec![100];
    s.horizons = vec![10.0];
    assert_eq!(
        run_experiment(&s).unwrap_err().code(),
        ErrorCode::SpeedInWaveRange
    );

    let mut s = ExperimentSpec::new(ExperimentKind::SsaiRight, exp_pair(Frame::right(0.0), 1.5));
    s.n_list = vec![100];
    s.horizons = vec![10.0];
    assert_eq!(
        run_experiment(&s).unwrap_err().code(),
        ErrorCode::SpeedInWaveRange
    );

    // wrong frame
    s.kind = ExperimentKind::SsaiLeft;
    assert_eq!(
        run_experiment(&s).unwrap_err().code(),
        ErrorCode::ParamRange
    );
}

#[test]
fn load_curve_reports_solver_references() {
    let mut s = ExperimentSpec::new(ExperimentKind::LoadCurve, exp_pair(Frame::left(0.0), 2.0));
    s.speeds = vec![2.0, 4.0];
    s.n_list = vec![200];
    s.horizons = vec![300.0];
    s.seed = 9;
    let rep = run_experiment(&s).unwrap();
    let loads: Vec<f64> = rep
        .cells
        .iter()
        .filter(|c| c.metric == "load")
        .map(|c| c.estimate)
        .collect();
    assert_eq!(loads.len(), 2);
    assert!((loads[0] - 0.5).abs() < 1e-3 && (loads[1] - 0.25).abs() < 1e-3);
    for c in rep.cells.iter().filter(|c| c.metric == "busy_fraction") {
        assert!(c.reference.is_some() && c.half_width.is_some());
    }
    assert!(rep
        .assertions
        .iter()
        .any(|a| a.name == "load_strictly_decreasing" && a.passed));
}
