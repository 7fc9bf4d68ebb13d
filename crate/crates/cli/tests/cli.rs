use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn cocwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cocwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn fixed_point_writes_field_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fp.csv");
    let cfg = config("exp_left.json");
    let o = cocwave(&[
        "--config",
        cfg.to_str().unwrap(),
        "fixed-point",
        "--v",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let field = cocwave::field::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert!((field.eval(0.0) - 0.25).abs() < 1e-3);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fp.json")).unwrap())
            .unwrap();
    for key in ["v", "classification", "load", "residual", "beta"] {
        assert!(side.get(key).is_some(), "missing {key}");
    }
    assert_eq!(side["v"], 4.0);
    assert_eq!(side["classification"]["kind"], "LEFT_REGULATED");
}

#[test]
fn simulate_header_and_rows() {
    let cfg = config("exp_left.json");
    let o = cocwave(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "simulate",
        "--n",
        "50",
        "--horizon",
        "10",
        "--every",
        "1",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("t,quantile_05,quantile_50,quantile_95,mean,phi1,busy_fraction")
    );
    assert_eq!(lines.count(), 11);
    // same seed, same bytes
    let again = cocwave(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "simulate",
        "--n",
        "50",
        "--horizon",
        "10",
        "--every",
        "1",
    ]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn exit_code_follows_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("exp_left.json");
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "ssai-left",
        "--n",
        "50,200",
        "--horizon",
        "100",
    ];
    let o = cocwave(&base);
    assert!(o.status.success(), "{}{}", text(&o.stdout), text(&o.stderr));
    assert!(text(&o.stdout).lines().all(|l| l.starts_with("PASS")));
    // an unreachable distance fails the run, not the program
    let mut strict = base.to_vec();
    strict.extend(["--levy-tol", "1e-9"]);
    let o = cocwave(&strict);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stdout).contains("FAIL levy_final_v2"));
    assert!(std::fs::read_dir(dir.path()).unwrap().count() >= 3);
}

#[test]
fn errors_exit_with_two() {
    let o = cocwave(&["speed-range"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("--config"));

    let cfg = config("exp_left.json");
    let o = cocwave(&[
        "--config",
        cfg.to_str().unwrap(),
        "ssai-left",
        "--n",
        "100",
        "--horizon",
        "10",
        "--v",
        "0.9",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("wave"), "{}", text(&o.stderr));
}

#[test]
fn dmono_check_deterministic_sizes() {
    let cfg = config("det_free.json");
    let o = cocwave(&[
        "--config",
        cfg.to_str().unwrap(),
        "dmono-check",
        "--gaps",
        "0;0.5;2",
        "--samples",
        "2000",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let json_end = out.rfind('}').unwrap();
    let rep: serde_json::Value = serde_json::from_str(&out[..=json_end]).unwrap();
    let etas: Vec<f64> = rep["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["eta"]["mean"].as_f64().unwrap())
        .collect();
    assert_eq!(etas, vec![2.0, 1.5, 1.0]);
}

#[test]
fn h_eval_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let fp = dir.path().join("fp.csv");
    let cfg = config("exp_left.json");
    let c = cfg.to_str().unwrap();
    assert!(
        cocwave(&["--config", c, "fixed-point", "--out", fp.to_str().unwrap()])
            .status
            .success()
    );
    let o = cocwave(&[
        "--config",
        c,
        "h-eval",
        "--field",
        fp.to_str().unwrap(),
        "--w",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let x = cocwave::field::read_csv(std::fs::File::open(&fp).unwrap()).unwrap();
    let sys = cocwave::SystemConfig::from_json(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let h = cocwave::meanfield::compute_h(&x, 0.5, &sys).unwrap();
    assert_eq!(row[1].parse::<f64>().unwrap(), h);
}
