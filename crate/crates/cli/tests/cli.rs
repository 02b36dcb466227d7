use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wprox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The ring config shrunk to a few cheap iterations.
fn small_ring(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("ring.toml"))
        .unwrap()
        .replace("batch = 2000", "batch = 200")
        .replace("eval_every = 50", "eval_every = 2");
    let path = dir.join("ring_small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn toy_example_writes_the_grid() {
    let out = wprox(&["toy-example1", "--alpha", "0.2", "--grid", "5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("a,b,F,euclid_dx,euclid_dy,wass_dx,wass_dy")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 25);
    assert!(rows
        .iter()
        .all(|r| r.len() == 7 && r.iter().all(|v| v.is_finite())));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let svg = dir.path().join("toy.svg");
    let out = wprox(&[
        "toy-example1",
        "--output",
        path_str(&csv),
        "--svg",
        path_str(&svg),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 442);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn invalid_arguments_exit_with_two() {
    let out = wprox(&["toy-example1", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("alpha"));
    assert_eq!(wprox(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\noutput_dir = \"out\"\nseeds = [1, 2\n").unwrap();
    let out = wprox(&["flow", "--config", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let text = std::fs::read_to_string(configs().join("gaussian_flow.toml"))
        .unwrap()
        .replace("steps = 50", "steps = 50\nbogus = 1");
    std::fs::write(&path, text).unwrap();
    let out = wprox(&["flow", "--config", path_str(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn flow_writes_trajectory_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("gaussian_flow.toml");
    let out = wprox(&[
        "flow",
        "--config",
        path_str(&config),
        "--output",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("final F "));
    let csv = std::fs::read_to_string(dir.path().join("gaussian-flow_flow.csv")).unwrap();
    assert!(csv.starts_with("outer_iter,inner_iter,F,penalty,step_norm,wallclock_s\n"));
    let last_f: f64 = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last_f < 1e-3);
    assert!(dir.path().join("gaussian-flow_flow.snapshot").exists());
}

#[test]
fn diverging_flow_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("gaussian_flow.toml"))
        .unwrap()
        .replace("lr = 0.05", "lr = 5.0");
    let path = dir.path().join("diverge.toml");
    std::fs::write(&path, text).unwrap();
    let out = wprox(&[
        "flow",
        "--config",
        path_str(&path),
        "--output",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

fn write_snapshot(dir: &Path, name: &str, mu: f64, sigma: f64) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "# wprox-snapshot v1\n# generator {{\"architecture\":{{\"kind\":\"location-scale\"}},\"latent_dim\":1,\"output_dim\":1}}\n# slice mu 0 1\n# slice sigma 1 1\n{mu}\n{sigma}\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn metric_between_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_snapshot(dir.path(), "a.snapshot", 0.0, 1.0);
    let b = write_snapshot(dir.path(), "b.snapshot", 1.0, 2.0);
    let value = |kind: &str, extra: &[&str]| -> f64 {
        let mut args = vec![
            "metric",
            "--kind",
            kind,
            "--snapshot",
            path_str(&a),
            "--snapshot",
            path_str(&b),
            "--batch",
            "20000",
        ];
        args.extend_from_slice(extra);
        let out = wprox(&args);
        assert!(out.status.success(), "{kind}: {}", stderr(&out));
        stdout(&out).trim().parse().unwrap()
    };
    // Δμ = −1, Δσ = −1: the exact and relaxed penalties are close to
    // W₂² = 2 on a large batch; the linear one only sees the mean shift.
    for kind in ["rwp", "exact1d"] {
        let v = value(kind, &[]);
        assert!((v - 2.0).abs() < 0.1, "{kind}: {v}");
    }
    let mid = value("o2diag", &["--midpoint", "average"]);
    assert!((mid - 2.0).abs() < 0.1, "{mid}");
    assert!((value("o1sbe", &[]) - 1.0).abs() < 0.05);
    assert!((value("affine1", &["--damping", "0"]) - value("o1sbe", &[])).abs() < 1e-9);

    let one = wprox(&["metric", "--kind", "rwp", "--snapshot", path_str(&a)]);
    assert_eq!(one.status.code(), Some(2));
    let unknown = wprox(&[
        "metric",
        "--kind",
        "w7",
        "--snapshot",
        path_str(&a),
        "--snapshot",
        path_str(&b),
    ]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn train_sweep_writes_logs_snapshots_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_ring(dir.path());
    let out_dir = dir.path().join("runs");
    let out = wprox(&[
        "train",
        "--config",
        path_str(&config),
        "--penalty",
        "rwp,none",
        "--seeds",
        "2",
        "--outer-iters",
        "4",
        "--output",
        path_str(&out_dir),
        "--plot",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for penalty in ["rwp", "none"] {
        for seed in 0..2 {
            let stem = format!("ring_{penalty}_seed{seed}");
            let csv = std::fs::read_to_string(out_dir.join(format!("{stem}.csv"))).unwrap();
            assert!(
                csv.starts_with("outer_iter,disc_loss,gen_loss,penalty,eval_metric,wallclock_s\n")
            );
            assert_eq!(csv.lines().count(), 5);
            assert!(out_dir.join(format!("{stem}.snapshot")).exists());
        }
    }
    for plot in [
        "ring_envelope.svg",
        "ring_toy_example1.svg",
        "ring_toy_example1.csv",
    ] {
        assert!(out_dir.join(plot).exists(), "{plot}");
    }

    let snapshot = out_dir.join("ring_rwp_seed0.snapshot");
    let out = wprox(&[
        "eval",
        "--config",
        path_str(&config),
        "--snapshot",
        path_str(&snapshot),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let (label, value) = text.trim().split_once(' ').unwrap();
    assert_eq!(label, "FGD");
    assert!(value.parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let config = configs().join("gaussian_flow.toml");
    let out = wprox(&[
        "flow",
        "--config",
        path_str(&config),
        "--output",
        path_str(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
