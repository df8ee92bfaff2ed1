use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use system3::env::{EnvSpec, GridLayout, GridRewards};
use system3::trainer::{System3Config, Trainer};
use system3_harness::metrics::{Table, HEADER};
use system3_harness::run::{parse_value_grid_csv, value_grid};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn system3(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_system3"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn constraint(name: &str) -> String {
    repo().join("constraints").join(name).to_string_lossy().into_owned()
}

fn last_checkpoint(seed_dir: &Path) -> PathBuf {
    let mut files: Vec<PathBuf> = std::fs::read_dir(seed_dir.join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.pop().unwrap()
}

#[test]
fn cartpole_run_writes_one_metrics_file_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let c = constraint("cartpole.fl");
    let out = system3(
        &[
            "train", "--env", "cartpole", "--constraint", &c, "--seeds", "0,1,2", "--steps", "960", "--eval-every",
            "480", "--eval-horizon", "200", "--rollout-length", "20", "--batch-size", "8", "--out", "run",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for seed in 0..3 {
        let dir = tmp.path().join(format!("run/seed-{seed}"));
        let text = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        assert!(text.starts_with(HEADER));
        let table = Table::parse(&text).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.skipped, 0);
        assert_eq!(std::fs::read_dir(dir.join("checkpoints")).unwrap().count(), 2);
    }
    let snapshot = std::fs::read_to_string(tmp.path().join("run/config.txt")).unwrap();
    assert!(snapshot.starts_with("# system3 "));
    assert!(snapshot.contains("seeds = 0,1,2"));
}

#[test]
fn eval_of_a_checkpoint_reproduces_the_training_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let c = constraint("grid_lb1.fl");
    let out = system3(
        &[
            "train", "--config", &repo().join("configs/puddle_system3.conf").to_string_lossy(), "--constraint", &c,
            "--seeds", "5", "--steps", "1600", "--eval-every", "800", "--out", "run",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let seed_dir = tmp.path().join("run/seed-5");
    let ckpt = last_checkpoint(&seed_dir);
    let eval = system3(&["eval", "--checkpoint", &ckpt.to_string_lossy()], tmp.path());
    assert!(eval.status.success(), "{}", stderr(&eval));

    let train_rows = Table::parse(&std::fs::read_to_string(seed_dir.join("metrics.csv")).unwrap()).unwrap();
    let eval_rows = Table::parse(&std::fs::read_to_string(seed_dir.join("eval.csv")).unwrap()).unwrap();
    let last = train_rows.rows.last().unwrap();
    for col in ["steps", "eval_return", "satisfaction_rate", "violations", "eval_episodes", "goal_fraction"] {
        let i = train_rows.column_index(col).unwrap();
        assert_eq!(eval_rows.rows[0][i], last[i], "{col}");
    }

    // a different formula changes the score; a tautology is always satisfied
    let taut = constraint("grid_lb0.fl");
    let eval = system3(&["eval", "--checkpoint", &ckpt.to_string_lossy(), "--constraint", &taut], tmp.path());
    assert!(eval.status.success());
    let stdout = String::from_utf8_lossy(&eval.stdout).into_owned();
    let table = Table::parse(&stdout).unwrap();
    assert_eq!(table.rows[0][table.column_index("satisfaction_rate").unwrap()], Some(1.0));

    let zero = system3(&["eval", "--checkpoint", &ckpt.to_string_lossy(), "--horizon", "0"], tmp.path());
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = system3(&["train", "--constraint", "missing.fl", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("constraint file not found: missing.fl"), "{}", stderr(&out));

    let out = system3(&["train", "--gamma", "1.5", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = system3(&["train", "--no-such-key", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(tmp.path().join("bad.fl"), "forall u in unsafe: 1 <= norm2(s - u) and").unwrap();
    let out = system3(&["check-constraint", "bad.fl"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.fl"));
    let out = system3(&["check-constraint", &constraint("grid_lb1.fl")], tmp.path());
    assert!(out.status.success());
}

#[test]
fn divergence_keeps_partial_artifacts_and_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = system3(
        &[
            "train", "--env", "cartpole", "--constraint", "none", "--learning-rate", "1e300", "--optimizer", "sgd",
            "--steps", "16000", "--eval-every", "160", "--rollout-length", "20", "--batch-size", "8", "--out", "run",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let metrics = tmp.path().join("run/seed-0/metrics.csv");
    assert!(std::fs::read_to_string(metrics).unwrap().starts_with(HEADER));
}

#[test]
fn corrupt_checkpoints_are_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("x.ckpt"), "not a checkpoint\n").unwrap();
    let out = system3(&["eval", "--checkpoint", "x.ckpt"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn value_grid_exports_round_trip_and_reject_cartpole() {
    let tmp = tempfile::tempdir().unwrap();
    let t = Trainer::new(
        System3Config::default(),
        EnvSpec::grid(GridLayout::bridge(), GridRewards::default()),
        None,
        0,
    )
    .unwrap();
    let ckpt = tmp.path().join("fresh.ckpt");
    std::fs::write(&ckpt, t.save()).unwrap();
    let values = value_grid(&ckpt).unwrap();
    assert_eq!((values.len(), values[0].len()), (20, 20));
    assert!(values.iter().flatten().all(|v| *v == 0.0));

    let out = system3(&["value-grid", "--checkpoint", "fresh.ckpt", "--out", "vg"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("vg/value_grid.csv")).unwrap();
    assert_eq!(parse_value_grid_csv(&csv).unwrap(), values);
    assert!(tmp.path().join("vg/value_grid.svg").exists());

    let cp = Trainer::new(System3Config::default(), EnvSpec::cartpole(1), None, 0).unwrap();
    std::fs::write(tmp.path().join("cp.ckpt"), cp.save()).unwrap();
    let out = system3(&["value-grid", "--checkpoint", "cp.ckpt", "--out", "vg2"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_counts_malformed_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let good = "0,1,160,5,0.9,100,3,,1,0.5,0.1,0.2,0.3,0.4,1.5";
    let text = format!("{HEADER}\n{good}\n1,2,oops\n{}\n", good.replace(",160,", ",320,"));
    std::fs::write(tmp.path().join("m.csv"), &text).unwrap();
    let out = system3(&["plot", "a=m.csv", "--out", "plots"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("skipped 1 malformed rows"));
    assert!(tmp.path().join("plots/violations.svg").exists());
    // raw data untouched
    assert_eq!(std::fs::read_to_string(tmp.path().join("m.csv")).unwrap(), text);
}
