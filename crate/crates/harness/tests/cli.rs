use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use glnn_core::synthetic::PlantedPartition;

fn write_toy(dir: &Path, nodes: usize) {
    let ds = PlantedPartition {
        nodes,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let mut content = String::new();
    for i in 0..ds.num_nodes() {
        content.push_str(&format!("n{i}"));
        for &v in ds.x.row(i) {
            content.push_str(if v == 0.0 { "\t0" } else { "\t1" });
        }
        content.push_str(&format!("\t{}\n", ds.class_names[ds.labels[i]]));
    }
    let mut cites: String = ds
        .gt
        .as_ref()
        .unwrap()
        .edges
        .iter()
        .map(|(u, v)| format!("n{u}\tn{v}\n"))
        .collect();
    cites.push_str("n0\tghost\n");
    fs::write(dir.join("toy.content"), content).unwrap();
    fs::write(dir.join("toy.cites"), cites).unwrap();
}

fn glnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

const TOY: &[&str] = &[
    "--content",
    "toy.content",
    "--cites",
    "toy.cites",
    "--split",
    "counts",
    "--train",
    "8",
    "--val",
    "4",
    "--test",
    "10",
];

fn with<'a>(verb: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![verb];
    v.extend_from_slice(TOY);
    v.extend_from_slice(extra);
    v
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 30);
    fs::write(dir.path().join("exp.conf"), "# toy run\nepochs = 3\nrepeats = 2\nout = from_file\n").unwrap();
    let out = glnn(dir.path(), &with("train", &["--config", "exp.conf", "--epochs", "4"]));
    assert_ok(&out);
    let csv = fs::read_to_string(dir.path().join("from_file/run_1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with(
        "epoch,glr,sparsity,properties,gt,cross_entropy,total,train_acc,val_acc,test_acc,gt_rel_frob\n"
    ));
    assert!(String::from_utf8_lossy(&out.stdout).contains("test accuracy"));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 30);
    for out in ["a", "b"] {
        assert_ok(&glnn(dir.path(), &with("train", &["--epochs", "20", "--seed", "3", "--out", out])));
    }
    for name in ["run_3.csv", "run_3.ckpt", "run_3_epoch15.pgm", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn divergence_gives_a_failing_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 30);
    let out = glnn(dir.path(), &with("train", &["--epochs", "3", "--lambda1", "1e308"]));
    assert!(!out.status.success());
    let marker = fs::read_to_string(dir.path().join("runs/run_0.failed")).unwrap();
    assert!(marker.contains("epoch 1"), "{marker}");
    assert!(dir.path().join("runs/summary.json").is_file());
}

#[test]
fn bad_settings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 30);
    assert!(!glnn(dir.path(), &with("train", &["--epochs", "zero"])).status.success());
    assert!(!glnn(dir.path(), &with("train", &["--set", "colour=red"])).status.success());
    let missing = glnn(dir.path(), &["train", "--dataset", "cora", "--data-dir", "nowhere"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not found"));
}

#[test]
fn eval_and_heatmap_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 40);
    assert_ok(&glnn(dir.path(), &with("train", &["--epochs", "10", "--seed", "2"])));
    let eval = glnn(dir.path(), &with("eval", &["--checkpoint", "runs/run_2.ckpt", "--seed", "2"]));
    assert_ok(&eval);
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("runs/summary.json")).unwrap()).unwrap();
    assert_eq!(report["test_acc"], summary["runs"][0]["test_acc"]);

    assert_ok(&glnn(dir.path(), &["heatmap", "--checkpoint", "runs/run_2.ckpt", "--output", "a.pgm"]));
    let img = fs::read(dir.path().join("a.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n30 30\n255\n"));
    assert_eq!(img.len(), 13 + 900);

    assert_ok(&glnn(dir.path(), &with("heatmap", &["--output", "gt.pgm", "--heatmap-size", "40"])));
    let img = fs::read(dir.path().join("gt.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n40 40\n255\n"));
    assert_eq!(img.len(), 13 + 1600);

    let outside = glnn(dir.path(), &with("heatmap", &["--output", "x.pgm", "--heatmap-row0", "20"]));
    assert!(!outside.status.success());
}

#[test]
fn cache_conversion_preserves_results() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 30);
    let convert = glnn(dir.path(), &with("convert-cache", &["--output", "toy.glnn"]));
    assert_ok(&convert);
    assert!(String::from_utf8_lossy(&convert.stdout).contains("1 dropped"));
    assert_ok(&glnn(dir.path(), &with("train", &["--epochs", "5", "--out", "text"])));
    let cached = [
        "train", "--cache", "toy.glnn", "--split", "counts", "--train", "8", "--val", "4", "--test", "10",
        "--epochs", "5", "--out", "cached",
    ];
    assert_ok(&glnn(dir.path(), &cached));
    assert_eq!(
        fs::read(dir.path().join("text/run_0.csv")).unwrap(),
        fs::read(dir.path().join("cached/run_0.csv")).unwrap()
    );
}

#[test]
fn sweeps_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 120);
    let out = glnn(dir.path(), &with("sweep-lambda0", &["--values", "0.01,0", "--epochs", "5"]));
    assert_ok(&out);
    let table = fs::read_to_string(dir.path().join("runs/lambda0_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("lambda0"));

    let rate = [
        "sweep-labelrate", "--content", "toy.content", "--cites", "toy.cites", "--split", "label-rate",
        "--test", "40", "--rates", "0.05,0.1", "--epochs", "5", "--out", "rates",
    ];
    assert_ok(&glnn(dir.path(), &rate));
    let curve = fs::read_to_string(dir.path().join("rates/labelrate_sweep.csv")).unwrap();
    assert!(curve.starts_with("rate,scheme,train_nodes,mean_test_acc,std_test_acc,runs,failed\n"));
    assert_eq!(curve.lines().count(), 5);
    assert!(dir.path().join("rates/rate_0.05/baseline/run_0.csv").is_file());
}
