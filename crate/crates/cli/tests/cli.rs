//! The `spherical` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spherical(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherical")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_so3_writes_canonical_unit_quaternions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.txt");
    let o = spherical(&["sample-so3", "--n", "100", "--seed", "5", "--out", p(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 100);
    for line in text.lines() {
        let q: Vec<f64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(q.len(), 4);
        assert!(q[0] >= 0.0);
        assert!((q.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-8);
    }
    let again = spherical(&["sample-so3", "--n", "100", "--seed", "5"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn train_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let small = ["--epochs", "2", "--n-train", "128", "--n-test", "32", "--batch", "32"];
    for head in ["direct", "flat", "sexp"] {
        let mut args = vec!["train", "--task", "s2", "--head", head, "--seed", "0", "--seed", "1", "--out", p(&runs)];
        args.extend(small);
        let o = spherical(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().count(), 2);
    }
    assert_eq!(fs::read_dir(&runs).unwrap().count(), 6);

    let run = fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let o = spherical(&["eval", "--pred", p(&run.join("pred.txt")), "--gt", p(&run.join("gt.txt")), "--task", "s2"]);
    assert!(o.status.success());
    let printed = stdout(&o);
    let med: f64 = printed.lines().next().unwrap().strip_prefix("med_err ").unwrap().parse().unwrap();
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("eval.json")).unwrap()).unwrap();
    assert!((med - eval["med_err"].as_f64().unwrap()).abs() < 1e-6);
    assert!(printed.contains("acc_11_25 "));

    let o = spherical(&["report", "--dir", p(&runs)]);
    assert!(o.status.success());
    let comparison = fs::read_to_string(runs.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = comparison.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("s2,direct,smoothl1,2,0,"));
    assert!(rows[3].starts_with("s2,sexp,cosine,2,0,"));
    assert_eq!(fs::read_to_string(runs.join("grad_variance.csv")).unwrap().lines().count(), 7);
    assert_eq!(
        fs::read_to_string(runs.join("grad_variance_by_epoch.csv")).unwrap().lines().count(),
        1 + 6 * 2
    );
}

#[test]
fn invalid_arguments_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = spherical(&["train", "--task", "s3", "--head", "flat", "--loss", "xent2", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xent2"));
}

#[test]
fn gradcheck_reports_every_check() {
    let o = spherical(&["gradcheck", "--trials", "20"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("17 checks, 0 failed\n"));
}
