use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bcnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcnn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn bcnn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn synth_writes_three_class_dirs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = bcnn(&["synth", "--out", "d", "--per-class", "10", "--seed", "1"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut files = 0;
    for class in ["fatigue", "linear", "potholes"] {
        files += fs::read_dir(dir.path().join("d").join(class)).unwrap().count();
    }
    assert_eq!(files, 30);
    let manifest = fs::read_to_string(dir.path().join("d/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 31);
    assert_eq!(manifest.lines().next(), Some("path,label,class"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["train"],
        vec!["train", "--data", "d", "--bogus"],
        vec!["frobnicate"],
        vec!["train", "--data", "d", "--optimizer", "rmsprop"],
        vec![],
    ] {
        assert_eq!(code(&bcnn(&args, dir.path())), 1, "{args:?}");
    }
    assert_eq!(code(&bcnn(&["--help"], dir.path())), 0);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bcnn(&["eval", "--data", "missing", "--checkpoint", "x.ckpt"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    fs::write(dir.path().join("junk.ckpt"), b"NOPE....").unwrap();
    let img = dir.path().join("x.pgm");
    fs::write(&img, b"P5\n8 8\n255\n".iter().chain(&[0u8; 64]).copied().collect::<Vec<_>>()).unwrap();
    let out = bcnn(&["predict", "--image", "x.pgm", "--checkpoint", "junk.ckpt"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("format"));
}

#[test]
fn gradcheck_gate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bcnn(&["gradcheck", "--seed", "7", "--tol", "1e-4"], dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("passed"));
    let out = bcnn(&["gradcheck", "--seed", "7", "--tol", "1e-30"], dir.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn train_eval_predict_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&bcnn(&["synth", "--out", "d", "--per-class", "8", "--size", "32", "--seed", "2"], p)), 0);

    let train = |tag: &str| {
        let ckpt = format!("{tag}.ckpt");
        let log = format!("{tag}.csv");
        let out = bcnn(
            &[
                "train", "--data", "d", "--epochs", "2", "--batch", "8", "--seed", "5",
                "--input-size", "32", "--channels", "4,8", "--checkpoint", &ckpt, "--log", &log,
            ],
            p,
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        // resolved configuration comes before any epoch line
        let cfg_at = text.find("config:").unwrap();
        assert!(cfg_at < text.find("epoch").unwrap());
        assert!(text.contains("lr: 0.001") && text.contains("val_ratio: 0.25"));
        (fs::read(p.join(ckpt)).unwrap(), fs::read_to_string(p.join(log)).unwrap())
    };
    let (ck_a, log_a) = train("a");
    let (ck_b, log_b) = train("b");
    assert_eq!(ck_a, ck_b);
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.lines().count(), 3);

    let out = bcnn(&["eval", "--data", "d", "--checkpoint", "a.ckpt", "--report", "r.csv"], p);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(p.join("r.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("class,precision,recall,f1,support"));
    assert!(report.lines().last().unwrap().starts_with("accuracy,,,,"));
    assert!(stdout(&out).contains("weighted avg"));

    let out = bcnn(&["predict", "--image", "d/potholes/potholes_0000.pgm", "--checkpoint", "a.ckpt"], p);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let probs: Vec<f64> = text
        .lines()
        .filter_map(|l| l.split_whitespace().nth(1)?.parse().ok())
        .collect();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 2e-4);

    let out = bcnn(
        &["predict", "--image", "d/potholes/potholes_0000.pgm", "--checkpoint", "a.ckpt", "--classes", "a,b"],
        p,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn augment_writes_originals_and_variants() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&bcnn(&["synth", "--out", "d", "--per-class", "4", "--size", "32"], p)), 0);
    let out = bcnn(&["augment", "--in", "d", "--out", "aug", "--variants", "2", "--seed", "9"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(p.join("aug/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 12 * 3);
    let out = bcnn(&["augment", "--in", "d", "--out", "bad", "--scales", "3.0"], p);
    assert_eq!(code(&out), 2);
}

#[test]
fn trained_model_generalises_to_a_held_out_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&bcnn(&["synth", "--out", "train", "--per-class", "100", "--seed", "1"], p)), 0);
    assert_eq!(code(&bcnn(&["synth", "--out", "held", "--per-class", "40", "--seed", "1001"], p)), 0);
    let out = bcnn(&["train", "--data", "train", "--seed", "1", "--checkpoint", "m.ckpt", "--log", "log.csv"], p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(p.join("log.csv")).unwrap().lines().count(), 16);

    let out = bcnn(&["eval", "--data", "held", "--checkpoint", "m.ckpt", "--report", "report.csv"], p);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(p.join("report.csv")).unwrap();
    let acc: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("accuracy,,,,"))
        .and_then(|v| v.parse().ok())
        .expect("accuracy row");
    assert!(acc >= 0.85, "held-out accuracy {acc}\n{}", stdout(&out));
}
