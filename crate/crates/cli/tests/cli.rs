use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const XOR: &str = "seed = 3\niterations = 60\neval_every = 10\noptimizer = mkor\n[net]\nhidden = 8\n";

fn kronopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronopt"))
        .args(args)
        .current_dir(dir)
        .env("KRONOPT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("xor.cfg"), XOR).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_is_bitwise_reproducible() {
    let dir = setup();
    for out in ["a", "b"] {
        let o = kronopt(&["train", "--config", "xor.cfg", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["loss.csv", "cost.csv", "model.ckpt", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn exit_codes() {
    let dir = setup();
    let unknown = kronopt(
        &["train", "--config", "xor.cfg", "--optimizer", "adam", "--out", "x"],
        dir.path(),
    );
    assert_eq!(unknown.status.code(), Some(2));
    let bad_key = kronopt(
        &["train", "--config", "xor.cfg", "--set", "optim.nope=1", "--out", "x"],
        dir.path(),
    );
    assert_eq!(bad_key.status.code(), Some(2));
    let missing = kronopt(&["train", "--config", "absent.cfg"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    let diverge = kronopt(
        &[
            "train",
            "--config",
            "xor.cfg",
            "--optimizer",
            "kfac",
            "--set",
            "optim.damping=1e-300",
            "--set",
            "optim.lr=1e6",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(
        diverge.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&diverge.stderr)
    );
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = setup();
    let o = kronopt(
        &[
            "sweep",
            "--config",
            "xor.cfg",
            "--axis",
            "inversion_period",
            "--values",
            "1,10,never",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.contains(",ok,")), "{csv}");
}

#[test]
fn prune_writes_mask_and_checkpoint() {
    let dir = setup();
    let t = kronopt(&["train", "--config", "xor.cfg", "--out", "t"], dir.path());
    assert_eq!(t.status.code(), Some(0));
    let o = kronopt(
        &[
            "prune",
            "--config",
            "xor.cfg",
            "--checkpoint",
            "t/model.ckpt",
            "--k",
            "3",
            "--out",
            "p",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["mask.bin", "pruned.ckpt", "prune.json"] {
        assert!(dir.path().join("p").join(file).exists(), "{file}");
    }
    let bad = kronopt(
        &[
            "prune",
            "--config",
            "xor.cfg",
            "--checkpoint",
            "xor.cfg",
            "--k",
            "1",
            "--out",
            "p",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn cost_report_prints_analytic_table() {
    let dir = setup();
    let o = kronopt(&["cost-report", "--d", "64", "--optimizers", "mkor,kfac"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(
        s.lines().any(|l| l.starts_with("optimizer,phase,d,b,workers,flops")),
        "{s}"
    );
    assert!(s.contains("mkor,") && s.contains("kfac,"));
}

#[test]
fn verify_lemmas_reports_each_check() {
    let dir = setup();
    let o = kronopt(&["verify-lemmas", "--steps", "200", "--out", "lemmas.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(
        s.lines()
            .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
            .count(),
        6,
        "{s}"
    );
    assert!(dir.path().join("lemmas.json").exists());
}
