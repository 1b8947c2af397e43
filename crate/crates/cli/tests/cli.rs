use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pdextract::protocols::ToyGenerator;
use pdextract::Stream;
use tempfile::TempDir;

fn pdextract(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdextract"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn pdextract")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn extract_demo_writes_one_row_per_trial() {
    let dir = TempDir::new().unwrap();
    let o = pdextract(&["extract-demo", "--dim", "64", "--backend", "exact", "--trials", "10"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("extract-demo.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.ends_with("\r\n"));
    let m = manifest(dir.path(), "extract-demo");
    assert_eq!(m["rows"], 10);
    assert_eq!(m["config"]["trials"], 10);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["qprg-run", "--dim", "64", "--lambda", "4", "--trials", "20", "--reps", "5", "--seed", "9"];
    assert_eq!(code(&pdextract(&args, a.path())), 0);
    assert_eq!(code(&pdextract(&args, b.path())), 0);
    for f in ["qprg-run.csv", "qprg-run.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let base = ["extract-demo", "--dim", "64", "--trials", "40", "--backend", "multinomial", "--shots", "20000", "--seed", "3"];
    let one: Vec<&str> = base.iter().copied().chain(["--threads", "1"]).collect();
    let eight: Vec<&str> = base.iter().copied().chain(["--threads", "8"]).collect();
    assert_eq!(code(&pdextract(&one, a.path())), 0);
    assert_eq!(code(&pdextract(&eight, b.path())), 0);
    for f in ["extract-demo.csv", "extract-demo.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "dims = [64]\ntrials = 7\nseed = 11\n").unwrap();
    let o = pdextract(&["extract-demo", "--config", cfg.to_str().unwrap(), "--trials", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(dir.path(), "extract-demo");
    assert_eq!(m["config"]["trials"], 5);
    assert_eq!(m["master_seed"], 11);
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trials = 5\nnot_a_field = 1\n").unwrap();
    assert_eq!(code(&pdextract(&["extract-demo", "--config", cfg.to_str().unwrap()], dir.path())), 2);
    assert_eq!(code(&pdextract(&["extract-demo", "--backend", "magic"], dir.path())), 2);
    assert_eq!(code(&pdextract(&["extract-demo", "--dim", "1"], dir.path())), 2);
    assert_eq!(code(&pdextract(&["commit", "--deviation", "1.5"], dir.path())), 2);
    assert!(!dir.path().join("extract-demo.csv").exists());
}

#[test]
fn failing_gating_check_exits_3() {
    // Sixteen samples over sixteen output strings cannot look uniform.
    let dir = TempDir::new().unwrap();
    let o = pdextract(&["haar-stats", "--dim", "64", "--trials", "16"], dir.path());
    assert_eq!(code(&o), 3);
    let m = manifest(dir.path(), "haar-stats");
    let failed: Vec<_> = m["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["gating"] == true && c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap().to_owned())
        .collect();
    assert!(failed.contains(&"uniformity_tv".to_owned()), "{failed:?}");
}

#[test]
fn best_collision_matches_exact_profile() {
    let dir = TempDir::new().unwrap();
    let o = pdextract(
        &["commit", "--adversary", "best-collision", "--generator", "toy", "--lambda", "4", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(dir.path(), "commit");
    let reported = m["results"]["double_open_probability"].as_f64().unwrap();

    let toy = ToyGenerator::random(4, 12, 3, &Stream::root(5).child(0)).unwrap();
    let profile = toy.double_open_profile(4);
    assert!((reported - profile.mean).abs() < 1e-12, "{reported} vs {}", profile.mean);

    // The per-r table averages to the same value.
    let mut rdr = csv::Reader::from_path(dir.path().join("commit.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "double_open").unwrap();
    let probs: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(probs.len(), 1 << 12);
    let mean = probs.iter().sum::<f64>() / probs.len() as f64;
    assert!((mean - reported).abs() < 1e-12);
}
