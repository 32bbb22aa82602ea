use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use markov_search::cli::schema::InstanceFile;
use markov_search::cli::{load, CSV_HEADER};

fn corpus(dir: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(dir)
}

fn example(name: &str) -> PathBuf {
    corpus("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markov-search")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

#[test]
fn validate_accepts_the_corpus() {
    for dir in ["examples", "random"] {
        for file in json_files(&corpus(dir)) {
            let out = run(&["validate", path_str(&file)]);
            assert_eq!(out.status.code(), Some(0), "{}", file.display());
            assert_eq!(json(&out)["valid"], true);
        }
    }
}

#[test]
fn validate_rejects_bad_files() {
    let out = run(&["validate", path_str(&corpus("invalid").join("cyclic.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["valid"], false);
    assert!(v["error"].as_str().unwrap().contains("cycle"));

    let out = run(&["validate", path_str(&corpus("invalid").join("bad_probability.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_and_bad_flags_fail() {
    assert_eq!(run(&["validate", "/nonexistent/x.json"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn saup_picks_the_better_action() {
    let out = run(&["saup", path_str(&example("two_actions.json")), "--tau", "0.5"]);
    assert!(out.status.success());
    let p = &json(&out)["processes"][0];
    assert!((p["value"].as_f64().unwrap() - 1.1).abs() < 1e-9);
    assert_eq!(p["policy"][0]["action"], "a2");
}

#[test]
fn negative_tau_is_a_domain_error() {
    let out = run(&["saup", path_str(&example("two_actions.json")), "--tau=-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_and_relaxation_on_two_boxes() {
    let file = example("two_coin_boxes.json");
    let opt = json(&run(&["oracle", path_str(&file)]))["opt"].as_f64().unwrap();
    let relax = json(&run(&["exante", path_str(&file)]))["objective"].as_f64().unwrap();
    assert!((opt - 0.6).abs() < 1e-9);
    assert!((relax - 0.8).abs() < 1e-9);
}

#[test]
fn oracle_reports_size_limit() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("big.json");
    let out = run(&[
        "generate", "--kind", "cms", "--n", "24", "--seed", "1", "--max-states", "6", "--out", path_str(&file),
    ]);
    assert!(out.status.success());
    let out = run(&["oracle", path_str(&file)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn files_round_trip() {
    for dir in ["examples", "random"] {
        for file in json_files(&corpus(dir)) {
            let inst = load(&file).unwrap();
            let text = serde_json::to_string(&InstanceFile::from_instance(&inst)).unwrap();
            let back: InstanceFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_instance().unwrap(), inst, "{}", file.display());
        }
    }
}

#[test]
fn conversion_keeps_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let source = example("noi_two_boxes.json");
    let pc = dir.path().join("pc.json");
    let cms = dir.path().join("cms.json");
    assert!(run(&["convert", path_str(&source), "--to", "pandora-cabinets", "--out", path_str(&pc)]).status.success());
    assert!(run(&["convert", path_str(&pc), "--to", "cms", "--out", path_str(&cms)]).status.success());
    let opt = |p: &Path| json(&run(&["oracle", path_str(p)]))["opt"].as_f64().unwrap();
    let base = opt(&source);
    assert!((opt(&pc) - base).abs() < 1e-9);
    // the reduction may lose up to eps per process
    assert!(opt(&cms) <= base + 1e-9);
    assert!(opt(&cms) >= base - 1.0);
}

#[test]
fn generate_is_deterministic() {
    let a = run(&["generate", "--kind", "cabinets", "--n", "4", "--seed", "9"]);
    let b = run(&["generate", "--kind", "cabinets", "--n", "4", "--seed", "9"]);
    let c = run(&["generate", "--kind", "cabinets", "--n", "4", "--seed", "10"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn prophet_clears_its_bound() {
    let out = run(&["prophet", path_str(&example("two_coin_boxes.json")), "--trials", "4000", "--seed", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    let mean = v["mean"].as_f64().unwrap();
    let se = v["se"].as_f64().unwrap();
    assert!(mean + 4.0 * se >= v["bound"].as_f64().unwrap());
}

#[test]
fn bench_rows_clear_the_ratio_bound() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        path_str(&corpus("examples")),
        "--out",
        path_str(&csv),
        "--trials",
        "2000",
        "--no-timing",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), json_files(&corpus("examples")).len());
    for row in rows {
        let exante: f64 = row[3].parse().unwrap();
        let se: f64 = row[6].parse().unwrap();
        let ratio: f64 = row[7].parse().unwrap();
        assert!(ratio >= 0.5 - 0.1 - 4.0 * se / exante - 1e-9, "{row:?}");
    }
}
