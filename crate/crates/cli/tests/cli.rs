use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hqlab::spectral::io::load_field;
use hqlab::spectral::{apply_multiplier, random_field, GridSpec, MultiplierSymbol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqlab"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn minnorm_on_shipped_jacobian_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("minnorm", &manifest().join("configs/minnorm_jacobian.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["command"], "minnorm");
    let res = &r["results"];
    assert!((res["energy"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(res["residual"].as_f64().unwrap() <= 1e-8);
    for key in ["config_echo", "timings", "version"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(tmp.path().join("solution.hqf").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "subcommand = \"norms\"\nfoo = 1\n");
    let out = run("norms", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));
    let cfg = write_config(tmp.path(), "[tolerances]\nwobble = 1e-3\n");
    let out = run("factorize", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wobble"));
}

#[test]
fn factorize_shipped_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("factorize", &manifest().join("configs/factorize_corpus.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join("factorization.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "residual_l1").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[col].parse::<f64>().unwrap() <= 1e-6));
}

#[test]
fn unmet_tolerance_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = manifest().join("../core/data/rational_corpus.json");
    let cfg = write_config(tmp.path(), &format!("[io]\ninput = {:?}\n[tolerances]\nresidual = 1e-30\n", corpus.to_str().unwrap()));
    let out = run("factorize", &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(tmp.path().join("report.json").exists());
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = manifest().join("configs/findim_chiral.toml");
    for dir in [&a, &b] {
        assert_eq!(run("findim", &cfg, dir).status.code(), Some(0));
    }
    let strip = |dir: &Path| {
        let mut r = report(dir);
        r.as_object_mut().unwrap().remove("timings");
        r["config_echo"]["resolved"].as_object_mut().unwrap().remove("out");
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(std::fs::read(a.join("face.csv")).unwrap(), std::fs::read(b.join("face.csv")).unwrap());
}

#[test]
fn written_fields_round_trip_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("transform", &manifest().join("configs/transform_beurling.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g = GridSpec::plane(32, 2.0 * std::f64::consts::PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_field::<f64, _>(&g, 6, false, &mut rng);
    let want = apply_multiplier(&f, &MultiplierSymbol::Beurling).unwrap();
    let got = load_field(tmp.path().join("transformed.hqf")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn every_shipped_config_runs() {
    for (sub, file) in [("norms", "norms_line"), ("quantity", "quantity_jacobian")] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run(sub, &manifest().join(format!("configs/{file}.toml")), tmp.path());
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(report(tmp.path())["command"], sub);
    }
}
