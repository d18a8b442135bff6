//! End-to-end runs of the binary: synth → fit → estimate → simulate, plus
//! determinism and manifest replay.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rateshrink"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn rateshrink");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, towns: u32, seed: u64) {
    run_ok(bin().args([
        "synth",
        "--towns",
        &towns.to_string(),
        "--seed",
        &seed.to_string(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
}

#[test]
fn full_pipeline_produces_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, 80, 7);

    let counts = dir.join("counts.csv");
    let population = dir.join("population.csv");
    assert!(counts.exists() && population.exists());

    run_ok(bin().args([
        "fit",
        "--counts",
        counts.to_str().unwrap(),
        "--population",
        population.to_str().unwrap(),
        "--year",
        "2016",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let prior: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("prior.json")).unwrap()).unwrap();
    assert!(prior["alpha"].as_f64().unwrap() > 0.0);
    assert!(dir.join("qq.csv").exists());

    let out = run_ok(bin().args([
        "estimate",
        "--counts",
        counts.to_str().unwrap(),
        "--population",
        population.to_str().unwrap(),
        "--year",
        "2016",
        "--compare-year",
        "2015",
        "--top",
        "5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("top 5 towns"));
    let estimates = fs::read_to_string(dir.join("estimates.csv")).unwrap();
    assert!(estimates.lines().count() > 80); // header + one row per town
    assert!(estimates.starts_with("town,count,population,mle,shrinkage,js,delta"));
    assert!(dir.join("top.csv").exists() && dir.join("year_pair.csv").exists());

    run_ok(bin().args([
        "simulate",
        "--counts",
        counts.to_str().unwrap(),
        "--population",
        population.to_str().unwrap(),
        "--year",
        "2016",
        "--reps",
        "50",
        "--seed",
        "11",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replications"].as_u64(), Some(50));
    assert!(summary["risk_shrinkage"].as_f64().unwrap() < summary["risk_mle"].as_f64().unwrap());
    let samples = fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 51);

    for m in [
        "synth.manifest.json",
        "fit.manifest.json",
        "estimate.manifest.json",
        "simulate.manifest.json",
    ] {
        assert!(dir.join(m).exists(), "missing {m}");
    }
}

#[test]
fn identical_invocations_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&dir_a, &dir_b] {
        synth(dir, 60, 99);
        run_ok(bin().args([
            "simulate",
            "--counts",
            dir.join("counts.csv").to_str().unwrap(),
            "--population",
            dir.join("population.csv").to_str().unwrap(),
            "--year",
            "2016",
            "--reps",
            "40",
            "--seed",
            "3",
            "--workers",
            "2",
            "--out-dir",
            dir.to_str().unwrap(),
        ]));
    }
    for file in ["counts.csv", "population.csv", "summary.json", "samples.csv"] {
        assert_eq!(
            fs::read(dir_a.join(file)).unwrap(),
            fs::read(dir_b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn replay_reproduces_simulation_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, 60, 42);
    run_ok(bin().args([
        "simulate",
        "--counts",
        dir.join("counts.csv").to_str().unwrap(),
        "--population",
        dir.join("population.csv").to_str().unwrap(),
        "--year",
        "2016",
        "--reps",
        "30",
        "--seed",
        "8",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    let original = fs::read(dir.join("summary.json")).unwrap();
    fs::remove_file(dir.join("summary.json")).unwrap();

    run_ok(bin().args([
        "replay",
        dir.join("simulate.manifest.json").to_str().unwrap(),
    ]));
    assert_eq!(fs::read(dir.join("summary.json")).unwrap(), original);
}

#[test]
fn bad_input_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let counts = tmp.path().join("counts.csv");
    let population = tmp.path().join("population.csv");
    fs::write(&counts, "town,year,count\nalpha,2016,not-a-number\n").unwrap();
    fs::write(&population, "town,year,population\nalpha,2016,100\n").unwrap();
    let out = bin()
        .args([
            "fit",
            "--counts",
            counts.to_str().unwrap(),
            "--population",
            population.to_str().unwrap(),
            "--year",
            "2016",
            "--out-dir",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
