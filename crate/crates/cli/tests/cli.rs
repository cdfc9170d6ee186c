//! End-to-end runs of the `drl` binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn drl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drl")).args(args).output().expect("drl runs")
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Report lines with the wall-clock field removed.
fn without_timing(path: &PathBuf) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| match line.find("\"wall_ms\":") {
            Some(i) => {
                let rest = &line[i..];
                let end = rest.find([',', '}']).unwrap();
                format!("{}{}", &line[..i], &rest[end..])
            }
            None => line.to_string(),
        })
        .collect()
}

#[test]
fn verify_passes_and_reports_are_reproducible() {
    let config = shipped("carlitz2.conf");
    let (a, b) = (scratch("run_a.jsonl"), scratch("run_b.jsonl"));
    for path in [&a, &b] {
        let out = drl(&[
            "verify", "--config", &config, "--suite", "delta", "--suite", "level-shift", "--seed", "7", "--report",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let (ra, rb) = (without_timing(&a), without_timing(&b));
    assert!(ra.len() > 100);
    assert_eq!(ra, rb);
    let summaries: Vec<&String> = ra.iter().filter(|l| l.contains("\"summary\":true")).collect();
    assert_eq!(summaries.len(), 2);
    assert!(summaries[0].contains("\"suite\":\"delta\""));
}

#[test]
fn seed_changes_the_samples() {
    let config = shipped("carlitz2.conf");
    let (a, b) = (scratch("seed_a.jsonl"), scratch("seed_b.jsonl"));
    for (seed, path) in [("1", &a), ("2", &b)] {
        let out = drl(&["verify", "--config", &config, "--suite", "pairing-bilinear", "--seed", seed, "--report", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_ne!(without_timing(&a), without_timing(&b));
}

#[test]
fn failing_asserted_case_exits_nonzero() {
    // Height one, but rho_pi = tau + tau^2 mod pi, so the theorem condition fails.
    let path = scratch("no_theorem.conf");
    fs::write(
        &path,
        "field.p = 2\nfield.k = 1\nfield.d_h = 1\nmodule.m0 = 1\nmodule.rho_pi[0][1] = 1\nmodule.rho_pi[1][0] = 1\n\
         module.rho_pi[1][1] = 1\nmodule.rho_pi[2][0] = 1\nrun.levels = 1\n",
    )
    .unwrap();
    let out = drl(&["verify", "--config", path.to_str().unwrap(), "--suite", "main-theorem-r"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("theorem condition"));
}

#[test]
fn bad_inputs_exit_with_usage_status() {
    let path = scratch("bad.conf");
    fs::write(&path, "field.p = 2\nmodule.m0 = 2\n").unwrap();
    let out = drl(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing key field.k") && err.contains("rho_pi"), "{err}");

    let out = drl(&["verify", "--config", &shipped("carlitz2.conf"), "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compute_pairing_prints_the_value() {
    let out = drl(&["compute", "pairing", "--n", "2", "--alpha", "v^5*1;1", "--beta", "v^1*1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("a = [0,1] mod eta^2"), "{text}");

    let out = drl(&["compute", "pairing", "--n", "2", "--alpha", "1", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tower_show_lists_levels() {
    let out = drl(&["tower", "show", "--n", "3", "--config", &shipped("carlitz3.conf")]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("E^3: degree 18"), "{text}");
    assert!(text.contains("mu(D_2) = 3/2"), "{text}");
}
