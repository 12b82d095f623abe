use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn geowl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geowl")).args(args).env_remove("GEOWL_THREADS").output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Deterministic pseudo-random coordinates without pulling a generator into the tests.
fn lcg_clouds(frames: usize, n: usize, seed: u64) -> String {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut text = String::new();
    for f in 0..frames {
        text.push_str(&format!("{n}\nframe {f}\n"));
        for _ in 0..n {
            text.push_str(&format!("C {:.12} {:.12} {:.12}\n", next(), next(), next()));
        }
    }
    text
}

#[test]
fn fingerprint_of_xyz_frames() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "two.xyz", "2\n\nH 0 0 0\nH 3 4 0\n2\nsame shape\nH 5 5 5\nH 5 5 10\n");
    let o = geowl(&["fingerprint", "--model", "d", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["command"], "fingerprint");
    assert_eq!(r["config"]["decimals"], 9);
    let clouds = r["result"]["clouds"].as_array().unwrap();
    assert_eq!(clouds.len(), 2);
    assert_eq!(clouds[0]["fingerprint"]["digest"], clouds[1]["fingerprint"]["digest"]);
    assert_eq!(clouds[0]["fingerprint"]["digest"].as_str().unwrap().len(), 32);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.xyz", "3\n\nH 0 0 0\nH 1 0 0\n");
    let o = geowl(&["fingerprint", "--model", "c", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "ParseError");
    assert_eq!(e["error"]["line"], 5);
}

#[test]
fn distinguish_verdicts_on_fixture() {
    let pair = fixture("dodecahedron_k10.json");
    let o = geowl(&["distinguish", "--model", "d", &pair]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["result"]["verdict"], "NotDistinguished");
    for m in ["geongnn", "dimenet-edge", "2fwl"] {
        let o = geowl(&["distinguish", "--model", m, &pair]);
        assert_eq!(o.status.code(), Some(0), "{m}");
        assert_eq!(stdout_json(&o)["result"]["verdict"], "Distinguished");
    }
}

#[test]
fn distinguish_two_files_and_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.xyz", "4\n\nC 0 0 0\nC 1 0 0\nC 0 2 0\nC 0 0 3\n");
    let b = write(dir.path(), "b.xyz", "4\n\nC 0 0 0\nC -1 0 0\nC 0 2 0\nC 0 0 3\n");
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    assert_eq!(geowl(&["distinguish", "--model", "geongnn", a, b]).status.code(), Some(3));
    assert_eq!(geowl(&["distinguish", "--model", "geongnn-c", a, b]).status.code(), Some(0));
    // a two-frame file works as a pair as well
    let both = write(dir.path(), "both.xyz", &(std::fs::read_to_string(a).unwrap() + &std::fs::read_to_string(b).unwrap()));
    assert_eq!(geowl(&["distinguish", "--model", "geongnn-c", both.to_str().unwrap()]).status.code(), Some(0));
    // three frames is not a pair
    let three = write(dir.path(), "three.xyz", &lcg_clouds(3, 4, 1));
    assert_eq!(geowl(&["distinguish", "--model", "d", three.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn labels_are_interned_jointly_across_files() {
    let dir = tempfile::tempdir().unwrap();
    // the same shape with the labels swapped
    let a = write(dir.path(), "a.xyz", "3\n\nO 0 0 0\nH 1 0 0\nH 0 2 0\n");
    let b = write(dir.path(), "b.xyz", "3\n\nN 0 0 0\nH 1 0 0\nH 0 2 0\n");
    let o = geowl(&["distinguish", "--model", "d", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn scan_random_clouds_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "randoms.xyz", &lcg_clouds(50, 8, 7));
    let o = geowl(&["scan", "--eps", "1e-6", "--r", "6", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    let row = &r["result"]["table"]["rows"][0];
    assert_eq!(row["proportion_c"], 0.0);
    assert_eq!(row["proportion_d"], 0.0);
    assert_eq!(r["result"]["clouds"], 50);

    write(dir.path(), "tri.xyz", "3\n\nC 1 0 0\nC -0.5 0.8660254037844386 0\nC -0.5 -0.8660254037844386 0\n");
    let o = geowl(&["scan", "--csv", "--eps-grid", "1e-6,1e-3", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eps,proportion_c,proportion_d");
    assert_eq!(lines.len(), 3);
    let frac = 1.0 / 51.0;
    assert!(lines[1].starts_with("0.000001,"), "{}", lines[1]);
    assert_eq!(lines[1].split(',').nth(1).unwrap().parse::<f64>().unwrap(), frac);
}

#[test]
fn symmetry_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "tri.xyz", "3\n\nC 1 0 0\nC -0.5 0.8660254037844386 0\nC -0.5 -0.8660254037844386 0\n");
    let o = geowl(&["symmetry", f.to_str().unwrap()]);
    assert!(o.status.success());
    let rep = &stdout_json(&o)["result"]["clouds"][0]["report"];
    assert_eq!(rep["c_symmetric"], true);
    assert_eq!(rep["d_symmetric"], true);
}

#[test]
fn reconstruct_reports_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.xyz", &lcg_clouds(1, 6, 3));
    for g in ["e3", "se3"] {
        let o = geowl(&["reconstruct", "--group", g, f.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let c = &stdout_json(&o)["result"]["clouds"][0];
        assert!(c["reconstruction"]["residual_rmsd"].as_f64().unwrap() <= 1e-6);
        assert_eq!(c["canonical_form"]["coords"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn json_cloud_matches_xyz() {
    let dir = tempfile::tempdir().unwrap();
    let coords = [[0.1, 1.0 / 3.0, -2e-17], [std::f64::consts::PI, 1e-300, 5.0], [2.0f64.sqrt(), 0.0, -7.25]];
    // XYZ labels B, A, B intern to 1, 0, 1
    let cloud = serde_json::json!({ "coords": coords, "labels": [1, 0, 1] });
    let j = write(dir.path(), "c.json", &cloud.to_string());
    let mut xyz = String::from("3\n\n");
    for (l, c) in ["B", "A", "B"].iter().zip(&coords) {
        xyz.push_str(&format!("{l} {:?} {:?} {:?}\n", c[0], c[1], c[2]));
    }
    let x = write(dir.path(), "c.xyz", &xyz);
    let digest = |f: &Path| {
        let o = geowl(&["fingerprint", "--model", "d", "--decimals", "12", f.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout_json(&o)["result"]["clouds"][0]["fingerprint"]["digest"].clone()
    };
    assert_eq!(digest(&j), digest(&x));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.xyz", &lcg_clouds(1, 5, 9));
    let good = write(dir.path(), "good.toml", "decimals = 4\nn_in = 2\nr_sub = inf\n");
    let o = geowl(&["fingerprint", "--model", "geongnn", "--config", good.to_str().unwrap(), "--n-in", "3", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["config"]["decimals"], 4);
    assert_eq!(r["config"]["n_in"], 3);
    assert_eq!(r["config"]["r_sub"], Value::Null);

    let bad = write(dir.path(), "bad.toml", "decimal = 4\n");
    let o = geowl(&["fingerprint", "--model", "d", "--config", bad.to_str().unwrap(), f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "InvalidConfig");

    let o = geowl(&["fingerprint", "--model", "d", "--n-in", "0", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(geowl(&["fingerprint", "--model", "nope", f.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(geowl(&["--help"]).status.code(), Some(0));
}

#[test]
fn stabilization_cap_is_an_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.xyz", &lcg_clouds(1, 6, 4));
    let o = geowl(&["fingerprint", "--model", "d", "--max-iters", "1", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"]["kind"], "NoStabilization");
}

#[test]
fn gen_counterexamples_requires_seed_and_is_deterministic() {
    let o = geowl(&["gen-counterexamples", "--kind", "icosahedron", "--subset-size", "6"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let emit = dir.path().join("pairs");
    let args = ["gen-counterexamples", "--kind", "icosahedron", "--subset-size", "6", "--seed", "5", "--emit-dir", emit.to_str().unwrap()];
    let a = geowl(&args);
    let b = geowl(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let r = stdout_json(&a);
    assert_eq!(r["result"]["all_valid"], true);
    let emitted = r["result"]["emitted"].as_array().unwrap();
    assert!(!emitted.is_empty());
    // an emitted file replays through distinguish
    let file = emitted[0].as_str().unwrap();
    assert_eq!(geowl(&["distinguish", "--model", "d", file]).status.code(), Some(3));
    assert_eq!(geowl(&["distinguish", "--model", "2fwl", file]).status.code(), Some(0));

    let other = geowl(&["gen-counterexamples", "--kind", "icosahedron", "--subset-size", "6", "--seed", "6"]);
    assert_ne!(stdout_json(&other)["result"]["pairs"], r["result"]["pairs"]);
}

#[test]
fn reports_are_byte_identical_and_respect_out() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.xyz", &lcg_clouds(3, 7, 11));
    let mut reports = Vec::new();
    // the output path is part of the embedded config, so every run reuses it
    let out = dir.path().join("r.json");
    for threads in ["1", "4", "4"] {
        let o = Command::new(env!("CARGO_BIN_EXE_geowl"))
            .args(["fingerprint", "--model", "2fwl", "--out", out.to_str().unwrap(), f.to_str().unwrap()])
            .env("GEOWL_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
}

#[test]
fn bad_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.xyz", &lcg_clouds(1, 4, 2));
    let o = Command::new(env!("CARGO_BIN_EXE_geowl"))
        .args(["symmetry", f.to_str().unwrap()])
        .env("GEOWL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
