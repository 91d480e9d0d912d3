// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tsgan::gan::{load_checkpoint, GanModel};
use tsgan::timeseries::load_csv;

fn tsgan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsgan"))
        .current_dir(dir)
        .env_remove("TSGAN_SEED")
        .args(args)
        .output()
        .expect("spawn tsgan")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tsgan(dir, args);
    assert!(
        out.status.success(),
        "tsgan {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const TINY_TRAIN: &str = r#"{
  "format_version": 1,
  "model": {"latent_dim": 3, "generator_hidden": [8], "critic_hidden": [8]},
  "train": {"warmup_critic_steps": 3, "critic_steps_per_gen": 2, "batch_size": 16, "total_gen_steps": 4}
}"#;

#[test]
fn simulate_cp23_meta() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--preset", "cp23", "--out", "cp.csv"]);
    let meta = json(&d.path().join("cp.meta.json"));
    assert_eq!(meta["true_change_index"], 5000);
    assert_eq!(meta["rows"], 10000);
    assert_eq!(meta["columns"], 23);
    let s = load_csv(&d.path().join("cp.csv")).unwrap();
    assert_eq!((s.len(), s.dim()), (10000, 23));
}

#[test]
fn simulate_ar20_meta() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--preset", "ar20", "--out", "ar.csv", "--seed", "3"]);
    let meta = json(&d.path().join("ar.meta.json"));
    assert_eq!(meta["rows"], 10000);
    assert_eq!(meta["columns"], 20);
    assert_eq!(meta["burn_in_dropped"], 500);
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["simulation"]["lag_coeffs"], serde_json::json!([1.0, -0.01, -0.5]));
    assert_eq!(meta["simulation"]["noise"]["cov_scale"], 0.2);
}

#[test]
fn zero_noise_gives_zero_series() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "z.json",
        r#"{"format_version": 1, "simulation": {"kind": "var", "p": 3, "lag_coeffs": [0.5],
            "noise": {"mean": [0, 0, 0], "cov_scale": 0}, "init": {"kind": "zeros"},
            "burn_in": 5, "n_keep": 40}}"#,
    );
    ok(d.path(), &["simulate", "--config", &cfg, "--out", "z.csv"]);
    let s = load_csv(&d.path().join("z.csv")).unwrap();
    assert_eq!(s.len(), 40);
    assert!(s.data().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn seed_precedence() {
    let d = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_tsgan"));
        c.current_dir(d.path()).env_remove("TSGAN_SEED");
        if let Some(v) = env {
            c.env("TSGAN_SEED", v);
        }
        assert!(c.args(args).status().unwrap().success());
        json(&d.path().join("a.meta.json"))["seed"].clone()
    };
    let base = ["simulate", "--preset", "ar1", "--out", "a.csv"];
    assert_eq!(run(None, &base), 0);
    assert_eq!(run(Some("17"), &base), 17);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "5"]);
    assert_eq!(run(Some("17"), &with_flag), 5);
    let bad = Command::new(env!("CARGO_BIN_EXE_tsgan"))
        .current_dir(d.path())
        .env("TSGAN_SEED", "nope")
        .args(base)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

fn small_series(dir: &Path) {
    ok(dir, &["simulate", "--preset", "cp-small", "--out", "s.csv"]);
}

#[test]
fn train_zero_steps_is_the_init() {
    let d = tempfile::tempdir().unwrap();
    small_series(d.path());
    let cfg = write_config(d.path(), "t.json", TINY_TRAIN);
    ok(d.path(), &["train", "--config", &cfg, "--data", "s.csv", "--out", "m.json", "--steps", "0", "--seed", "9"]);
    let m = load_checkpoint(&d.path().join("m.json")).unwrap();
    let cfg: Value = serde_json::from_str(TINY_TRAIN).unwrap();
    let model_cfg = serde_json::from_value(cfg["model"].clone()).unwrap();
    let init = GanModel::init(8, &model_cfg, 9).unwrap();
    assert_eq!(m.generator, init.generator);
    assert_eq!(m.discriminator, init.discriminator);
    let p = m.provenance.unwrap();
    assert_eq!((p.critic_steps, p.generator_steps), (0, 0));
}

#[test]
fn fixed_schedule_recorded_and_reruns_identical() {
    let d = tempfile::tempdir().unwrap();
    small_series(d.path());
    write_config(d.path(), "t.json", TINY_TRAIN);
    let args = |out: &'static str| {
        vec!["train", "--config", "t.json", "--data", "s.csv", "--out", out, "--steps", "1", "--paper-schedule"]
    };
    ok(d.path(), &args("a.json"));
    ok(d.path(), &args("b.json"));
    let a = std::fs::read(d.path().join("a.json")).unwrap();
    let b = std::fs::read(d.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let v = json(&d.path().join("a.json"));
    let sched = &v["provenance"]["schedule"];
    assert_eq!(sched["warmup_critic_steps"], 100);
    assert_eq!(sched["critic_steps_per_gen"], 25);
    assert_eq!(sched["batch_size"], 64);
    assert_eq!(v["provenance"]["critic_steps"], 125);
    let trace = std::fs::read_to_string(d.path().join("a.trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("step,phase,objective"));
    assert_eq!(trace.lines().count(), 1 + 126);
}

#[test]
fn detect_report_plots_and_guard() {
    let d = tempfile::tempdir().unwrap();
    small_series(d.path());
    let cfg = write_config(d.path(), "t.json", TINY_TRAIN);
    ok(d.path(), &["train", "--config", &cfg, "--preset", "cp-small", "--data", "s.csv", "--out", "m.json"]);
    ok(d.path(), &[
        "detect", "--preset", "cp-small", "--data", "s.csv", "--checkpoint", "m.json", "--out", "r.json",
        "--emit-plots",
    ]);
    let r = json(&d.path().join("r.json"));
    let (s, e) = (r["merged_group_bounds"][0].as_u64().unwrap(), r["merged_group_bounds"][1].as_u64().unwrap());
    assert_eq!(r["global_change_estimate"].as_u64().unwrap(), s + r["j_star"].as_u64().unwrap() - 1);
    assert_eq!(r["config"]["block_size"], 50);
    let lines = |name: &str| std::fs::read_to_string(d.path().join(name)).unwrap().lines().count() - 1;
    assert_eq!(lines("r.blocks.csv"), (2000 - 400usize).div_ceil(50));
    assert_eq!(lines("r.windows.csv") as u64, e - s);
    assert_eq!(e - s, 100);

    let out = tsgan(d.path(), &[
        "detect", "--data", "s.csv", "--checkpoint", "m.json", "--out", "bad.json", "--t", "100",
        "--block-size", "50", "--window-radius", "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-training-overlap"));
    ok(d.path(), &[
        "detect", "--data", "s.csv", "--checkpoint", "m.json", "--out", "over.json", "--t", "100",
        "--block-size", "50", "--window-radius", "4", "--allow-training-overlap", "--parallel",
        "--jump-rule", "absolute", "--fake-draws", "shared-pool",
    ]);
    assert_eq!(json(&d.path().join("over.json"))["config"]["fake_draws"], "shared_pool");
}

#[test]
fn eval_against_own_samples_is_zero() {
    let d = tempfile::tempdir().unwrap();
    small_series(d.path());
    let cfg = write_config(d.path(), "t.json", TINY_TRAIN);
    ok(d.path(), &["train", "--config", &cfg, "--data", "s.csv", "--out", "m.json", "--t", "400"]);
    ok(d.path(), &[
        "eval", "--checkpoint", "m.json", "--reference", "s.csv", "--out", "e1.json", "--samples", "200",
        "--samples-out", "g.csv",
    ]);
    let e1 = json(&d.path().join("e1.json"));
    assert!(e1["w1_exact"].is_null());
    assert_eq!(e1["warnings"].as_array().unwrap().len(), 1);
    assert!(e1["w1_sliced"]["value"].as_f64().unwrap() > 0.0);
    ok(d.path(), &["eval", "--checkpoint", "m.json", "--reference", "g.csv", "--out", "e2.json"]);
    let e2 = json(&d.path().join("e2.json"));
    assert_eq!(e2["w1_exact"]["value"], 0.0);
    assert_eq!(e2["w1_exact"]["method"], "exact_assignment");
    assert_eq!(e2["w1_sliced"]["value"], 0.0);
    assert_eq!(e2["nn_distance"], 0.0);
}

#[test]
fn diagnose_presets() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["diagnose", "--preset", "ar1", "--out", "a.json"]);
    let slope = json(&d.path().join("a.json"))["coupling"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5f64.ln()).abs() < 1e-6);
    ok(d.path(), &["diagnose", "--preset", "ar20", "--out", "b.json", "--surrogate-s", "10,40"]);
    let b = json(&d.path().join("b.json"));
    assert!(b["coupling"]["fit"]["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(b["coupling"]["contracting"], true);
    let sur = b["surrogates"].as_array().unwrap();
    assert!(sur[1]["mean_abs_deviation"].as_f64().unwrap() < sur[0]["mean_abs_deviation"].as_f64().unwrap());
    ok(d.path(), &["diagnose", "--preset", "random-walk", "--out", "c.json"]);
    let c = json(&d.path().join("c.json"));
    assert_eq!(c["coupling"]["contracting"], false);
    assert!(c["coupling"]["fit"]["slope"].as_f64().unwrap().abs() < 1e-6);
    let again = tsgan(d.path(), &["diagnose", "--preset", "ar1", "--out", "a2.json"]);
    assert!(again.status.success());
    assert_eq!(
        std::fs::read(d.path().join("a.json")).unwrap(),
        std::fs::read(d.path().join("a2.json")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let missing = tsgan(d.path(), &["train", "--data", "nope.csv", "--out", "m.json"]);
    assert_eq!(missing.status.code(), Some(4));
    let cfg = write_config(d.path(), "v.json", r#"{"format_version": 2}"#);
    let version = tsgan(d.path(), &["simulate", "--config", &cfg, "--out", "x.csv"]);
    assert_eq!(version.status.code(), Some(2));
    let usage = tsgan(d.path(), &["simulate", "--bogus"]);
    assert_eq!(usage.status.code(), Some(2));
    std::fs::write(d.path().join("bad.csv"), "a,b\n1,2\n3,x\n").unwrap();
    let parse = tsgan(d.path(), &["train", "--data", "bad.csv", "--out", "m.json"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("row 3"));

    small_series(d.path());
    let blowup = write_config(
        d.path(),
        "b.json",
        r#"{"format_version": 1,
            "model": {"latent_dim": 3, "generator_hidden": [8], "critic_hidden": [8]},
            "train": {"warmup_critic_steps": 0, "critic_steps_per_gen": 1, "batch_size": 16,
                      "total_gen_steps": 50, "generator_lr": 1e300}}"#,
    );
    let numeric = tsgan(d.path(), &["train", "--config", &blowup, "--data", "s.csv", "--out", "m.json"]);
    assert_eq!(numeric.status.code(), Some(3), "{}", String::from_utf8_lossy(&numeric.stderr));
    assert!(d.path().join("m.last_good.json").exists());
    assert!(!d.path().join("m.json").exists());
}
