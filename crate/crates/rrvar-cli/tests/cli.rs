use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rrvar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrvar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate(dir: &Path, t: usize, k: usize, seed: u64, out: &str) {
    let args = [
        "simulate", "--case", "II", "--k", &k.to_string(), "-t", &t.to_string(),
        "--seed", &seed.to_string(), "--out", out,
    ];
    assert_success(&rrvar(dir, &args));
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 80, 5, 42, "a.csv");
    simulate(dir.path(), 80, 5, 42, "b.csv");
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    simulate(dir.path(), 80, 5, 43, "c.csv");
    let c = fs::read(dir.path().join("c.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn bench_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["x", "y"] {
        let out = rrvar(
            dir.path(),
            &[
                "bench", "--case", "III", "--k", "5", "--t-grid", "50,100", "--reps", "8",
                "--seed", "7", "--out-dir", sub,
            ],
        );
        assert_success(&out);
    }
    for name in ["table2.csv", "table3.csv"] {
        let x = fs::read(dir.path().join("x").join(name)).unwrap();
        let y = fs::read(dir.path().join("y").join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between reruns");
    }
}

#[test]
fn simulate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = rrvar(dir.path(), &["simulate", "--case", "I", "--k", "3", "-t", "50"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_file_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..20u64 {
        let data = format!("d{seed}.csv");
        let model = format!("m{seed}.json");
        simulate(dir.path(), 120, 4, 1000 + seed, &data);
        let out = rrvar(
            dir.path(),
            &["fit", &data, "--order", "1", "--model-out", &model, "--report-dir", "rep"],
        );
        assert_success(&out);
        let original = fs::read(dir.path().join(&model)).unwrap();
        let loaded = rrvar_cli::modelfile::load(&dir.path().join(&model)).unwrap();
        assert_eq!(loaded.format_version, 1);
        let resaved = dir.path().join(format!("resaved{seed}.json"));
        rrvar_cli::modelfile::save(&resaved, &loaded).unwrap();
        assert_eq!(
            original,
            fs::read(&resaved).unwrap(),
            "seed {seed}: load/save round trip changed bytes"
        );
    }
}

#[test]
fn fit_emits_bic_curves_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 150, 5, 9, "d.csv");
    let out = rrvar(
        dir.path(),
        &[
            "fit", "d.csv", "--order-select", "2", "--model-out", "m.json",
            "--report-dir", "rep",
        ],
    );
    assert_success(&out);
    let rank_curve = fs::read_to_string(dir.path().join("rep/bic_rank.csv")).unwrap();
    assert_eq!(rank_curve.lines().count(), 1 + 4, "one row per d in 1..K-1");
    assert!(rank_curve.starts_with("d,bic"));
    let order_curve = fs::read_to_string(dir.path().join("rep/bic_order.csv")).unwrap();
    assert_eq!(order_curve.lines().count(), 1 + 3, "one row per p in 0..=2");
    assert!(dir.path().join("rep/trace.csv").exists());
}

#[test]
fn constrained_fit_with_all_positions_free_matches_unconstrained() {
    let dir = tempfile::tempdir().unwrap();
    let k = 4;
    simulate(dir.path(), 200, k, 5, "d.csv");

    let mut lines = String::new();
    for row in 1..=k {
        for col in 1..=k {
            lines.push_str(&format!("1,{row},{col}\n"));
        }
    }
    fs::write(dir.path().join("free.txt"), lines).unwrap();

    for (model, extra) in [("free.json", Some("free.txt")), ("plain.json", None)] {
        let mut args = vec![
            "fit", "d.csv", "--order", "1", "--rank", "2", "--model-out", model,
            "--report-dir", "rep",
        ];
        if let Some(c) = extra {
            args.extend(["--constraints", c]);
        }
        assert_success(&rrvar(dir.path(), &args));
    }

    let load = |name: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    let a_free = load("free.json")["model"]["a"].clone();
    let a_plain = load("plain.json")["model"]["a"].clone();
    let flat = |v: &serde_json::Value| -> Vec<f64> {
        v[0][0]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    let (f, p) = (flat(&a_free), flat(&a_plain));
    assert_eq!(f.len(), k * k);
    for (x, y) in f.iter().zip(&p) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn forecast_of_order_zero_model_is_the_sample_mean() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 100, 3, 2, "d.csv");
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "0", "--model-out", "m.json", "--report-dir", "rep"],
    ));
    let out = rrvar(dir.path(), &["forecast", "m.json", "d.csv", "--out-dir", "fc"]);
    assert_success(&out);

    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut sums = [0.0f64; 3];
    let mut rows = 0;
    for line in text.lines().skip(1) {
        for (j, field) in line.split(',').enumerate() {
            sums[j] += field.parse::<f64>().unwrap();
        }
        rows += 1;
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    for (j, sum) in sums.iter().enumerate() {
        let mean = sum / rows as f64;
        let line = stdout
            .lines()
            .find(|l| l.trim_start().starts_with(&format!("series{}:", j + 1)))
            .unwrap();
        let value: f64 = line.split(':').nth(1).unwrap().trim().parse().unwrap();
        assert!((value - mean).abs() < 1e-10, "{value} vs {mean}");
    }

    let diag = fs::read_to_string(dir.path().join("fc/fmse_diag.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 3);
}

#[test]
fn forecast_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 100, 4, 2, "d.csv");
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "1", "--model-out", "m.json", "--report-dir", "rep"],
    ));
    simulate(dir.path(), 50, 3, 2, "other.csv");
    let out = rrvar(dir.path(), &["forecast", "m.json", "other.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_emits_symmetric_ccf_table() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 200, 5, 12, "d.csv");
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "1", "--rank", "2", "--model-out", "m.json",
          "--report-dir", "rep"],
    ));
    assert_success(&rrvar(
        dir.path(),
        &["diagnose", "m.json", "d.csv", "--lags", "5", "--out-dir", "diag"],
    ));

    let text = fs::read_to_string(dir.path().join("diag/ccf.csv")).unwrap();
    let mut table = std::collections::HashMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[0].to_string(), f[1].to_string(), f[2].parse::<i64>().unwrap());
        table.insert(key, f[3].parse::<f64>().unwrap());
    }
    assert_eq!(table.len(), 2 * 2 * 11);
    for i in ["1", "2"] {
        assert_eq!(table[&(i.to_string(), i.to_string(), 0)], 1.0, "lag-0 ACF");
        for j in ["1", "2"] {
            for lag in -5..=5i64 {
                let a = table[&(i.to_string(), j.to_string(), lag)];
                let b = table[&(j.to_string(), i.to_string(), -lag)];
                assert_eq!(a, b, "ccf({i},{j},{lag})");
            }
        }
    }
    assert!(dir.path().join("diag/scores.csv").exists());
    let positions = fs::read_to_string(dir.path().join("diag/positions.csv")).unwrap();
    assert_eq!(positions.lines().count(), 1 + 5);
}

#[test]
fn diagnose_rejects_rank_zero_models() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 100, 3, 2, "d.csv");
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "1", "--rank", "0", "--model-out", "m.json",
          "--report-dir", "rep"],
    ));
    let out = rrvar(dir.path(), &["diagnose", "m.json", "d.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_from_model_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 150, 3, 21, "d.csv");
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "1", "--model-out", "m.json", "--report-dir", "rep"],
    ));
    for out in ["s1.csv", "s2.csv"] {
        assert_success(&rrvar(
            dir.path(),
            &["simulate", "--model", "m.json", "-t", "60", "--seed", "9", "--out", out],
        ));
    }
    let a = fs::read(dir.path().join("s1.csv")).unwrap();
    let b = fs::read(dir.path().join("s2.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 60);
}

#[test]
fn written_datasets_parse_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 90, 4, 31, "d.csv");
    // Refitting on a rewritten copy exercises the reader on its own output.
    assert_success(&rrvar(
        dir.path(),
        &["fit", "d.csv", "--order", "1", "--model-out", "m1.json", "--report-dir", "rep"],
    ));
    let copy = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    fs::write(dir.path().join("copy.csv"), copy).unwrap();
    assert_success(&rrvar(
        dir.path(),
        &["fit", "copy.csv", "--order", "1", "--model-out", "m2.json", "--report-dir", "rep"],
    ));
    let strip = |name: &str| -> String {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        serde_json::to_string(&v["model"]).unwrap()
    };
    assert_eq!(strip("m1.json"), strip("m2.json"));
}
