use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bcall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcall"))
        .args(args)
        .env_remove("BCALL_MNIST_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bcall(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Parses the single JSON line a failing run prints.
fn error_of(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str::<Value>(text.trim()).unwrap()["error"].clone()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let fa = csv_files(a);
    assert!(!fa.is_empty());
    for f in &fa {
        let rel = f.strip_prefix(a).unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.join(rel)).unwrap(), "{}", rel.display());
    }
    assert_eq!(fa.len(), csv_files(b).len());
}

#[test]
fn stdp_grid_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    ok(&["stdp", "--dt-min", "-60", "--dt-max", "60", "--step", "2", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(out.join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta_t_ms,dw_mean,dw_std"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 61);
    assert!(rows[0].starts_with("-60,"));
    assert!(rows[60].starts_with("60,"));
}

#[test]
fn out_of_range_value_names_field_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let err = error_of(&bcall(&["stdp", "--theta-w", "1.5", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["kind"], "invalid_config");
    assert_eq!(err["field"], "rule.theta_w");
    assert!(err["message"].as_str().unwrap().contains("(0, 1)"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn library_fields_are_reported_by_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let err = error_of(&bcall(&["rsnn", "--p-ee", "1.5", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["field"], "p_ee");
    let err = error_of(&bcall(&["stdp", "--tau-i-ms", "-1", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["field"], "rule.tau_i_ms");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let err = error_of(&bcall(&["stdp", "--tau-i", "30"]));
    assert_eq!(err["kind"], "usage");
    let err = error_of(&bcall(&["fly"]));
    assert_eq!(err["kind"], "usage");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"rule": {"tau_i": 30}}"#).unwrap();
    let err = error_of(&bcall(&["stdp", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["kind"], "invalid_config");
    assert_eq!(err["field"], "tau_i");
}

#[test]
fn unreadable_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = error_of(&bcall(&["analyze", "--spikes", "/nonexistent/s.csv", "--out", dir.path().to_str().unwrap()]));
    assert_ne!(err["kind"], "usage");
    let err = error_of(&bcall(&["sfnn-train", "--data-dir", "/nonexistent", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["kind"], "data");
}

#[test]
fn defaults_resolve_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["stdp", "--out", dir.path().to_str().unwrap()]);
    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "stdp");
    assert_eq!(m["seeds"], serde_json::json!([0]));
    let rule = &m["config"]["rule"];
    let want = [
        ("tau_i_ms", 30.0),
        ("tau_j_ms", 30.0),
        ("tau_s_ms", 800.0),
        ("tau_w_s", 40.0),
        ("a_i", 0.4),
        ("a_j", 0.5),
        ("a_s", 0.075),
        ("theta_i", 0.05),
        ("theta_j", 0.05),
        ("theta_u", 0.55),
        ("theta_l", 0.05),
        ("theta_w", 0.5),
        ("c1_d", -0.026),
        ("c2_d", -0.008),
        ("c_p", 0.18),
        ("alpha", 1.0),
        ("beta", 1.0),
    ];
    for (k, v) in want {
        assert_eq!(rule[k].as_f64(), Some(v), "{k}");
    }
    assert_eq!(rule.as_object().unwrap().len(), want.len() + 1);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"f_a_hz": 20, "per_class": 1, "rule": {"theta_w": 0.4}}"#).unwrap();
    let out = dir.path().join("o");
    ok(&[
        "sfnn-train",
        "--config",
        cfg.to_str().unwrap(),
        "--f-a-hz",
        "25",
        "--classes",
        "0",
        "--test-per-class",
        "0",
        "--t-inp-s",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    let c = &manifest(&out)["config"];
    assert_eq!(c["f_a_hz"].as_f64(), Some(25.0));
    assert_eq!(c["per_class"].as_u64(), Some(1));
    assert_eq!(c["rule"]["theta_w"].as_f64(), Some(0.4));
    assert_eq!(c["rule"]["c_p"].as_f64(), Some(0.18));
    assert!(Path::new(c["data_dir"].as_str().unwrap()).is_dir());
}

#[test]
fn help_lists_every_rule_default() {
    for sub in ["pair", "stdp", "srdp", "tracesweep", "heatmap", "sfnn-train", "rsnn"] {
        let out = ok(&[sub, "--help"]);
        let help = String::from_utf8(out.stdout).unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
        for (flag, default) in [
            ("--tau-i-ms", "[default: 30.0]"),
            ("--tau-s-ms", "[default: 800.0]"),
            ("--tau-w-s", "[default: 40.0]"),
            ("--a-s", "[default: 0.075]"),
            ("--theta-u", "[default: 0.55]"),
            ("--theta-w", "[default: 0.5]"),
            ("--c1-d", "[default: -0.026]"),
            ("--c2-d", "[default: -0.008]"),
            ("--c-p", "[default: 0.18]"),
        ] {
            let at = help.find(&format!("{flag} <")).unwrap_or_else(|| panic!("{sub} {flag}"));
            let tail = &help[at..];
            let next = tail[2..].find(" --").map_or(tail.len(), |i| i + 2);
            assert!(tail[..next].contains(default), "{sub} {flag}: {}", &tail[..next]);
        }
    }
    let help = String::from_utf8(ok(&["sfnn-train", "--help"]).stdout).unwrap();
    for needle in ["--f-a-hz", "[default: 20.0]", "--f-i-hz", "[default: 210.0]", "--w-i-mv", "[default: coding_level]"] {
        assert!(help.contains(needle), "{needle}");
    }
    let help = String::from_utf8(ok(&["rsnn", "--help"]).stdout).unwrap();
    for needle in ["--f-exc-hz", "[default: 1000.0]", "--p-ee", "[default: random]"] {
        assert!(help.contains(needle), "{needle}");
    }
}

#[test]
fn rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["pair", "--seeds", "2", "--jobs", "2"],
        &["heatmap", "--seeds", "2", "--pre-rates-hz", "5,40", "--post-rates-hz", "10", "--duration-s", "0.5"],
        &["rsnn", "--seeds", "2", "--n-exc", "32", "--n-inh", "8", "--n-stim", "8", "--duration-s", "0.2", "--phase-mode", "correlated"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{k}"));
        let b = dir.path().join(format!("b{k}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", a.to_str().unwrap()]);
        ok(&full);
        ok(&["rerun", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "1"]);
        assert_same_outputs(&a, &b);
        let (ma, mb) = (manifest(&a), manifest(&b));
        assert_eq!(ma, mb);
        for f in ma["outputs"].as_array().unwrap() {
            assert!(a.join(f.as_str().unwrap()).is_file(), "{f}");
        }
    }
}

#[test]
fn seeds_fan_out_into_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["pair", "--seed", "7", "--seeds", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(manifest(dir.path())["seeds"], serde_json::json!([7, 8, 9]));
    for s in 7..10 {
        assert!(dir.path().join(format!("seed_{s}/w_hid.csv")).is_file());
    }
    let a = fs::read(dir.path().join("seed_7/spikes.csv")).unwrap();
    let b = fs::read(dir.path().join("seed_8/spikes.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn pair_replays_spike_files() {
    let dir = tempfile::tempdir().unwrap();
    let pre = dir.path().join("pre.csv");
    let post = dir.path().join("post.csv");
    fs::write(&pre, "unit_id,t\n0,0.01\n").unwrap();
    fs::write(&post, "unit_id,t\n0,0.02\n").unwrap();
    let out = dir.path().join("o");
    ok(&[
        "pair",
        "--pre-spikes",
        pre.to_str().unwrap(),
        "--post-spikes",
        post.to_str().unwrap(),
        "--duration-s",
        "0.05",
        "--theta-l",
        "0",
        "--theta-u",
        "1",
        "--alpha",
        "0",
        "--beta",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("spikes.csv")).unwrap();
    assert_eq!(text, "unit_id,t\n0,0.01\n1,0.02\n");
    let w = fs::read_to_string(out.join("w_hid.csv")).unwrap();
    let last: f64 = w.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let want = 0.5 + 0.4 * (-10.0f64 / 30.0).exp() * 0.18;
    assert!((last - want).abs() < 1e-9, "{last} vs {want}");
}

#[test]
fn analyze_reports_sync_and_ks() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "unit_id,t\n0,0.1\n0,0.5\n1,0.1\n1,0.5\n").unwrap();
    let out = dir.path().join("o");
    ok(&["analyze", "--spikes", a.to_str().unwrap(), "--compare", a.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(r["sync"].as_f64(), Some(1.0));
    assert_eq!(r["mean_rate_hz"].as_f64(), Some(2.0));
    assert_eq!(r["ks"]["statistic"].as_f64(), Some(0.0));
    let hist = fs::read_to_string(out.join("rate_hist.csv")).unwrap();
    assert_eq!(hist, "lo_hz,hi_hz,mass\n2,3,1\n");
}
