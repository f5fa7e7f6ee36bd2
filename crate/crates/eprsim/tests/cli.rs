use std::process::{Command, Output};

use proptest::prelude::*;

fn eprsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eprsim"))
        .args(args)
        .output()
        .expect("eprsim runs")
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn by_name<'a>(records: &'a [serde_json::Value], name: &str) -> &'a serde_json::Value {
    records.iter().find(|r| r["name"] == name).unwrap()
}

#[test]
fn demo_defaults() {
    let out = eprsim(&["demo", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = json_lines(&out);
    assert!(recs.iter().all(|r| r["schema_version"] == 1));
    let m = by_name(&recs, "measured");
    assert!((m["total"].as_f64().unwrap() - 0.270_670_566_473_225_4).abs() < 1e-10);
    assert_eq!(m["entangled"], true);
}

#[test]
fn demo_without_squeezing_sits_on_the_bound() {
    let recs = json_lines(&eprsim(&["demo", "--r", "0", "--format", "json"]));
    let m = by_name(&recs, "measured");
    assert!((m["total"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(m["entangled"], false);
}

#[test]
fn amplification_needs_the_mirrored_orientation() {
    let out = eprsim(&["demo", "--mode", "amp", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = json_lines(&out);
    assert_eq!(by_name(&recs, "source.sum_difference")["entangled"], false);
    assert_eq!(by_name(&recs, "source.difference_sum")["entangled"], true);
    assert_eq!(by_name(&recs, "measured")["entangled"], false);
}

#[test]
fn common_phase_sweep_is_flat() {
    let out = eprsim(&[
        "sweep",
        "--param",
        "common_phase",
        "--grid",
        "0:6.283185307179586:100",
        "--format",
        "json",
    ]);
    let recs = json_lines(&out);
    assert_eq!(recs.len(), 100);
    let t0 = recs[0]["total"].as_f64().unwrap();
    for r in &recs {
        assert!((r["total"].as_f64().unwrap() - t0).abs() < 1e-10);
    }
}

#[test]
fn differential_phase_sweep_values() {
    let out = eprsim(&[
        "sweep",
        "--param",
        "differential_phase",
        "--grid",
        "0,1.5707963267948966,3.141592653589793",
        "--format",
        "json",
    ]);
    let got: Vec<f64> = json_lines(&out).iter().map(|r| r["v_plus"].as_f64().unwrap()).collect();
    let r: f64 = 1.0;
    let want: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|f| (2.0 * r).cosh() - (f * std::f64::consts::PI).cos() * (2.0 * r).sinh())
        .collect();
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{g} vs {w}");
    }
    assert!((got[1] - 3.7622).abs() < 1e-4);
}

#[test]
fn hwp_sweep_minimum_at_nominal_angle() {
    let out = eprsim(&["sweep", "--param", "hwp_angle", "--grid", "21.5:23.5:21", "--format", "json"]);
    let recs = json_lines(&out);
    let best = recs
        .iter()
        .min_by(|a, b| a["total"].as_f64().unwrap().total_cmp(&b["total"].as_f64().unwrap()))
        .unwrap();
    assert!((best["param_value"].as_f64().unwrap() - 22.5).abs() < 1e-9);
}

#[test]
fn csv_has_header_and_rounded_values() {
    let out = eprsim(&["sweep", "--param", "r", "--grid", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("schema_version,command,kind,"));
    let row = lines.next().unwrap();
    assert!(row.contains(",0.270670566473,"), "{row}");
}

#[test]
fn validate_passes_and_negative_control_fails() {
    assert_eq!(eprsim(&["validate"]).status.code(), Some(0));
    let bad = eprsim(&["validate", "--inject-asymmetry", "1e-6", "--format", "json"]);
    assert_eq!(bad.status.code(), Some(1));
    let recs = json_lines(&bad);
    assert_eq!(by_name(&recs, "covariance_symmetry")["pass"], false);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(eprsim(&["sweep", "--param", "colour", "--grid", "1"]).status.code(), Some(2));
    assert_eq!(eprsim(&["sweep", "--param", "r"]).status.code(), Some(2));
    assert_eq!(eprsim(&["demo", "--eta", "1.5"]).status.code(), Some(2));
    assert_eq!(eprsim(&["demo", "--alpha", "-1"]).status.code(), Some(2));
    assert_eq!(eprsim(&["demo", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(eprsim(&["demo", "--format", "xml"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[source]\nalpah = 3.0\n").unwrap();
    assert_eq!(eprsim(&["demo", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    let out = dir.path().join("out.jsonl");
    std::fs::write(
        &cfg,
        format!(
            r#"
id = "lossy"
analysis_frequency = "3 MHz"
[source]
alpha = 50.0
r = 1.0
[[chain]]
kind = "loss"
target = "both"
eta = 0.5
[[chain]]
kind = "qwp"
angle_deg = 0.0
[[chain]]
kind = "hwp"
angle_deg = 22.5
[[chain]]
kind = "pbs"
[output]
format = "json"
path = "{}"
"#,
            out.display()
        ),
    )
    .unwrap();
    let run = eprsim(&["demo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["scenario"], "lossy");
    assert_eq!(first["analysis_frequency"], "3 MHz");
    assert!((first["total"].as_f64().unwrap() - 1.135_335_283_236_612_7).abs() < 1e-10);
}

#[test]
fn homodyne_baseline_is_phase_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h.toml");
    std::fs::write(&cfg, "detection = \"homodyne_baseline\"\nchain = []\n[noise]\ncommon_phase_rms = 0.3\n").unwrap();
    let recs = json_lines(&eprsim(&["demo", "--config", cfg.to_str().unwrap(), "--format", "json"]));
    let m = by_name(&recs, "measured");
    assert_eq!(m["entangled"], false);
    let direct = json_lines(&eprsim(&["demo", "--format", "json"]));
    assert_eq!(by_name(&direct, "measured")["entangled"], true);
}

#[test]
fn mc_reports_oracle_fields() {
    let out = eprsim(&["mc", "--samples", "200000", "--seed", "5", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = json_lines(&out);
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!(r["mc_samples"], 200000);
    assert_eq!(r["mc_seed"], 5);
    assert!(r["mc_sum_relative_error"].as_f64().unwrap() < 0.02);
    assert!(r["mc_sum_standard_error"].as_f64().unwrap() > 0.0);
}

proptest! {
    #[test]
    fn csv_numbers_keep_twelve_digits(x in prop::num::f64::NORMAL) {
        let s = eprsim::record::fmt_sig(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn linspace_grid_endpoints(a in -10.0f64..10.0, b in -10.0f64..10.0, n in 2usize..50) {
        let g = eprsim::config::parse_grid(&format!("{a}:{b}:{n}")).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g[0], a);
        prop_assert!((g[n - 1] - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}
