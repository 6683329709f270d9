//! Exit codes and report contents of the `hcalc` binary.

use std::path::Path;
use std::process::{Command, Output};

use hcalc::group::dilate;
use hcalc::symbol::anisotropic_norm;

fn hcalc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcalc"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join(format!("{name}.json"))).expect("report written");
    serde_json::from_str(&text).expect("valid JSON")
}

/// Kernel samples `2(1 + ω_1) t^{-4} - c log t + 0.8` on `shells` shells along three directions.
fn write_samples(path: &Path, shells: usize, c: f64) {
    let raw = [[0.3, 0.5, -0.2], [-0.1, 0.2, 0.6], [0.25, -0.4, -0.3]];
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["x0", "x1", "x2", "re", "im"]).unwrap();
    for k in 0..shells {
        let t = 0.05 * 2f64.powi(k as i32);
        for b in &raw {
            let unit = dilate(1.0 / anisotropic_norm(b), b).unwrap();
            let y = dilate(t, &unit).unwrap();
            let v = 2.0 * (1.0 + unit[1]) * t.powi(-4) - c * t.ln() + 0.8;
            w.write_record([y[0], y[1], y[2], v, 0.0].map(|x| format!("{x:.17e}"))).unwrap();
        }
    }
    w.flush().unwrap();
}

#[test]
fn verify_algebra_passes_and_lists_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "16", "verify", "algebra"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "verify");
    assert_eq!(r["passed"], true);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"].as_str().unwrap().contains("associativity")));
    for c in checks {
        assert!(c["tolerance"].is_number() && c["measured"].is_number());
    }
    assert!(r["normalization"].as_str().unwrap().contains("dξ"));
}

#[test]
fn verify_all_passes_at_reduced_cutoffs() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "16", "--sectors", "16", "verify", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path(), "verify");
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for section in ["group algebra", "trace property", "rho_R", "Rumin complex", "cutoff stability"] {
        assert!(names.iter().any(|n| n.starts_with(section)), "{section}");
    }
}

#[test]
fn verify_projections_terminates_at_default_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["verify", "projections"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_suite_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcalc(dir.path(), &["verify", "unknown"]).status.code(), Some(2));
}

#[test]
fn malformed_arguments_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcalc(dir.path(), &["szego", "one", "0"]).status.code(), Some(2));
    assert_eq!(hcalc(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"tolerances": {"residue": -1}}"#).unwrap();
    assert_eq!(hcalc(dir.path(), &["--config", cfg.to_str().unwrap(), "verify", "algebra"]).status.code(), Some(2));
}

#[test]
fn kohn_gate_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcalc(dir.path(), &["--hermite-cutoff", "8", "kohn", "1", "0"]).status.code(), Some(3));
    let o = hcalc(dir.path(), &["--hermite-cutoff", "8", "kohn", "2", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "kohn");
    assert!(r["projections"]["ker dbar_b"]["residue"]["re"].is_number());
    assert!(r["projections"]["ker dbar_b"]["tolerances"]["idempotency"].is_number());
}

#[test]
fn fit_with_three_shells_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.csv");
    write_samples(&path, 3, 0.37);
    assert_eq!(hcalc(dir.path(), &["fit", "--samples", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn fit_recovers_a_planted_log_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.csv");
    write_samples(&path, 7, 0.37);
    let o = hcalc(dir.path(), &["fit", "--samples", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "fit");
    let c = r["quantities"]["c"]["value"].as_f64().unwrap();
    assert!((c - 0.37).abs() < 1e-2 * 0.37, "{c}");
    assert!(r["quantities"]["c"]["band"].is_number());
}

#[test]
fn residue_without_critical_component_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "12", "residue", "--example", "szego"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "residue");
    assert_eq!(r["quantities"]["residue_symbolic"]["value"].as_f64(), Some(0.0));
}

#[test]
fn residue_writes_the_density_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "16", "residue"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("residue_density.csv")).unwrap();
    assert!(text.starts_with("base_index,re_tr_c,im_tr_c,jacobian"));
    let r = report(dir.path(), "residue");
    assert!(r["quantities"]["residue_quadrature"]["band"].is_number());
}

#[test]
fn szego_symbolic_reports_zero_and_seed_spread() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "16", "szego", "1", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "szego");
    assert!(r["quantities"]["residue"]["value"].as_f64().unwrap().abs() <= 1e-8);
    assert!(r["quantities"]["seed_spread"]["value"].as_f64().unwrap() <= 1e-6);
    assert!(r["quantities"]["L"]["tolerance"].is_number());
}

#[test]
fn rumin_reports_idempotency_and_duality() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcalc(dir.path(), &["--hermite-cutoff", "16", "--sectors", "16", "rumin"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "rumin");
    let q = r["quantities"].as_object().unwrap();
    assert_eq!(q.keys().filter(|k| k.ends_with("idempotency_defect")).count(), 6);
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("opposite")));
}

#[test]
fn reports_are_identical_across_thread_counts() {
    for args in [
        &["--hermite-cutoff", "12", "szego", "1", "1"][..],
        &["--hermite-cutoff", "16", "--sectors", "16", "rumin"][..],
        &["--hermite-cutoff", "16", "residue"][..],
    ] {
        let mut texts = Vec::new();
        for threads in ["1", "3"] {
            let dir = tempfile::tempdir().unwrap();
            let o = Command::new(env!("CARGO_BIN_EXE_hcalc"))
                .env("RAYON_NUM_THREADS", threads)
                .arg("--out")
                .arg(dir.path())
                .args(args)
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(0));
            texts.push(o.stdout);
        }
        assert_eq!(texts[0], texts[1], "{args:?}");
    }
}
