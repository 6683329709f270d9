//! Stored symbols, expansions and sector operators read back through files and the binary.

use std::process::Command;

use hcalc::geometry::szego_symbol;
use hcalc::nilmanifold::{build_model, lift, NilmanifoldConfig};
use hcalc::projection::{projection_from_symbol, FromSymbolOptions};
use hcalc::residue::{lower_terms_for_seed, residue};
use hcalc::serialize::{load_expansion, load_sector_operator, save_expansion, save_sector_operator};
use hcalc::symbol::SymbolShape;

fn projection_expansion(cutoff: usize, seed: u64) -> hcalc::symbol::SymbolExpansion {
    let shape = SymbolShape::new(1, 1, cutoff);
    let lower = lower_terms_for_seed(shape, seed, 0.2);
    projection_from_symbol(&szego_symbol(1, 1, cutoff).unwrap(), Some(&lower), FromSymbolOptions::default())
        .unwrap()
        .expansion
}

#[test]
fn projection_expansion_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = projection_expansion(12, 11);
    let manifest = save_expansion(dir.path(), "pi", &p).unwrap();
    let back = load_expansion(&manifest).unwrap();
    assert_eq!(back.truncation_degree, p.truncation_degree);
    assert_eq!(back.degrees(), p.degrees());
    for (a, b) in back.components.iter().zip(&p.components) {
        assert_eq!(a.fiber_plus, b.fiber_plus);
        assert_eq!(a.fiber_minus, b.fiber_minus);
    }
    assert_eq!(residue(&back), residue(&p));
}

#[test]
fn missing_component_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_expansion(dir.path(), "pi", &projection_expansion(8, 3)).unwrap();
    std::fs::remove_file(dir.path().join("pi.deg-2.hsym")).unwrap();
    assert!(load_expansion(&manifest).is_err());
}

#[test]
fn lifted_operator_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_model(&NilmanifoldConfig { sectors: 4, ..NilmanifoldConfig::default() }).unwrap();
    let op = lift(&projection_expansion(model.hermite_cutoff, 5), &model).unwrap();
    let index = save_sector_operator(dir.path(), "op", &op).unwrap();
    let back = load_sector_operator(&index).unwrap();
    assert_eq!(back.sector_max, op.sector_max);
    for ((m, a), (k, b)) in back.sectors().zip(op.sectors()) {
        assert_eq!(m, k);
        assert_eq!(a, b);
    }
    assert_eq!(back.traces(), op.traces());
}

#[test]
fn residue_command_reads_a_stored_expansion() {
    let dir = tempfile::tempdir().unwrap();
    let p = projection_expansion(12, 7);
    let manifest = save_expansion(dir.path(), "pi", &p).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hcalc"))
        .arg("--out")
        .arg(dir.path())
        .args(["--hermite-cutoff", "12", "residue", "--symbol"])
        .arg(&manifest)
        .output()
        .unwrap();
    let text = std::fs::read_to_string(dir.path().join("residue.json")).unwrap();
    let r: serde_json::Value = serde_json::from_str(&text).unwrap();
    let expected = residue(&p);
    let got = r["quantities"]["residue_symbolic"]["value"].as_f64().unwrap();
    assert!((got - expected.re).abs() <= 1e-12 * (1.0 + expected.re.abs()), "{got} vs {expected}");
    assert_eq!(o.status.code(), Some(0), "{text}");
}
