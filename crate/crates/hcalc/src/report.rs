//! JSON reports.
//!
//! Every number in a report is a [`Quantity`] carrying a tolerance or a band.
//! Maps are ordered so that identical runs serialize to identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::quadrature::SurfaceMeasure;
use crate::suites::Check;
use crate::Result;

/// A reported number with the tolerance it is held to, or the band it is known within.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
}

impl Quantity {
    pub fn with_tolerance(value: f64, tolerance: f64) -> Self {
        Self { value, tolerance: Some(tolerance), band: None }
    }

    pub fn with_band(value: f64, band: f64) -> Self {
        Self { value, tolerance: None, band: Some(band) }
    }
}

/// Complex residue as `{re, im}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Residue report of one projection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub residue: ComplexValue,
    pub idempotency_defect: f64,
    pub method: String,
    pub tolerances: BTreeMap<String, f64>,
}

/// Resolutions a report was computed at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoffs {
    pub hermite_cutoff: usize,
    pub sectors: i64,
}

/// Top-level report of a command.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub method: String,
    pub seed: u64,
    pub cutoffs: Cutoffs,
    pub normalization: String,
    pub tolerances: BTreeMap<String, f64>,
    pub quantities: BTreeMap<String, Quantity>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub projections: BTreeMap<String, ProjectionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, method: &str, seed: u64, cutoffs: Cutoffs) -> Self {
        Self {
            command: command.to_string(),
            method: method.to_string(),
            seed,
            cutoffs,
            normalization: SurfaceMeasure::EulerForm.note().to_string(),
            tolerances: BTreeMap::new(),
            quantities: BTreeMap::new(),
            projections: BTreeMap::new(),
            checks: Vec::new(),
            passed: None,
            notes: Vec::new(),
        }
    }

    pub fn tolerance(&mut self, name: &str, value: f64) -> &mut Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn quantity(&mut self, name: &str, q: Quantity) -> &mut Self {
        self.quantities.insert(name.to_string(), q);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    /// Appends checks under a section prefix and updates the overall verdict.
    pub fn add_checks(&mut self, section: &str, checks: Vec<Check>) -> &mut Self {
        let ok = checks.iter().all(|c| c.passed);
        self.passed = Some(self.passed.unwrap_or(true) && ok);
        self.checks.extend(checks.into_iter().map(|mut c| {
            c.name = format!("{section}: {}", c.name);
            c
        }));
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<dir>/<command>.json` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.command));
        std::fs::write(&path, self.to_json()? + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_is_ordered_and_stable() {
        let mut r = Report::new("residue", "symbolic", 7, Cutoffs { hermite_cutoff: 8, sectors: 4 });
        r.quantity("b", Quantity::with_tolerance(1.0, 1e-8)).quantity("a", Quantity::with_band(2.0, 0.1));
        let text = r.to_json().unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert_eq!(text, r.clone().to_json().unwrap());
        assert!(text.contains("normalization"));
    }

    #[test]
    fn verdict_follows_checks() {
        let mut r = Report::new("verify", "suite", 0, Cutoffs { hermite_cutoff: 8, sectors: 4 });
        r.add_checks("a", vec![Check::at_most("x", 0.0, 1.0, "")]);
        assert_eq!(r.passed, Some(true));
        r.add_checks("b", vec![Check::at_most("y", 2.0, 1.0, "")]);
        assert_eq!(r.passed, Some(false));
        assert_eq!(r.checks[1].name, "b: y");
    }
}
