//! Run configuration of the command-line front end.
//!
//! A configuration file is a JSON object; every field is optional and falls
//! back to [`RunConfig::default`]. Command-line flags override file values.
//!
//! ```json
//! {
//!   "hermite_cutoff": 32,
//!   "sector_M": 32,
//!   "seed": 20240531,
//!   "output_dir": "out",
//!   "quadrature": { "phi_nodes": 16, "omega_nodes": 64, "equator_band": 0.05 },
//!   "tolerances": { "residue": 1e-8, "seed_spread": 1e-6, "idempotency": 1e-9, "exactness": 1e-12 },
//!   "model": { "period": 6.283185307179586, "K": 8 },
//!   "szego": { "kernel_sectors": 16384, "kernel_cutoff": 16, "lower_amplitude": 0.2 },
//!   "fit": { "powers": [-4.0], "band_factor": 3.0 }
//! }
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::nilmanifold::NilmanifoldConfig;
use crate::quadrature::QuadratureSpec;
use crate::residue::LogFitConfig;
use crate::suites::SuiteParams;
use crate::{Error, Result};

/// Node counts of the anisotropic sphere rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub phi_nodes: usize,
    pub omega_nodes: usize,
    pub equator_band: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self { phi_nodes: q.phi_nodes, omega_nodes: q.omega_nodes, equator_band: q.equator_band }
    }
}

/// Tolerances attached to reported quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance of symbolic residues.
    pub residue: f64,
    /// Allowed spread of residues over lower-term seeds.
    pub seed_spread: f64,
    pub idempotency: f64,
    /// Relative defect of identities that hold exactly per sector.
    pub exactness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residue: 1e-8, seed_spread: 1e-6, idempotency: 1e-9, exactness: 1e-12 }
    }
}

/// Quotient parameters other than the sector count and the Hermite cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub period: f64,
    #[serde(rename = "K")]
    pub abelian_grid: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { period: 2.0 * PI, abelian_grid: 8 }
    }
}

/// Parameters of `hcalc szego`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SzegoParams {
    pub kernel_sectors: i64,
    pub kernel_cutoff: usize,
    pub lower_amplitude: f64,
}

impl Default for SzegoParams {
    fn default() -> Self {
        let s = SuiteParams::default();
        Self { kernel_sectors: s.kernel_sectors, kernel_cutoff: s.kernel_cutoff, lower_amplitude: 0.2 }
    }
}

/// Parameters of `hcalc fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    pub powers: Vec<f64>,
    pub band_factor: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        let c = LogFitConfig::default();
        Self { powers: c.powers, band_factor: c.band_factor }
    }
}

/// Global and command-specific settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hermite_cutoff: usize,
    #[serde(rename = "sector_M")]
    pub sector_m: i64,
    pub quadrature: QuadratureConfig,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelParams,
    pub szego: SzegoParams,
    pub fit: FitParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SuiteParams::default();
        Self {
            hermite_cutoff: s.hermite_cutoff,
            sector_m: s.sectors,
            quadrature: QuadratureConfig::default(),
            tolerances: Tolerances::default(),
            seed: s.seed,
            output_dir: PathBuf::from("hcalc-out"),
            model: ModelParams::default(),
            szego: SzegoParams::default(),
            fit: FitParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("residue", t.residue),
            ("seed_spread", t.seed_spread),
            ("idempotency", t.idempotency),
            ("exactness", t.exactness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("tolerance {name} = {v} must be positive")));
            }
        }
        if self.hermite_cutoff < 2 {
            return Err(Error::InvalidArgument(format!("hermite_cutoff {} below 2", self.hermite_cutoff)));
        }
        if self.sector_m < 1 || self.szego.kernel_sectors < 1 {
            return Err(Error::InvalidArgument("sector counts must be positive".into()));
        }
        if !(self.fit.band_factor > 0.0) || !(self.szego.lower_amplitude >= 0.0) {
            return Err(Error::InvalidArgument("band factor must be positive and amplitudes nonnegative".into()));
        }
        self.quadrature_spec().validate()
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            phi_nodes: self.quadrature.phi_nodes,
            omega_nodes: self.quadrature.omega_nodes,
            equator_band: self.quadrature.equator_band,
            ..QuadratureSpec::default()
        }
    }

    pub fn suite_params(&self) -> SuiteParams {
        SuiteParams {
            hermite_cutoff: self.hermite_cutoff,
            sectors: self.sector_m,
            kernel_sectors: self.szego.kernel_sectors,
            kernel_cutoff: self.szego.kernel_cutoff,
            seed: self.seed,
        }
    }

    /// Model configuration `{period, M, N, K}`.
    pub fn model_config(&self) -> NilmanifoldConfig {
        NilmanifoldConfig {
            period: self.model.period,
            sectors: self.sector_m,
            hermite_cutoff: self.hermite_cutoff,
            abelian_grid: self.model.abelian_grid,
        }
    }

    pub fn log_fit_config(&self) -> LogFitConfig {
        LogFitConfig { powers: self.fit.powers.clone(), band_factor: self.fit.band_factor, ..LogFitConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_through_json() {
        let mut cfg = RunConfig::default();
        cfg.sector_m = 48;
        cfg.tolerances.residue = 1e-7;
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"sector_M\":48"));
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_nonpositive_tolerances_and_unknown_fields() {
        assert!(RunConfig::from_json(r#"{"tolerances": {"residue": 0.0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tolerances": {"exactness": -1e-3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"hermite_cutof": 8}"#).is_err());
    }
}
