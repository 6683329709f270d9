//! The noncommutative residue: exact fiber-trace evaluation, residue densities
//! by quadrature over the anisotropic unit sphere, log-coefficient fits of
//! kernels and of sector traces, the trace property, `L(S) = −Res S / 2`, and
//! `ρ_R` on idempotent pairs.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::group::{FrameMap, GroupPoint};
use crate::linalg::{self, c, CMat, RMat};
use crate::projection::{projection_from_symbol, symbol_idempotency_defect, FromSymbolOptions, IDEMPOTENT_TOL};
use crate::quadrature::{anisotropic_sphere_rule, EquatorRule, QuadratureSpec, SurfaceMeasure};
use crate::symbol::{
    anisotropic_norm, direct_sum_symbol, expansion_mul, random_expansion, scalar_eval, HomogeneousSymbol, SymbolExpansion,
    SymbolShape,
};
use crate::{Error, Result};

/// Relative change allowed between a quadrature and its refinement.
pub const REFINEMENT_TOL: f64 = 1e-4;

/// `c = 2(2π)^{−(n+1)} (tr F₊ + tr F₋)` for a degree `−(d+2)` component.
///
/// Integrating `p` over slabs `λ ∈ [a, b]` and using `∫ W[F](h) dh = (2π)^n tr F`
/// shows `∫_{‖ξ‖=1} p ι_E dξ = 2(2π)^n (tr F₊ + tr F₋)`.
pub fn density_coefficient(p: &HomogeneousSymbol) -> Complex64 {
    let n = p.shape.n as i32;
    p.fiber_trace_sum() * (2.0 * (2.0 * PI).powi(-(n + 1)))
}

/// `Res P` on unit base measure, read off the degree `−(d+2)` component.
pub fn residue(p: &SymbolExpansion) -> Complex64 {
    residue_with_measure(p, 1.0)
}

/// `Res P = vol · c_P` for a left-invariant operator on a quotient of volume `vol`.
pub fn residue_with_measure(p: &SymbolExpansion, base_measure: f64) -> Complex64 {
    let shape = match p.shape() {
        Some(s) => s,
        None => return Complex64::new(0.0, 0.0),
    };
    match p.component(shape.group().critical_degree()) {
        Some(comp) => density_coefficient(comp) * base_measure,
        None => Complex64::new(0.0, 0.0),
    }
}

/// A matrix-valued function on `‖ξ‖ = 1` that can be integrated.
pub trait SphereIntegrand: Sync {
    fn n(&self) -> usize;
    fn rank(&self) -> usize;
    fn value(&self, xi: &[f64], rule: EquatorRule) -> Result<CMat>;
}

impl SphereIntegrand for HomogeneousSymbol {
    fn n(&self) -> usize {
        self.shape.n
    }

    fn rank(&self) -> usize {
        self.shape.rank
    }

    fn value(&self, xi: &[f64], rule: EquatorRule) -> Result<CMat> {
        match rule {
            EquatorRule::Interpolate => scalar_eval(self, xi),
            EquatorRule::FiberContinuation if xi[0] != 0.0 => Ok(self.fiber_value(xi)),
            EquatorRule::FiberContinuation => scalar_eval(self, xi),
        }
    }
}

/// A symbol given directly as a function of `ξ`.
pub struct ScalarSymbol<F: Fn(&[f64]) -> CMat + Sync> {
    pub n: usize,
    pub rank: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> CMat + Sync> SphereIntegrand for ScalarSymbol<F> {
    fn n(&self) -> usize {
        self.n
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, xi: &[f64], _rule: EquatorRule) -> Result<CMat> {
        Ok((self.f)(xi))
    }
}

/// `∫_{‖ξ‖=1} p` with the configured measure, without normalization constants.
pub fn sphere_integral(p: &dyn SphereIntegrand, spec: &QuadratureSpec) -> Result<CMat> {
    Ok(sphere_integral_with_mass(p, spec)?.0)
}

/// The sphere integral together with `∫ max_abs(p)`, the mass against which
/// cancellation in the integral is measured.
fn sphere_integral_with_mass(p: &dyn SphereIntegrand, spec: &QuadratureSpec) -> Result<(CMat, f64)> {
    let nodes = anisotropic_sphere_rule(p.n(), spec)?;
    let parts: Vec<CMat> = nodes
        .par_iter()
        .map(|nd| p.value(&nd.xi, spec.equator_rule).map(|v| v * c(nd.weight)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = CMat::zeros(p.rank(), p.rank());
    let mut mass = 0.0;
    for v in &parts {
        out += v;
        mass += linalg::max_abs(v);
    }
    Ok((out, mass))
}

/// Sampled residue density over base points.
#[derive(Clone, Debug)]
pub struct ResidueDensity {
    /// Matrix-valued `c_P` before the trace, one per base sample.
    pub values: Vec<CMat>,
    pub jacobian_factor: Vec<f64>,
    pub base_weights: Vec<f64>,
    pub base_measure: f64,
    pub measure: SurfaceMeasure,
    pub method: &'static str,
    /// Relative change under mesh refinement, when measured.
    pub refinement_change: Option<f64>,
    /// Size of the integrand against which `refinement_change` is relative.
    pub scale: f64,
}

impl ResidueDensity {
    /// Density of a left-invariant operator: one sample carrying the whole base measure.
    pub fn constant(value: CMat, base_measure: f64, measure: SurfaceMeasure, method: &'static str) -> Self {
        let scale = linalg::max_abs(&value) * base_measure;
        Self {
            values: vec![value],
            jacobian_factor: vec![1.0],
            base_weights: vec![base_measure],
            base_measure,
            measure,
            method,
            refinement_change: None,
            scale,
        }
    }

    /// `∫_M tr c_P`.
    pub fn total(&self) -> Complex64 {
        self.values
            .iter()
            .zip(&self.jacobian_factor)
            .zip(&self.base_weights)
            .map(|((v, j), w)| linalg::trace(v) * (j * w))
            .sum()
    }

    /// Writes `base_index, re_tr_c, im_tr_c, jacobian`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["base_index", "re_tr_c", "im_tr_c", "jacobian"])?;
        for (i, (v, j)) in self.values.iter().zip(&self.jacobian_factor).enumerate() {
            let t = linalg::trace(v) * *j;
            w.write_record([i.to_string(), format!("{:.17e}", t.re), format!("{:.17e}", t.im), format!("{j:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A normalized sphere integral with its refinement measurements.
#[derive(Clone, Debug)]
pub struct IntegrandDensity {
    pub value: CMat,
    /// Change under mesh refinement relative to `scale`, when measured.
    pub refinement_change: Option<f64>,
    /// `max(|value|, (2π)^{−(d+1)} ∫ |p|)`, the size against which errors are relative.
    pub scale: f64,
}

/// `(2π)^{−(d+1)} ∫_{‖ξ‖=1} p` for a degree `−(d+2)` integrand, with the
/// check that the value is stable under mesh refinement.
pub fn integrand_density(p: &dyn SphereIntegrand, spec: &QuadratureSpec) -> Result<IntegrandDensity> {
    let d = 2 * p.n() as i32;
    let norm = c((2.0 * PI).powi(-(d + 1)));
    if !spec.refine_check {
        let (coarse, mass) = sphere_integral_with_mass(p, spec)?;
        let value = coarse * norm;
        let scale = linalg::max_abs(&value).max(mass * norm.re);
        return Ok(IntegrandDensity { value, refinement_change: None, scale });
    }
    let coarse = sphere_integral(p, spec)? * norm;
    let (fine, mass) = sphere_integral_with_mass(p, &spec.refined())?;
    let fine = fine * norm;
    // Relative to the integrand mass, so that integrals that cancel to zero are not held to rounding.
    let scale = linalg::max_abs(&fine).max(mass * norm.re);
    let change = linalg::max_abs(&(&fine - &coarse));
    let rel = if scale > 0.0 { change / scale } else { change };
    if rel > REFINEMENT_TOL {
        return Err(Error::QuadratureUnstable { coarse: linalg::trace(&coarse).re, fine: linalg::trace(&fine).re });
    }
    Ok(IntegrandDensity { value: fine, refinement_change: Some(rel), scale })
}

/// Residue density of a left-invariant expansion by sphere quadrature of its
/// degree `−(d+2)` component.
pub fn residue_density(p: &SymbolExpansion, spec: &QuadratureSpec) -> Result<ResidueDensity> {
    let shape = p.shape().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let degree = shape.group().critical_degree();
    match p.component(degree) {
        None => Ok(ResidueDensity::constant(CMat::zeros(shape.rank, shape.rank), 1.0, spec.measure, "symbolic")),
        Some(comp) => {
            let dens = integrand_density(comp, spec)?;
            let mut out = ResidueDensity::constant(dens.value, 1.0, spec.measure, "symbolic");
            out.refinement_change = dens.refinement_change;
            out.scale = dens.scale;
            Ok(out)
        }
    }
}

/// A kernel value at a group offset.
#[derive(Clone, Debug)]
pub struct KernelSample {
    pub offset: GroupPoint,
    pub value: Complex64,
}

/// Settings of the log-coefficient regression.
#[derive(Clone, Debug)]
pub struct LogFitConfig {
    /// Powers `t^p` absorbing the homogeneous terms.
    pub powers: Vec<f64>,
    pub constant: bool,
    /// The band is this multiple of the jackknife standard error.
    pub band_factor: f64,
    /// Raise `NonMonotoneResidual` instead of only reporting it.
    pub require_monotone_residuals: bool,
}

impl Default for LogFitConfig {
    fn default() -> Self {
        Self { powers: vec![-4.0], constant: true, band_factor: 3.0, require_monotone_residuals: false }
    }
}

/// Shell average of kernel samples.
#[derive(Clone, Debug, Serialize)]
pub struct Shell {
    pub radius: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    /// Shell mean of `log|q(y)|` with `q(y) = |y'|²/4 − i y_0`.
    pub mean_log_q: f64,
    pub count: usize,
}

/// Result of a log-coefficient fit.
#[derive(Clone, Debug, Serialize)]
pub struct LogFit {
    pub c_re: f64,
    pub c_im: f64,
    pub band: f64,
    pub shells: Vec<Shell>,
    pub residuals: Vec<f64>,
    pub residual_monotone: bool,
    /// Least-squares slope of `log |mean|` against `log t`.
    pub log_slope: f64,
    /// Coefficient of `log|q|` fitted on the same shells.
    pub beta0_re: f64,
    pub beta0_im: f64,
    pub method: &'static str,
}

impl LogFit {
    pub fn c(&self) -> Complex64 {
        Complex64::new(self.c_re, self.c_im)
    }

    pub fn beta0(&self) -> Complex64 {
        Complex64::new(self.beta0_re, self.beta0_im)
    }
}

fn group_shells(points: &[(f64, Complex64, f64)]) -> Vec<Shell> {
    let mut sorted: Vec<&(f64, Complex64, f64)> = points.iter().collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut shells: Vec<Vec<&(f64, Complex64, f64)>> = Vec::new();
    for p in sorted {
        match shells.last_mut() {
            Some(s) if (p.0 - s[0].0).abs() <= 1e-6 * s[0].0 => s.push(p),
            _ => shells.push(vec![p]),
        }
    }
    shells
        .into_iter()
        .map(|s| {
            let k = s.len() as f64;
            Shell {
                radius: s.iter().map(|p| p.0).sum::<f64>() / k,
                mean_re: s.iter().map(|p| p.1.re).sum::<f64>() / k,
                mean_im: s.iter().map(|p| p.1.im).sum::<f64>() / k,
                mean_log_q: s.iter().map(|p| p.2).sum::<f64>() / k,
                count: s.len(),
            }
        })
        .collect()
}

/// Solves the regression and returns the coefficient vector.
fn regress(design: &RMat, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    linalg::least_squares(design, rhs).ok_or_else(|| Error::Underdetermined("rank-deficient design".into()))
}

/// Fit of `mean(t) = Σ b_p t^p − c log t + b_0` on shells, with a
/// leave-one-shell-out jackknife band. `log_column(shell)` supplies the log
/// regressor; the coefficient on it is returned.
fn shell_fit(shells: &[Shell], cfg: &LogFitConfig, log_column: impl Fn(&Shell) -> f64) -> Result<(Complex64, f64, Vec<f64>)> {
    let cols = cfg.powers.len() + 1 + usize::from(cfg.constant);
    if shells.len() < cols + 1 {
        return Err(Error::Underdetermined(format!("{} shells for {cols} parameters", shells.len())));
    }
    let row = |s: &Shell| -> Vec<f64> {
        let mut r: Vec<f64> = cfg.powers.iter().map(|&p| s.radius.powf(p)).collect();
        r.push(log_column(s));
        if cfg.constant {
            r.push(1.0);
        }
        r
    };
    // Columns are scaled to unit size so that the SVD rank test is meaningful.
    let fit = |subset: &[&Shell]| -> Result<(Complex64, Vec<f64>)> {
        let mut a = RMat::from_fn(subset.len(), cols, |i, j| row(subset[i])[j]);
        let scales: Vec<f64> = (0..cols).map(|j| a.column(j).amax().max(1e-300)).collect();
        for j in 0..cols {
            let s = scales[j];
            a.column_mut(j).scale_mut(1.0 / s);
        }
        let re = DVector::from_iterator(subset.len(), subset.iter().map(|s| s.mean_re));
        let im = DVector::from_iterator(subset.len(), subset.iter().map(|s| s.mean_im));
        let xr = regress(&a, &re)?;
        let xi = regress(&a, &im)?;
        let res: Vec<f64> = (0..subset.len())
            .map(|i| {
                let pr: f64 = (0..cols).map(|j| a[(i, j)] * xr[j]).sum();
                let pi: f64 = (0..cols).map(|j| a[(i, j)] * xi[j]).sum();
                Complex64::new(re[i] - pr, im[i] - pi).norm()
            })
            .collect();
        let k = cfg.powers.len();
        Ok((Complex64::new(xr[k], xi[k]) / scales[k], res))
    };
    let all: Vec<&Shell> = shells.iter().collect();
    let (coef, residuals) = fit(&all)?;
    let leave_one: Vec<Complex64> = (0..shells.len())
        .map(|skip| {
            let sub: Vec<&Shell> = shells.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, s)| s).collect();
            fit(&sub).map(|x| x.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = leave_one.len() as f64;
    let mean: Complex64 = leave_one.iter().sum::<Complex64>() / s;
    let var = leave_one.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() * (s - 1.0) / s;
    Ok((coef, cfg.band_factor * var.sqrt(), residuals))
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0]) || v.windows(2).all(|w| w[1] >= w[0])
}

/// Log-coefficient fit of kernel samples on dilation shells.
///
/// Samples are grouped by `t = ‖φ(y)‖` into shells, averaged, and regressed on
/// `{t^p}`, `log t` and a constant; since each homogeneous kernel term averages
/// to a pure power of `t`, the coefficient of `−log t` isolates `c_P`. The band
/// is a multiple of the leave-one-shell-out jackknife error. The same shells are
/// regressed on `log|q|` to give `β₀`.
pub fn kernel_log_fit(samples: &[KernelSample], frame_map: &FrameMap, cfg: &LogFitConfig) -> Result<LogFit> {
    let points: Vec<(f64, Complex64, f64)> = samples
        .iter()
        .map(|s| {
            let y = frame_map.apply(&s.offset.coords);
            let h2: f64 = y[1..].iter().map(|x| x * x).sum();
            let q = Complex64::new(h2 / 4.0, -y[0]);
            (anisotropic_norm(&y), s.value, q.norm().ln())
        })
        .collect();
    let shells = group_shells(&points);
    if shells.len() < 4 {
        return Err(Error::TooFewShells { found: shells.len() });
    }
    let (coef, band, residuals) = shell_fit(&shells, cfg, |s| s.radius.ln())?;
    let (beta, _, _) = shell_fit(&shells, cfg, |s| s.mean_log_q)?;
    let residual_monotone = monotone(&residuals);
    if cfg.require_monotone_residuals && !residual_monotone {
        return Err(Error::NonMonotoneResidual(format!("{residuals:?}")));
    }
    let lt: Vec<f64> = shells.iter().map(|s| s.radius.ln()).collect();
    let la: Vec<f64> = shells.iter().map(|s| Complex64::new(s.mean_re, s.mean_im).norm().ln()).collect();
    let mx = lt.iter().sum::<f64>() / lt.len() as f64;
    let my = la.iter().sum::<f64>() / la.len() as f64;
    let sxy: f64 = lt.iter().zip(&la).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lt.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(LogFit {
        c_re: -coef.re,
        c_im: -coef.im,
        band,
        shells,
        residuals,
        residual_monotone,
        log_slope: sxy / sxx,
        beta0_re: beta.re,
        beta0_im: beta.im,
        method: "kernel-fit",
    })
}

/// Settings of the sector-trace fit.
#[derive(Clone, Debug)]
pub struct SectorFitConfig {
    /// Powers of `m` fitted beyond the one carrying the residue.
    pub extra_terms: usize,
    pub band_factor: f64,
    /// Smallest `|m|` entering the fit.
    pub min_sector: i64,
}

impl Default for SectorFitConfig {
    fn default() -> Self {
        Self { extra_terms: 3, band_factor: 3.0, min_sector: 2 }
    }
}

/// Result of the sector-trace fit.
#[derive(Clone, Debug, Serialize)]
pub struct SectorFit {
    pub c_re: f64,
    pub c_im: f64,
    pub band: f64,
    pub exponents: Vec<f64>,
    pub sectors_used: usize,
    pub method: &'static str,
}

impl SectorFit {
    pub fn c(&self) -> Complex64 {
        Complex64::new(self.c_re, self.c_im)
    }
}

/// Plancherel weight `(2π)^{−(n+1)} Δμ |μ_m|^n` of sector `m`, `μ_m = 2πm/P`.
pub fn plancherel_weight(m: i64, period: f64, n: usize) -> f64 {
    let dmu = 2.0 * PI / period;
    (2.0 * PI).powi(-(n as i32 + 1)) * dmu * (dmu * m.unsigned_abs() as f64).powi(n as i32)
}

/// Residue from the large-frequency behavior of sector traces.
///
/// With `g_m = ρ_m tr T_m` and `G_m = g_m + g_{−m}`, a left-invariant operator
/// of order `ord` has `G_m ~ Σ_j b_j m^{n + (ord − j)/2}`; the coefficient of
/// `m^{−1}` equals `c/2`. Rows are weighted by `m^{−e_0}`; the band comes from a
/// leave-one-dyadic-band-out jackknife.
pub fn sector_trace_fit(traces: &[(i64, Complex64)], period: f64, n: usize, order: i32, cfg: &SectorFitConfig) -> Result<SectorFit> {
    let d = 2 * n as i32;
    let j_res = order + d + 2;
    if j_res < 0 {
        let used = traces.iter().filter(|(m, _)| m.abs() >= cfg.min_sector).count();
        return Ok(SectorFit { c_re: 0.0, c_im: 0.0, band: 0.0, exponents: vec![], sectors_used: used, method: "sector-fit" });
    }
    let exponents: Vec<f64> = (0..=(j_res + cfg.extra_terms as i32)).map(|j| n as f64 + (order - j) as f64 / 2.0).collect();
    let k_res = j_res as usize;
    let mut mmax = 0;
    let mut pairs: std::collections::BTreeMap<i64, Complex64> = std::collections::BTreeMap::new();
    for &(m, t) in traces {
        if m.abs() >= cfg.min_sector {
            *pairs.entry(m.abs()).or_insert(Complex64::new(0.0, 0.0)) += t * plancherel_weight(m, period, n);
            mmax = mmax.max(m.abs());
        }
    }
    let rows: Vec<(i64, Complex64)> = pairs.into_iter().collect();
    let cols = exponents.len();
    if rows.len() < cols + 2 {
        return Err(Error::Underdetermined(format!("{} sectors for {cols} exponents", rows.len())));
    }
    let e0 = exponents[0];
    let fit = |subset: &[&(i64, Complex64)]| -> Result<Complex64> {
        let mut a = RMat::from_fn(subset.len(), cols, |i, j| {
            let m = subset[i].0 as f64;
            m.powf(exponents[j] - e0)
        });
        let scales: Vec<f64> = (0..cols).map(|j| a.column(j).amax().max(1e-300)).collect();
        for j in 0..cols {
            let s = scales[j];
            a.column_mut(j).scale_mut(1.0 / s);
        }
        let w = |m: i64| (m as f64).powf(-e0);
        let re = DVector::from_iterator(subset.len(), subset.iter().map(|(m, g)| g.re * w(*m)));
        let im = DVector::from_iterator(subset.len(), subset.iter().map(|(m, g)| g.im * w(*m)));
        let xr = regress(&a, &re)?;
        let xi = regress(&a, &im)?;
        Ok(Complex64::new(xr[k_res], xi[k_res]) * (2.0 / scales[k_res]))
    };
    let all: Vec<&(i64, Complex64)> = rows.iter().collect();
    let chat = fit(&all)?;
    let band_of = |m: i64| 63 - (m as u64).leading_zeros();
    let bands: Vec<u32> = {
        let mut b: Vec<u32> = rows.iter().map(|(m, _)| band_of(*m)).collect();
        b.dedup();
        b
    };
    let mut jack = Vec::new();
    for &b in &bands {
        let sub: Vec<&(i64, Complex64)> = rows.iter().filter(|(m, _)| band_of(*m) != b).collect();
        if sub.len() >= cols + 1 {
            jack.push(fit(&sub)?);
        }
    }
    let band = if jack.len() >= 2 {
        let s = jack.len() as f64;
        let mean: Complex64 = jack.iter().sum::<Complex64>() / s;
        cfg.band_factor * (jack.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() * (s - 1.0) / s).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(SectorFit { c_re: chat.re, c_im: chat.im, band, exponents, sectors_used: rows.len(), method: "sector-fit" })
}

/// `|Res(AB) − Res(BA)|` with the scale `Σ ‖a_i‖_F ‖b_j‖_F` over the pairs
/// contributing to degree `−(d+2)`.
#[derive(Clone, Debug, Serialize)]
pub struct TraceDefect {
    pub defect: f64,
    pub scale: f64,
}

pub fn trace_property_check(a: &SymbolExpansion, b: &SymbolExpansion) -> Result<TraceDefect> {
    let shape = a.shape().or(b.shape()).ok_or_else(|| Error::InvalidArgument("empty operands".into()))?;
    let crit = shape.group().critical_degree();
    let cut = |e: &SymbolExpansion| SymbolExpansion { components: e.components.clone(), truncation_degree: crit };
    let (a, b) = (cut(a), cut(b));
    let ab = residue(&expansion_mul(&a, &b)?);
    let ba = residue(&expansion_mul(&b, &a)?);
    let norm = 2.0 * (2.0 * PI).powi(-(shape.n as i32 + 1));
    let mut scale = 0.0;
    for x in &a.components {
        for y in &b.components {
            if x.degree + y.degree == crit {
                scale += norm
                    * (linalg::fro(&x.fiber_plus) * linalg::fro(&y.fiber_plus)
                        + linalg::fro(&x.fiber_minus) * linalg::fro(&y.fiber_minus));
            }
        }
    }
    Ok(TraceDefect { defect: (ab - ba).norm(), scale })
}

/// `L(S) = −Res S / 2`.
#[allow(non_snake_case)]
pub fn szego_L(res_s: f64) -> f64 {
    -0.5 * res_s
}

/// A degree-0 idempotent symbol together with its coefficient bundle rank.
#[derive(Clone, Debug)]
pub struct IdempotentPair {
    pub symbol: HomogeneousSymbol,
    pub bundle_rank: usize,
    pub trivialization_note: String,
}

impl IdempotentPair {
    pub fn new(symbol: HomogeneousSymbol, trivialization_note: impl Into<String>) -> Result<Self> {
        if symbol.degree != 0 {
            return Err(Error::InvalidArgument("idempotent pairs have degree 0".into()));
        }
        let defect = symbol_idempotency_defect(&symbol)?;
        if defect > IDEMPOTENT_TOL {
            return Err(Error::IdempotencyDefect { defect });
        }
        let bundle_rank = symbol.shape.rank;
        Ok(Self { symbol, bundle_rank, trivialization_note: trivialization_note.into() })
    }

    /// `(π₁ ⊕ π₂, ℰ₁ ⊕ ℰ₂)`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        Self::new(
            direct_sum_symbol(&self.symbol, &other.symbol)?,
            format!("{} ⊕ {}", self.trivialization_note, other.trivialization_note),
        )
    }
}

/// Random lower-order terms of degrees `−1, …, −(d+2)` drawn from `seed`.
pub fn lower_terms_for_seed(shape: SymbolShape, seed: u64, amplitude: f64) -> SymbolExpansion {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let crit = shape.group().critical_degree();
    let degrees: Vec<i32> = (crit..=-1).rev().collect();
    random_expansion(&mut rng, shape, &degrees, crit).scale(c(amplitude))
}

/// Residues of projections built from one idempotent pair with several lower-term seeds.
#[derive(Clone, Debug, Serialize)]
pub struct RhoReport {
    pub seeds: Vec<u64>,
    pub residues_re: Vec<f64>,
    pub residues_im: Vec<f64>,
    pub value: f64,
    pub spread: f64,
    pub tolerance: f64,
}

/// `ρ_R(π, ℰ)`: the residue of a projection realizing the pair, measured for
/// each seed. The reported value is the mean; the spread is reported, not assumed.
#[allow(non_snake_case)]
pub fn rho_R(pair: &IdempotentPair, seeds: &[u64], amplitude: f64) -> Result<RhoReport> {
    let shape = pair.symbol.shape;
    let res: Vec<Complex64> = seeds
        .par_iter()
        .map(|&s| {
            let lower = lower_terms_for_seed(shape, s, amplitude);
            projection_from_symbol(&pair.symbol, Some(&lower), FromSymbolOptions::default()).map(|p| p.residue())
        })
        .collect::<Result<Vec<_>>>()?;
    let re: Vec<f64> = res.iter().map(|z| z.re).collect();
    let spread = res.iter().flat_map(|a| res.iter().map(move |b| (a - b).norm())).fold(0.0, f64::max);
    Ok(RhoReport {
        seeds: seeds.to_vec(),
        residues_re: re.clone(),
        residues_im: res.iter().map(|z| z.im).collect(),
        value: re.iter().sum::<f64>() / re.len().max(1) as f64,
        spread,
        tolerance: 1e-6,
    })
}
