//! Compact quotient of the three-dimensional Heisenberg group, realized
//! spectrally.
//!
//! Functions on the quotient split into central Fourier sectors `m`, on which
//! `X_0` acts as `iμ_m` with `μ_m = 2πm/P`. Each nonzero sector carries the
//! Schrödinger representation at `μ_m`, truncated to `N` Hermite levels, where
//! `X_1`, `X_2` act by ladder operators; the sector `m = 0` is the torus of
//! horizontal Fourier modes, truncated to a `K × K` grid. Left-invariant
//! operators act sector by sector.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::group::GroupPoint;
use crate::hermite::{displacement, displacement_ladder, frame_fiber, sign_pattern, HermiteSpace};
use crate::linalg::{self, c, CMat, CVec, I};
use crate::projection::riesz_projection;
use crate::symbol::{HomogeneousSymbol, SymbolExpansion};
use crate::{Error, Result};

/// Model sizes as read from configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilmanifoldConfig {
    pub period: f64,
    #[serde(rename = "M")]
    pub sectors: i64,
    #[serde(rename = "N")]
    pub hermite_cutoff: usize,
    #[serde(rename = "K")]
    pub abelian_grid: usize,
}

impl Default for NilmanifoldConfig {
    fn default() -> Self {
        Self { period: 2.0 * PI, sectors: 16, hermite_cutoff: 16, abelian_grid: 8 }
    }
}

impl NilmanifoldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidArgument(format!("central period {}", self.period)));
        }
        if self.sectors < 4 || self.hermite_cutoff < 16 || self.abelian_grid < 8 {
            return Err(Error::InvalidArgument(format!(
                "model sizes M = {}, N = {}, K = {} below the minimum (4, 16, 8)",
                self.sectors, self.hermite_cutoff, self.abelian_grid
            )));
        }
        if self.abelian_grid % 2 != 0 {
            return Err(Error::InvalidArgument("K must be even".into()));
        }
        Ok(())
    }
}

/// The quotient `Γ\H³` with `Γ` generated by `(P, 0, 0)`, `(0, h, 0)`,
/// `(0, 0, h)` and `h² = 2P`, so that the horizontal generators commute up to
/// a central lattice element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NilmanifoldModel {
    pub central_period: f64,
    pub sector_max: i64,
    pub hermite_cutoff: usize,
    pub abelian_grid: usize,
    pub horizontal_period: f64,
    pub volume: f64,
}

pub fn build_model(config: &NilmanifoldConfig) -> Result<NilmanifoldModel> {
    config.validate()?;
    let h = (2.0 * config.period).sqrt();
    Ok(NilmanifoldModel {
        central_period: config.period,
        sector_max: config.sectors,
        hermite_cutoff: config.hermite_cutoff,
        abelian_grid: config.abelian_grid,
        horizontal_period: h,
        volume: config.period * h * h,
    })
}

impl NilmanifoldModel {
    pub fn config(&self) -> NilmanifoldConfig {
        NilmanifoldConfig {
            period: self.central_period,
            sectors: self.sector_max,
            hermite_cutoff: self.hermite_cutoff,
            abelian_grid: self.abelian_grid,
        }
    }

    /// Central frequency `μ_m = 2πm/P`.
    pub fn mu(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.central_period
    }

    pub fn sectors(&self) -> impl Iterator<Item = i64> {
        -self.sector_max..=self.sector_max
    }

    pub fn sector_count(&self) -> usize {
        (2 * self.sector_max + 1) as usize
    }

    pub fn index(&self, m: i64) -> usize {
        (m + self.sector_max) as usize
    }

    /// Horizontal Fourier modes `(k_1, k_2)` of the abelian sector, row-major.
    pub fn abelian_modes(&self) -> Vec<[i64; 2]> {
        let k = self.abelian_grid as i64;
        let mut out = Vec::with_capacity((k * k) as usize);
        for a in -k / 2..k / 2 {
            for b in -k / 2..k / 2 {
                out.push([a, b]);
            }
        }
        out
    }

    /// Horizontal frequency `2πk/h` of an abelian mode.
    pub fn abelian_frequency(&self, k: [i64; 2]) -> [f64; 2] {
        let s = 2.0 * PI / self.horizontal_period;
        [s * k[0] as f64, s * k[1] as f64]
    }

    pub fn sector_dim(&self, m: i64, rank: usize) -> usize {
        if m == 0 {
            rank * self.abelian_grid * self.abelian_grid
        } else {
            rank * self.hermite_cutoff
        }
    }

    /// Indices of the resolved sub-block of a sector: Hermite levels below
    /// `N/2` in every rank block, and the whole abelian sector.
    pub fn resolved_indices(&self, m: i64, rank: usize) -> Vec<usize> {
        if m == 0 {
            return (0..self.sector_dim(0, rank)).collect();
        }
        let n = self.hermite_cutoff;
        (0..rank).flat_map(|a| (0..n / 2).map(move |k| a * n + k)).collect()
    }

    /// Offsets must satisfy `‖y‖ < 0.1 P`.
    pub fn check_injectivity(&self, y: &GroupPoint) -> Result<()> {
        let r = crate::symbol::anisotropic_norm(&y.coords);
        if y.n() != 1 || !(r < 0.1 * self.central_period) {
            return Err(Error::InvalidArgument(format!(
                "offset {:?} outside the injectivity box ‖y‖ < {}",
                y.coords,
                0.1 * self.central_period
            )));
        }
        Ok(())
    }

    /// Action of the frame field `X_field` (`0`, `1` or `2`) on every sector.
    pub fn frame_action(&self, field: usize) -> Result<SectorOperator> {
        if field > 2 {
            return Err(Error::InvalidArgument(format!("frame index {field} out of range")));
        }
        let space = HermiteSpace::new(1, self.hermite_cutoff);
        let modes = self.abelian_modes();
        let per_sector = self
            .sectors()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&m| {
                if m == 0 {
                    let diag: Vec<Complex64> = modes
                        .iter()
                        .map(|&k| if field == 0 { c(0.0) } else { I * self.abelian_frequency(k)[field - 1] })
                        .collect();
                    CMat::from_diagonal(&CVec::from_vec(diag))
                } else {
                    let mu = self.mu(m);
                    let sign: i8 = if m > 0 { 1 } else { -1 };
                    let scale = if field == 0 { mu.abs() } else { mu.abs().sqrt() };
                    frame_fiber(&space, field, sign) * c(scale)
                }
            })
            .collect();
        Ok(SectorOperator { per_sector, sector_max: self.sector_max, rank: 1, symbol_tag: Some(format!("X{field}")) })
    }
}

/// A left-invariant operator on the quotient, one matrix per sector `m ∈ [−M, M]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorOperator {
    pub per_sector: Vec<CMat>,
    pub sector_max: i64,
    /// Rank of the bundle the operator acts on; sector bases are rank-major.
    pub rank: usize,
    pub symbol_tag: Option<String>,
}

impl SectorOperator {
    pub fn sector(&self, m: i64) -> &CMat {
        &self.per_sector[(m + self.sector_max) as usize]
    }

    pub fn sectors(&self) -> impl Iterator<Item = (i64, &CMat)> {
        let mm = self.sector_max;
        self.per_sector.iter().enumerate().map(move |(i, a)| (i as i64 - mm, a))
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat + Sync + Send) -> Self {
        Self { per_sector: self.per_sector.par_iter().map(f).collect(), ..self.clone_meta() }
    }

    pub fn try_map(&self, f: impl Fn(&CMat) -> Result<CMat> + Sync + Send) -> Result<Self> {
        Ok(Self { per_sector: self.per_sector.par_iter().map(f).collect::<Result<Vec<_>>>()?, ..self.clone_meta() })
    }

    pub fn try_zip(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> Result<CMat> + Sync + Send) -> Result<Self> {
        self.check_same(other)?;
        let per_sector =
            self.per_sector.par_iter().zip(&other.per_sector).map(|(a, b)| f(a, b)).collect::<Result<Vec<_>>>()?;
        Ok(Self { per_sector, ..self.clone_meta() })
    }

    fn clone_meta(&self) -> Self {
        Self { per_sector: Vec::new(), sector_max: self.sector_max, rank: self.rank, symbol_tag: self.symbol_tag.clone() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.sector_max != other.sector_max || self.per_sector.len() != other.per_sector.len() {
            return Err(Error::DimensionMismatch("sector operators on different models".into()));
        }
        for (a, b) in self.per_sector.iter().zip(&other.per_sector) {
            if a.shape() != b.shape() {
                return Err(Error::DimensionMismatch(format!("sector sizes {:?} vs {:?}", a.shape(), b.shape())));
            }
        }
        Ok(())
    }

    /// Sector-wise composition; sector blocks may be rectangular.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.sector_max != other.sector_max || self.per_sector.len() != other.per_sector.len() {
            return Err(Error::DimensionMismatch("sector operators on different models".into()));
        }
        let per_sector = self
            .per_sector
            .par_iter()
            .zip(&other.per_sector)
            .map(|(a, b)| {
                if a.ncols() != b.nrows() {
                    return Err(Error::DimensionMismatch(format!("cannot compose {:?} with {:?}", a.shape(), b.shape())));
                }
                Ok(a * b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_sector, ..self.clone_meta() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.try_zip(other, |a, b| Ok(a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.try_zip(other, |a, b| Ok(a - b))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.map(|a| a * z)
    }

    pub fn identity_like(&self) -> Self {
        self.map(|a| CMat::identity(a.nrows(), a.ncols()))
    }

    pub fn adjoint(&self) -> Self {
        self.map(|a| a.adjoint())
    }

    pub fn max_abs(&self) -> f64 {
        self.per_sector.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Largest entry of `f(sector)` over resolved sub-blocks.
    pub fn resolved_max(&self, model: &NilmanifoldModel, f: impl Fn(&CMat) -> CMat + Sync) -> f64 {
        self.sectors()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(m, a)| {
                let idx = model.resolved_indices(m, self.rank);
                linalg::max_abs(&linalg::select(&f(a), &idx, &idx))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max ‖A_m² − A_m‖` over resolved sub-blocks.
    pub fn idempotency_defect(&self, model: &NilmanifoldModel) -> f64 {
        self.resolved_max(model, |a| a * a - a)
    }

    /// `max ‖A_m − A_m*‖` over all sectors.
    pub fn hermitian_defect(&self) -> f64 {
        self.per_sector.iter().map(linalg::hermitian_defect).fold(0.0, f64::max)
    }

    /// Trace of each sector.
    pub fn traces(&self) -> Vec<(i64, Complex64)> {
        self.sectors().map(|(m, a)| (m, linalg::trace(a))).collect()
    }
}

/// Lift of a left-invariant expansion: on sector `m ≠ 0` the component of
/// degree `j` contributes `|μ_m|^{j/2}` times its fiber at `sign m`; on the
/// abelian sector each Fourier mode `k ≠ 0` receives the equatorial value of
/// the symbol at `ξ' = 2πk/h`, and the mode `k = 0` the mean equatorial value
/// of the degree-0 component.
pub fn lift(expansion: &SymbolExpansion, model: &NilmanifoldModel) -> Result<SectorOperator> {
    let shape = expansion.shape().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    if shape.n != 1 {
        return Err(Error::UnsupportedDimension { n: shape.n });
    }
    if shape.cutoff != model.hermite_cutoff {
        return Err(Error::DimensionMismatch(format!(
            "symbol cutoff {} but model cutoff {}",
            shape.cutoff, model.hermite_cutoff
        )));
    }
    let rank = shape.rank;
    let modes = model.abelian_modes();
    let sectors: Vec<i64> = model.sectors().collect();
    let per_sector = sectors
        .par_iter()
        .map(|&m| {
            if m == 0 {
                abelian_block(&expansion.components, model, &modes, rank)
            } else {
                let mu = model.mu(m).abs();
                let sign: i8 = if m > 0 { 1 } else { -1 };
                let dim = shape.fiber_dim();
                let mut out = CMat::zeros(dim, dim);
                for comp in &expansion.components {
                    out += comp.fiber(sign) * c(mu.powf(comp.degree as f64 / 2.0));
                }
                out
            }
        })
        .collect();
    Ok(SectorOperator { per_sector, sector_max: model.sector_max, rank, symbol_tag: Some(describe(expansion)) })
}

fn describe(e: &SymbolExpansion) -> String {
    let degs: Vec<String> = e.degrees().iter().map(|d| d.to_string()).collect();
    format!("expansion(degrees [{}], truncation {})", degs.join(", "), e.truncation_degree)
}

fn abelian_block(comps: &[HomogeneousSymbol], model: &NilmanifoldModel, modes: &[[i64; 2]], rank: usize) -> CMat {
    let kk = modes.len();
    let mut out = CMat::zeros(rank * kk, rank * kk);
    for comp in comps {
        let Some(trace) = &comp.abelian else { continue };
        for (idx, &k) in modes.iter().enumerate() {
            let value = if k == [0, 0] {
                if comp.degree != 0 {
                    continue;
                }
                let mut mean = CMat::zeros(rank, rank);
                for s in &trace.samples {
                    mean += s;
                }
                mean / c(trace.samples.len() as f64)
            } else {
                let xi = model.abelian_frequency(k);
                let rho = (xi[0].powi(4) + xi[1].powi(4)).powf(0.25);
                let alpha = xi[1].atan2(xi[0]).rem_euclid(2.0 * PI);
                trace.eval_angle(alpha) * c(rho.powi(comp.degree))
            };
            for a in 0..rank {
                for b in 0..rank {
                    out[(a * kk + idx, b * kk + idx)] += value[(a, b)];
                }
            }
        }
    }
    out
}

/// Circle `|z − center| = radius` enclosing the part of the spectrum to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
}

impl SpectralWindow {
    pub fn around(center: f64, radius: f64) -> Self {
        Self { center_re: center, center_im: 0.0, radius }
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(self.center_re, self.center_im)
    }
}

/// Riesz projection of every sector onto the spectrum inside the window.
pub fn spectral_kernel_projection(op: &SectorOperator, window: &SpectralWindow) -> Result<SectorOperator> {
    let mm = op.sector_max;
    let per_sector = op
        .per_sector
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            riesz_projection(a, window.center(), window.radius).map_err(|e| match e {
                Error::ContourHitsSpectrum { distance, .. } => {
                    Error::ContourHitsSpectrum { distance, sector: Some(i as i64 - mm) }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorOperator { per_sector, ..op.clone_meta() })
}

/// Options of the near-diagonal kernel reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Fraction of the top sectors and Hermite levels covered by the cosine taper.
    pub taper_fraction: f64,
    /// Allowed ratio of the tail (tapered sectors) to the total.
    pub tail_tolerance: f64,
    /// Adds the abelian sector with weight `1/vol`; it carries no Plancherel mass
    /// and is left out by default.
    pub include_abelian: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { taper_fraction: 0.2, tail_tolerance: 1e-4, include_abelian: false }
    }
}

/// `1` below `(1 − fraction)·top`, then a half cosine down to `0` past `top`.
pub fn cosine_taper(index: f64, top: f64, fraction: f64) -> f64 {
    let start = (1.0 - fraction) * top;
    if index <= start || fraction <= 0.0 {
        return 1.0;
    }
    let x = ((index - start) / (top + 1.0 - start)).min(1.0);
    0.5 * (1.0 + (PI * x).cos())
}

/// Plancherel weight `(2π)^{−2} Δμ |μ_m|` of sector `m`.
pub fn sector_weight(model: &NilmanifoldModel, m: i64) -> f64 {
    crate::residue::plancherel_weight(m, model.central_period, 1)
}

/// Displacement parameter of `π_μ(0, y')` on sector `m`.
pub fn sector_beta(model: &NilmanifoldModel, m: i64, y: &[f64]) -> Complex64 {
    let mu = model.mu(m);
    let sign: i8 = if mu > 0.0 { 1 } else { -1 };
    let (s1, s2) = sign_pattern(sign);
    let r = mu.abs().sqrt();
    let u = s1 * r * y[1];
    let v = s2 * r * y[2];
    Complex64::new(-v, u) / std::f64::consts::SQRT_2
}

fn taper_matrix(a: &CMat, n: usize, fraction: f64) -> CMat {
    let w: Vec<f64> = (0..n).map(|k| cosine_taper(k as f64, (n - 1) as f64, fraction)).collect();
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (w[i % n] * w[j % n]).sqrt())
}

/// Kernel `k(y) = Σ_{m≠0} ρ_m w_m tr(T_m π_{μ_m}(y))` at each offset, traced
/// over the bundle rank.
///
/// `ρ_m` is the Plancherel weight and `w_m` a cosine taper over the top
/// sectors; the Hermite levels of each sector are tapered the same way. The
/// tail, the absolute sum over tapered sectors, must stay below
/// `tail_tolerance` times the modulus of the result.
pub fn reconstruct_kernel(
    op: &SectorOperator,
    model: &NilmanifoldModel,
    offsets: &[GroupPoint],
    opts: &KernelOptions,
) -> Result<Vec<Complex64>> {
    check_model(op, model)?;
    for y in offsets {
        model.check_injectivity(y)?;
    }
    let n = model.hermite_cutoff;
    let mm = model.sector_max;
    let tapered: Vec<Option<CMat>> = op
        .sectors()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(m, a)| {
            if m == 0 || linalg::max_abs(a) == 0.0 {
                None
            } else {
                Some(taper_matrix(a, n, opts.taper_fraction))
            }
        })
        .collect();
    let taper_start = ((1.0 - opts.taper_fraction) * mm as f64).floor() as i64;
    offsets
        .par_iter()
        .map(|y| {
            let mut total = Complex64::new(0.0, 0.0);
            let mut tail = 0.0;
            for m in model.sectors() {
                let Some(t) = &tapered[model.index(m)] else { continue };
                let w = sector_weight(model, m) * cosine_taper(m.abs() as f64, mm as f64, opts.taper_fraction);
                if w == 0.0 {
                    continue;
                }
                let d = displacement(sector_beta(model, m, &y.coords), n);
                let mut tr = Complex64::new(0.0, 0.0);
                for a in 0..op.rank {
                    for i in 0..n {
                        for j in 0..n {
                            tr += t[(a * n + i, a * n + j)] * d[(j, i)];
                        }
                    }
                }
                let term = tr * Complex64::from_polar(w, model.mu(m) * y.coords[0]);
                total += term;
                if m.abs() > taper_start {
                    tail += term.norm();
                }
            }
            if opts.include_abelian {
                total += abelian_kernel(op.sector(0), model, op.rank, y);
            }
            if tail > opts.tail_tolerance * total.norm() && tail > 0.0 {
                return Err(Error::TailNotConverged { tail, total: total.norm() });
            }
            Ok(total)
        })
        .collect()
}

fn abelian_kernel(t: &CMat, model: &NilmanifoldModel, rank: usize, y: &GroupPoint) -> Complex64 {
    let modes = model.abelian_modes();
    let kk = modes.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, &k) in modes.iter().enumerate() {
        let f = model.abelian_frequency(k);
        let phase = Complex64::from_polar(1.0, f[0] * y.coords[1] + f[1] * y.coords[2]);
        for a in 0..rank {
            acc += t[(a * kk + idx, a * kk + idx)] * phase;
        }
    }
    acc / model.volume
}

fn check_model(op: &SectorOperator, model: &NilmanifoldModel) -> Result<()> {
    if op.sector_max != model.sector_max || op.per_sector.len() != model.sector_count() {
        return Err(Error::DimensionMismatch("operator and model have different sector ranges".into()));
    }
    for (m, a) in op.sectors() {
        let d = model.sector_dim(m, op.rank);
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch(format!("sector {m} has size {:?}, expected {d}", a.shape())));
        }
    }
    Ok(())
}

/// A rank-one term `|u⟩⟨v|` placed in sector `m` (rank-one bundle).
#[derive(Clone, Debug)]
pub struct OuterTerm {
    pub sector: i64,
    pub u: CVec,
    pub v: CVec,
}

/// Kernel of a finite sum of rank-one sector terms, evaluated as
/// `ρ_m w_m ⟨v, (taper)π(y)(taper)u⟩` with Laguerre matrix elements. An
/// independent evaluation for [`reconstruct_kernel`].
pub fn outer_product_kernel(
    terms: &[OuterTerm],
    model: &NilmanifoldModel,
    offsets: &[GroupPoint],
    opts: &KernelOptions,
) -> Vec<Complex64> {
    let n = model.hermite_cutoff;
    let mm = model.sector_max;
    let lw: Vec<f64> =
        (0..n).map(|k| cosine_taper(k as f64, (n - 1) as f64, opts.taper_fraction).sqrt()).collect();
    offsets
        .iter()
        .map(|y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in terms {
                let w = sector_weight(model, t.sector) * cosine_taper(t.sector.abs() as f64, mm as f64, opts.taper_fraction);
                let d = displacement_ladder(sector_beta(model, t.sector, &y.coords), n);
                let u = CVec::from_fn(n, |k, _| t.u[k] * lw[k]);
                let v = CVec::from_fn(n, |k, _| t.v[k] * lw[k]);
                let du = &d * u;
                let inner: Complex64 = v.iter().zip(du.iter()).map(|(a, b)| a.conj() * b).sum();
                acc += inner * Complex64::from_polar(w, model.mu(t.sector) * y.coords[0]);
            }
            acc
        })
        .collect()
}

/// Sector operator of a finite sum of rank-one terms.
pub fn outer_product_operator(terms: &[OuterTerm], model: &NilmanifoldModel) -> SectorOperator {
    let mut per_sector: Vec<CMat> =
        model.sectors().map(|m| CMat::zeros(model.sector_dim(m, 1), model.sector_dim(m, 1))).collect();
    for t in terms {
        per_sector[model.index(t.sector)] += &t.u * t.v.adjoint();
    }
    SectorOperator { per_sector, sector_max: model.sector_max, rank: 1, symbol_tag: None }
}

/// Conjugation `π(g) T π(g)⁻¹` of every sector by the translation `g`.
pub fn conjugate_by_translation(op: &SectorOperator, model: &NilmanifoldModel, g: &GroupPoint) -> Result<SectorOperator> {
    check_model(op, model)?;
    let n = model.hermite_cutoff;
    let modes = model.abelian_modes();
    let kk = modes.len();
    let big = n + 48;
    let per_sector = op
        .sectors()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(m, a)| {
            if m == 0 {
                let mut out = a.clone();
                for (i, &ki) in modes.iter().enumerate() {
                    for (j, &kj) in modes.iter().enumerate() {
                        let fi = model.abelian_frequency(ki);
                        let fj = model.abelian_frequency(kj);
                        let ph = (fi[0] - fj[0]) * g.coords[1] + (fi[1] - fj[1]) * g.coords[2];
                        for r1 in 0..op.rank {
                            for r2 in 0..op.rank {
                                out[(r1 * kk + i, r2 * kk + j)] *= Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                }
                out
            } else {
                // Displacements couple all levels; the conjugate is computed in a
                // larger space and compressed back.
                let d = displacement(sector_beta(model, m, &g.coords), big);
                let mut out = CMat::zeros(a.nrows(), a.ncols());
                for r1 in 0..op.rank {
                    for r2 in 0..op.rank {
                        let mut block = CMat::zeros(big, big);
                        for i in 0..n {
                            for j in 0..n {
                                block[(i, j)] = a[(r1 * n + i, r2 * n + j)];
                            }
                        }
                        let conj = &d * block * d.adjoint();
                        for i in 0..n {
                            for j in 0..n {
                                out[(r1 * n + i, r2 * n + j)] = conj[(i, j)];
                            }
                        }
                    }
                }
                out
            }
        })
        .collect();
    Ok(SectorOperator { per_sector, ..op.clone_meta() })
}

/// Horizontal grid for the convolution oracle: `points × points` nodes with
/// spacing `length / points`, centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMesh {
    pub points: usize,
    pub length: f64,
}

impl Default for GridMesh {
    fn default() -> Self {
        Self { points: 64, length: 24.0 }
    }
}

/// Output of [`grid_convolution_oracle`].
#[derive(Clone, Debug)]
pub struct OracleProduct {
    /// Fiber of the product at `sign`, recovered from the convolved kernel.
    pub fiber: CMat,
    /// Largest fraction of grid energy at the Nyquist frequency or on the
    /// outer frame of the grid.
    pub alias_fraction: f64,
}

/// Brute-force composition at the fiber `λ = sign`.
///
/// The central variable is diagonalized exactly, so the group convolution of
/// the two kernels becomes the twisted convolution
/// `c(z) = (2π)⁻¹ ∫ a(x) b(z − x) e^{(iλ/2)(x_2 z_1 − x_1 z_2)} dx`
/// of `a(y') = tr(F_p π(0, y'))` and `b(y') = tr(F_q π(0, y'))`. The integral
/// is a direct periodic sum on the mesh, and the product fiber is recovered
/// through `F = (2π)⁻¹ ∫ c(z) π(0, z)* dz`. Rank one and `n = 1` only.
pub fn grid_convolution_oracle(p: &HomogeneousSymbol, q: &HomogeneousSymbol, sign: i8, mesh: &GridMesh) -> Result<OracleProduct> {
    if p.shape != q.shape {
        return Err(Error::DimensionMismatch("oracle operands differ in shape".into()));
    }
    if p.shape.n != 1 || p.shape.rank != 1 {
        return Err(Error::UnsupportedDimension { n: p.shape.n });
    }
    if mesh.points < 8 || mesh.points % 2 != 0 || !(mesh.length > 0.0) {
        return Err(Error::InvalidArgument(format!("mesh {mesh:?}")));
    }
    let n = p.shape.cutoff;
    let mp = mesh.points;
    let hs = mesh.length / mp as f64;
    let lam = if sign > 0 { 1.0 } else { -1.0 };
    let (s1, s2) = sign_pattern(sign);
    let pos = |i: usize| (i as f64 - (mp / 2) as f64) * hs;
    let beta = |z1: f64, z2: f64| Complex64::new(-s2 * z2, s1 * z1) / std::f64::consts::SQRT_2;
    let grid: Vec<(usize, usize)> = (0..mp).flat_map(|i| (0..mp).map(move |j| (i, j))).collect();
    let fp = p.fiber(sign);
    let fq = q.fiber(sign);
    let coeffs: Vec<(Complex64, Complex64)> = grid
        .par_iter()
        .map(|&(i, j)| {
            let d = displacement_ladder(beta(pos(i), pos(j)), n);
            (crate::hermite::trace_product(fp, &d), crate::hermite::trace_product(fq, &d))
        })
        .collect();
    let a: Vec<Complex64> = coeffs.iter().map(|x| x.0).collect();
    let b: Vec<Complex64> = coeffs.iter().map(|x| x.1).collect();
    let alias_fraction = alias_energy(&a, mp).max(alias_energy(&b, mp));
    if alias_fraction > 0.01 {
        return Err(Error::MeshTooCoarse { fraction: alias_fraction });
    }
    let half = mp / 2;
    let conv: Vec<Complex64> = grid
        .par_iter()
        .map(|&(i, j)| {
            let (z1, z2) = (pos(i), pos(j));
            let mut acc = Complex64::new(0.0, 0.0);
            for (xi, xj) in grid.iter().copied() {
                let ax = a[xi * mp + xj];
                if ax == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let di = (i + mp + half - xi) % mp;
                let dj = (j + mp + half - xj) % mp;
                let (x1, x2) = (pos(xi), pos(xj));
                let phase = Complex64::from_polar(1.0, 0.5 * lam * (x2 * z1 - x1 * z2));
                acc += ax * b[di * mp + dj] * phase;
            }
            acc * (hs * hs / (2.0 * PI))
        })
        .collect();
    let parts: Vec<CMat> = grid
        .par_iter()
        .map(|&(i, j)| displacement_ladder(-beta(pos(i), pos(j)), n) * conv[i * mp + j])
        .collect();
    let mut fiber = CMat::zeros(n, n);
    for t in &parts {
        fiber += t;
    }
    fiber *= c(hs * hs / (2.0 * PI));
    Ok(OracleProduct { fiber, alias_fraction })
}

/// Fraction of `Σ|f|²` sitting on the outer frame of the grid or at the
/// Nyquist frequency of either axis.
fn alias_energy(f: &[Complex64], mp: usize) -> f64 {
    let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut frame = 0.0;
    for i in 0..mp {
        for j in 0..mp {
            if i == 0 || j == 0 || i == mp - 1 || j == mp - 1 {
                frame += f[i * mp + j].norm_sqr();
            }
        }
    }
    // Nyquist component along each axis: alternating sums, normalized so that
    // a pure Nyquist mode carries its whole energy (Parseval).
    let mut nyq = 0.0;
    for j in 0..mp {
        let s: Complex64 = (0..mp).map(|i| f[i * mp + j] * if i % 2 == 0 { 1.0 } else { -1.0 }).sum();
        nyq += s.norm_sqr() / mp as f64;
    }
    for i in 0..mp {
        let s: Complex64 = (0..mp).map(|j| f[i * mp + j] * if j % 2 == 0 { 1.0 } else { -1.0 }).sum();
        nyq += s.norm_sqr() / mp as f64;
    }
    (frame / total).max(nyq / total)
}

/// Sector traces `(m, tr T_m)` of the nonzero sectors.
pub fn sector_traces(op: &SectorOperator) -> Vec<(i64, Complex64)> {
    op.traces().into_iter().filter(|(m, _)| *m != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{expansion_mul, random_expansion, random_symbol, star, SymbolShape, EXACT_TRUNCATION};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(m: i64, n: usize) -> NilmanifoldModel {
        build_model(&NilmanifoldConfig { period: 1.0, sectors: m, hermite_cutoff: n, abelian_grid: 8 }).unwrap()
    }

    #[test]
    fn config_rejects_small_sizes() {
        let bad = NilmanifoldConfig { period: 1.0, sectors: 3, hermite_cutoff: 16, abelian_grid: 8 };
        assert!(build_model(&bad).is_err());
        let bad = NilmanifoldConfig { period: 1.0, sectors: 4, hermite_cutoff: 12, abelian_grid: 8 };
        assert!(build_model(&bad).is_err());
    }

    #[test]
    fn central_field_is_diagonal() {
        let md = model(4, 16);
        let x0 = md.frame_action(0).unwrap();
        let expect = CMat::identity(16, 16) * (I * 6.0 * PI);
        assert!(linalg::max_abs(&(x0.sector(3) - expect)) < 1e-12);
    }

    #[test]
    fn frame_commutator_on_every_sector() {
        let md = model(5, 16);
        let x: Vec<SectorOperator> = (0..3).map(|f| md.frame_action(f).unwrap()).collect();
        let comm = x[1].mul(&x[2]).unwrap().sub(&x[2].mul(&x[1]).unwrap()).unwrap();
        let target = x[0].scale(c(-1.0));
        // The last Hermite level is cut off; the relation holds on the rest.
        for (m, a) in comm.sectors() {
            let keep: Vec<usize> = (0..md.sector_dim(m, 1) - if m == 0 { 0 } else { 1 }).collect();
            let d = linalg::select(&(a - target.sector(m)), &keep, &keep);
            assert!(linalg::max_abs(&d) < 1e-12, "sector {m}");
        }
    }

    #[test]
    fn lift_of_unit_is_identity() {
        let md = model(4, 16);
        let u = lift(&SymbolExpansion::unit(SymbolShape::new(1, 1, 16)), &md).unwrap();
        for (_, a) in u.sectors() {
            assert!(linalg::max_abs(&(a - CMat::identity(a.nrows(), a.ncols()))) < 1e-12);
        }
    }

    #[test]
    fn lift_is_multiplicative_on_resolved_blocks() {
        let md = model(4, 16);
        let shape = SymbolShape::new(1, 1, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let p = random_expansion(&mut rng, shape, &[0, -1, -2], EXACT_TRUNCATION);
            let q = random_expansion(&mut rng, shape, &[1, 0], EXACT_TRUNCATION);
            let pq = lift(&expansion_mul(&p, &q).unwrap(), &md).unwrap();
            let prod = lift(&p, &md).unwrap().mul(&lift(&q, &md).unwrap()).unwrap();
            for (m, a) in pq.sectors() {
                if m == 0 {
                    continue;
                }
                let idx = md.resolved_indices(m, 1);
                let d = linalg::select(&(a - prod.sector(m)), &idx, &idx);
                assert!(linalg::max_abs(&d) < 1e-10 * (1.0 + linalg::max_abs(a)), "sector {m}");
            }
        }
    }

    #[test]
    fn spectral_projection_of_number_operator() {
        let md = model(4, 16);
        let space = HermiteSpace::new(1, 16);
        let num = space.number();
        let sym = HomogeneousSymbol::new(2, SymbolShape::new(1, 1, 16), num.clone(), num.clone() + CMat::identity(16, 16))
            .unwrap();
        let op = lift(&SymbolExpansion::single(sym), &md).unwrap();
        let nonzero = op.map(|a| a.clone());
        let mut nz = nonzero.clone();
        nz.per_sector[md.index(0)] = CMat::identity(64, 64);
        let proj = spectral_kernel_projection(&nz, &SpectralWindow::around(0.0, 0.5)).unwrap();
        for (m, a) in proj.sectors() {
            let rank = linalg::trace(a).re.round() as i64;
            let expect = if m > 0 { 1 } else { 0 };
            assert_eq!(rank, expect, "sector {m}");
        }
        assert!(proj.idempotency_defect(&md) < 1e-10);
        assert!(proj.hermitian_defect() < 1e-10);
        let empty = spectral_kernel_projection(&nz, &SpectralWindow::around(-10.0, 0.5)).unwrap();
        assert!(empty.max_abs() < 1e-12);
    }

    #[test]
    fn contour_through_spectrum_names_the_sector() {
        let md = model(4, 16);
        let x0 = md.frame_action(0).unwrap().scale(-I);
        let mut op = x0.clone();
        op.per_sector[md.index(0)] = CMat::identity(64, 64) * c(100.0);
        let w = SpectralWindow::around(0.0, 2.0 * PI * 2.0);
        match spectral_kernel_projection(&op, &w) {
            Err(Error::ContourHitsSpectrum { sector: Some(m), .. }) => assert_eq!(m.abs(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kernel_matches_outer_product_oracle() {
        let md = model(6, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        let mut terms = Vec::new();
        for m in [1i64, -2, 3, 5] {
            let u = CVec::from_fn(16, |k, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (-0.3 * k as f64).exp());
            let v = CVec::from_fn(16, |k, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (-0.3 * k as f64).exp());
            terms.push(OuterTerm { sector: m, u, v });
        }
        let op = outer_product_operator(&terms, &md);
        let offsets: Vec<GroupPoint> =
            (0..5).map(|i| GroupPoint::new(vec![0.001 * i as f64, 0.02, -0.015 * i as f64]).unwrap()).collect();
        let opts = KernelOptions { tail_tolerance: 1e9, ..Default::default() };
        let k1 = reconstruct_kernel(&op, &md, &offsets, &opts).unwrap();
        let k2 = outer_product_kernel(&terms, &md, &offsets, &opts);
        for (a, b) in k1.iter().zip(&k2) {
            assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
        }
        let zero = op.sub(&op).unwrap();
        let kz = reconstruct_kernel(&zero, &md, &offsets, &KernelOptions::default()).unwrap();
        assert!(kz.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kernel_is_translation_equivariant() {
        let md = model(8, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        let terms: Vec<OuterTerm> = [1i64, 2, -3]
            .iter()
            .map(|&m| OuterTerm {
                sector: m,
                u: CVec::from_fn(16, |k, _| c((-0.8 * k as f64).exp() * (rng.gen::<f64>() + 0.5))),
                v: CVec::from_fn(16, |k, _| c((-0.8 * k as f64).exp() * (rng.gen::<f64>() + 0.5))),
            })
            .collect();
        let op = outer_product_operator(&terms, &md);
        let opts = KernelOptions { tail_tolerance: 1e9, ..Default::default() };
        let y = GroupPoint::new(vec![0.002, 0.03, -0.01]).unwrap();
        for _ in 0..5 {
            let g = GroupPoint::new(vec![rng.gen::<f64>() - 0.5, 0.2 * (rng.gen::<f64>() - 0.5), 0.2 * (rng.gen::<f64>() - 0.5)]).unwrap();
            let conj = conjugate_by_translation(&op, &md, &g).unwrap();
            let lhs = reconstruct_kernel(&conj, &md, &[y.clone()], &opts).unwrap()[0];
            let moved = crate::group::group_law(&crate::group::group_law(&g.inverse(), &y).unwrap(), &g).unwrap();
            let rhs = reconstruct_kernel(&op, &md, &[moved], &opts).unwrap()[0];
            assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn oracle_reproduces_star_products() {
        let shape = SymbolShape::new(1, 1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_symbol(&mut rng, shape, -2, 1.0);
        let q = random_symbol(&mut rng, shape, -3, 1.0);
        let pq = star(&p, &q).unwrap();
        for sign in [1i8, -1] {
            let coarse = grid_convolution_oracle(&p, &q, sign, &GridMesh { points: 64, length: 28.0 }).unwrap();
            let target = pq.fiber(sign);
            let err = linalg::max_abs(&(&coarse.fiber - target)) / linalg::max_abs(target);
            assert!(err < 1e-3, "relative error {err}");
            let fine = grid_convolution_oracle(&p, &q, sign, &GridMesh { points: 96, length: 32.0 }).unwrap();
            let err_fine = linalg::max_abs(&(&fine.fiber - target)) / linalg::max_abs(target);
            assert!(err_fine < 1e-6, "fine relative error {err_fine}");
        }
        // The truncated identity is the projection onto the first levels and
        // has a decaying kernel.
        let unit = HomogeneousSymbol::unit(shape);
        let up = grid_convolution_oracle(&unit, &p, 1, &GridMesh { points: 64, length: 28.0 }).unwrap();
        assert!(linalg::max_abs(&(&up.fiber - p.fiber(1))) < 1e-3 * linalg::max_abs(p.fiber(1)));
    }

    #[test]
    fn oracle_flags_coarse_meshes() {
        let shape = SymbolShape::new(1, 1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_symbol(&mut rng, shape, -2, 1.0);
        let r = grid_convolution_oracle(&p, &p, 1, &GridMesh { points: 16, length: 6.0 });
        assert!(matches!(r, Err(Error::MeshTooCoarse { .. })));
    }
}
