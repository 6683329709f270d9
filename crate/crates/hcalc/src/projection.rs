//! Projections in the calculus: finite-dimensional Riesz projections, their
//! graded (symbol-expansion) counterpart, orthogonalization, projections built
//! from an idempotent principal symbol, transport of involutions along paths
//! of idempotents, and the comparison of projections with equal ranges.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, c, CMat};
use crate::nilmanifold::SectorOperator;
use crate::residue;
use crate::symbol::{expansion_mul, inverse_expansion, star, HomogeneousSymbol, SymbolExpansion, SymbolShape};
use crate::{Error, Result};

/// Minimal distance between an eigenvalue and a contour.
pub const CONTOUR_CLEARANCE: f64 = 1e-8;

/// Idempotency tolerance on leading symbols and path samples.
pub const IDEMPOTENT_TOL: f64 = 1e-8;

/// Path tolerance of the transported residue.
pub const PATH_TOL: f64 = 1e-6;

/// Trapezoid node count on a circle so that every pole contributes an aliasing
/// error below `1e-16`. Poles inside at ratio `ρ < 1` decay like `ρ^K`, poles
/// outside like `ρ^{−K}`; `extra` pads for higher-order poles.
fn contour_nodes(eigs: &[Complex64], center: Complex64, radius: f64, extra: usize) -> Result<usize> {
    let mut worst: f64 = 0.0;
    for &e in eigs {
        let dist = (e - center).norm();
        let gap = (dist - radius).abs();
        if gap < CONTOUR_CLEARANCE * radius.max(1.0) {
            return Err(Error::ContourHitsSpectrum { distance: gap, sector: None });
        }
        let ratio = if dist < radius { dist / radius } else { radius / dist };
        worst = worst.max(ratio);
    }
    let k = if worst < 1e-3 { 16.0 } else { (-37.0 / worst.ln()).ceil() };
    let k = (k as usize + extra).clamp(16, 1 << 15);
    Ok(k.div_ceil(4) * 4)
}

/// `(2πi)⁻¹∮_{|z−center|=radius} (z − A)⁻¹ dz` by the trapezoid rule.
///
/// The node count follows from the eigenvalues of `A`; an eigenvalue within
/// `1e-8` of the circle is rejected.
pub fn riesz_projection(matrix: &CMat, center: Complex64, radius: f64) -> Result<CMat> {
    if !linalg::is_square(matrix) {
        return Err(Error::DimensionMismatch("Riesz projection of a non-square matrix".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("contour radius {radius}")));
    }
    let dim = matrix.nrows();
    if dim == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let eigs = linalg::eigenvalues(matrix)?;
    let k = contour_nodes(&eigs, center, radius, 0)?;
    let terms: Vec<CMat> = (0..k)
        .into_par_iter()
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            let w = Complex64::from_polar(radius, theta);
            let z = center + w;
            let shifted = CMat::identity(dim, dim) * z - matrix;
            linalg::inverse(&shifted).map(|r| r * (w / k as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = CMat::zeros(dim, dim);
    for t in &terms {
        out += t;
    }
    Ok(out)
}

/// Graded Riesz projection of an expansion `F = f_m + f_{m−1} + …`.
///
/// The components are treated as a power series in `|λ|^{−1/2}` around the
/// principal part: with `R_0(z) = (z − f_m)⁻¹` the resolvent expands as
/// `G_j = Σ_{k=1}^{j} R_0 f_{m−k} G_{j−k}`, and the degree `−j` component of
/// the projection is the contour integral of `G_j`. The result has degree 0
/// and keeps `depth + 1` components.
pub fn riesz_expansion(f: &SymbolExpansion, center: Complex64, radius: f64, depth: usize) -> Result<SymbolExpansion> {
    let principal = f.principal().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let m = principal.degree;
    let shape = principal.shape;
    let dim = shape.fiber_dim();
    let mut out_plus: Vec<CMat> = Vec::new();
    let mut out_minus: Vec<CMat> = Vec::new();
    for sign in [1i8, -1] {
        let parts: Vec<Option<CMat>> = (0..=depth as i32).map(|j| f.component(m - j).map(|p| p.fiber(sign).clone())).collect();
        let eigs = linalg::eigenvalues(parts[0].as_ref().unwrap())?;
        let k = contour_nodes(&eigs, center, radius, 8 * (depth + 1))?;
        let per_node: Vec<Vec<CMat>> = (0..k)
            .into_par_iter()
            .map(|node| -> Result<Vec<CMat>> {
                let theta = 2.0 * std::f64::consts::PI * node as f64 / k as f64;
                let w = Complex64::from_polar(radius, theta);
                let z = center + w;
                let r0 = linalg::inverse(&(CMat::identity(dim, dim) * z - parts[0].as_ref().unwrap()))?;
                let mut g: Vec<CMat> = vec![r0.clone()];
                for j in 1..=depth {
                    let mut acc = CMat::zeros(dim, dim);
                    for kk in 1..=j {
                        if let Some(fk) = &parts[kk] {
                            acc += fk * &g[j - kk];
                        }
                    }
                    g.push(&r0 * acc);
                }
                let wk = w / k as f64;
                Ok(g.into_iter().map(|x| x * wk).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sums = vec![CMat::zeros(dim, dim); depth + 1];
        for node in &per_node {
            for (s, t) in sums.iter_mut().zip(node) {
                *s += t;
            }
        }
        if sign > 0 {
            out_plus = sums;
        } else {
            out_minus = sums;
        }
    }
    let comps = out_plus
        .into_iter()
        .zip(out_minus)
        .enumerate()
        .map(|(j, (p, q))| HomogeneousSymbol::new(-(j as i32), shape, p, q))
        .collect::<Result<Vec<_>>>()?;
    SymbolExpansion::new(comps, -(depth as i32))
}

/// A projection in the calculus, optionally with a per-sector realization.
#[derive(Clone, Debug)]
pub struct ProjectionOperator {
    pub expansion: SymbolExpansion,
    pub realization: Option<SectorOperator>,
    pub idempotency_defect: f64,
}

/// `max_deg ‖(Π·Π − Π)_deg‖` on the resolved block, over retained degrees.
pub fn expansion_idempotency_defect(p: &SymbolExpansion) -> Result<f64> {
    let sq = expansion_mul(p, p)?;
    Ok(sq.sub(p)?.resolved_max_abs())
}

/// Resolved-block idempotency defect of one degree-0 symbol.
pub fn symbol_idempotency_defect(p: &HomogeneousSymbol) -> Result<f64> {
    Ok(star(p, p)?.resolved_distance(p))
}

impl ProjectionOperator {
    /// Wraps an expansion and records its measured idempotency defect.
    pub fn from_expansion(expansion: SymbolExpansion) -> Result<Self> {
        let principal = expansion.principal().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
        if principal.degree != 0 {
            return Err(Error::InvalidArgument(format!("projection of degree {}", principal.degree)));
        }
        let lead = symbol_idempotency_defect(principal)?;
        if lead > IDEMPOTENT_TOL {
            return Err(Error::IdempotencyDefect { defect: lead });
        }
        let defect = expansion_idempotency_defect(&expansion)?;
        Ok(Self { expansion, realization: None, idempotency_defect: defect })
    }

    pub fn with_realization(mut self, r: SectorOperator) -> Self {
        self.realization = Some(r);
        self
    }

    pub fn shape(&self) -> SymbolShape {
        self.expansion.shape().expect("projections are nonempty")
    }

    /// `1 − Π`.
    pub fn complement(&self) -> Result<Self> {
        let one = SymbolExpansion::unit(self.shape()).with_truncation(self.expansion.truncation_degree);
        let expansion = one.sub(&self.expansion)?;
        let realization = self.realization.as_ref().map(|r| r.map(|m| CMat::identity(m.nrows(), m.ncols()) - m));
        Ok(Self { expansion, realization, idempotency_defect: self.idempotency_defect })
    }

    /// `Π*`.
    pub fn adjoint(&self) -> Self {
        Self {
            expansion: self.expansion.adjoint(),
            realization: self.realization.as_ref().map(|r| r.map(|m| m.adjoint())),
            idempotency_defect: self.idempotency_defect,
        }
    }

    /// `Πᵗ`.
    pub fn transpose(&self) -> Self {
        Self { expansion: self.expansion.transpose(), realization: None, idempotency_defect: self.idempotency_defect }
    }

    pub fn residue(&self) -> Complex64 {
        residue::residue(&self.expansion)
    }
}

/// `Π₀ = ΠΠ*B⁻¹` with `B = 1 + (Π − Π*)(Π* − Π)`: the orthogonal projection
/// onto the range of `Π`. At symbol level `B⁻¹` is an inverse expansion to the
/// truncation degree; on a realization `B` is inverted per sector.
pub fn orthogonalize(p: &ProjectionOperator) -> Result<ProjectionOperator> {
    let e = &p.expansion;
    let trunc = e.truncation_degree;
    let shape = p.shape();
    let star_e = e.adjoint();
    let diff = e.sub(&star_e)?;
    let one = SymbolExpansion::unit(shape).with_truncation(trunc);
    let b = one.add(&expansion_mul(&diff, &diff.scale(c(-1.0)))?)?;
    let terms = (1 - trunc).max(1) as usize;
    let binv = inverse_expansion(&b, terms)?.with_truncation(trunc);
    let pi0 = expansion_mul(&expansion_mul(e, &star_e)?, &binv)?.prune(0.0);
    let realization = match &p.realization {
        Some(r) => Some(r.try_map(|m| {
            let d = m - m.adjoint();
            let bm = CMat::identity(m.nrows(), m.ncols()) - &d * &d;
            Ok(m * m.adjoint() * linalg::inverse(&bm)?)
        })?),
        None => None,
    };
    let defect = expansion_idempotency_defect(&pi0)?;
    Ok(ProjectionOperator { expansion: pi0, realization, idempotency_defect: defect })
}

/// Options of [`projection_from_symbol`].
#[derive(Clone, Copy, Debug)]
pub struct FromSymbolOptions {
    /// Number of Taylor terms of `(1−z)^{−1/2}`; `None` means `d + 3`, the powers `k ≤ d + 2`.
    pub taylor_terms: Option<usize>,
    /// Lowest degree kept; `None` means `−(d+2)`.
    pub truncation: Option<i32>,
}

impl Default for FromSymbolOptions {
    fn default() -> Self {
        Self { taylor_terms: None, truncation: None }
    }
}

/// Coefficients `binom(2k, k)/4^k` of `(1 − z)^{−1/2}`.
pub fn inverse_sqrt_taylor(terms: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    for k in 1..terms {
        let prev = a[k - 1];
        a.push(prev * (2 * k - 1) as f64 / (2 * k) as f64);
    }
    a
}

/// `G = P Σ_{k<terms} a_k R^k` with `R = 1 − P²`, the involution built from an
/// almost-involution `P`.
pub fn normalize_involution(p: &SymbolExpansion, terms: usize) -> Result<SymbolExpansion> {
    let shape = p.shape().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let trunc = p.truncation_degree;
    let one = SymbolExpansion::unit(shape).with_truncation(trunc);
    let r = one.sub(&expansion_mul(p, p)?)?;
    let coeffs = inverse_sqrt_taylor(terms);
    let mut power = one.clone();
    let mut q = one.scale(c(coeffs[0]));
    for &a in &coeffs[1..] {
        power = expansion_mul(&power, &r)?;
        q = q.add(&power.scale(c(a)))?;
    }
    expansion_mul(p, &q)
}

/// Spectral radii `r₁ = max |e − 1|` over the eigenvalues of the principal
/// fibers clustered at `+1` and `r₂ = min |e − 1|` over those at `−1`.
fn cluster_radii(f: &HomogeneousSymbol) -> Result<(f64, f64)> {
    let mut r1: f64 = 0.0;
    let mut r2 = f64::INFINITY;
    for sign in [1i8, -1] {
        for e in linalg::eigenvalues(f.fiber(sign))? {
            if e.re > 0.0 {
                r1 = r1.max((e - c(1.0)).norm());
            } else {
                r2 = r2.min((e - c(1.0)).norm());
            }
        }
    }
    Ok((r1, r2))
}

/// A projection with leading symbol `π₀`.
///
/// `P = (2π₀ − 1) + lower_terms`, `F = P·Σ_{k≤d+2} a_k (1 − P²)^k`, and
/// `Π = (2πi)⁻¹∮_{|λ−1|=r}(λ − F)⁻¹dλ` with `r` midway between the measured
/// clusters of the principal spectrum of `F` at `±1`.
pub fn projection_from_symbol(
    pi0: &HomogeneousSymbol,
    lower_terms: Option<&SymbolExpansion>,
    opts: FromSymbolOptions,
) -> Result<ProjectionOperator> {
    if pi0.degree != 0 {
        return Err(Error::InvalidArgument(format!("leading symbol of degree {}", pi0.degree)));
    }
    let lead = symbol_idempotency_defect(pi0)?;
    if lead > IDEMPOTENT_TOL {
        return Err(Error::IdempotencyDefect { defect: lead });
    }
    let shape = pi0.shape;
    let g = shape.group();
    let trunc = opts.truncation.unwrap_or(g.critical_degree());
    let terms = opts.taylor_terms.unwrap_or(g.d() + 3);
    let mut f0 = pi0.scale(c(2.0)).sub(&HomogeneousSymbol::unit(shape))?;
    f0.abelian = None;
    let mut p = SymbolExpansion::new(vec![f0], trunc)?;
    if let Some(l) = lower_terms {
        if l.order().is_some_and(|o| o >= 0) {
            return Err(Error::InvalidArgument("lower terms must have negative degree".into()));
        }
        p = p.add(&l.with_truncation(trunc))?;
    }
    let f = normalize_involution(&p, terms)?;
    let principal = f.principal().expect("nonempty");
    let (r1, r2) = cluster_radii(principal)?;
    // With no eigenvalues near −1 any circle of radius below 2 separates.
    let r2 = if r2.is_finite() { r2 } else { 2.0 };
    let gap = r2 - r1;
    if gap < 2.0 * IDEMPOTENT_TOL {
        return Err(Error::GapTooSmall { gap });
    }
    let radius = r1 + 0.5 * gap;
    let depth = (-trunc) as usize;
    let pi = riesz_expansion(&f, c(1.0), radius, depth)?.prune(0.0);
    let pi = if pi.components.is_empty() {
        SymbolExpansion::new(vec![HomogeneousSymbol::zero(shape, 0)], trunc)?
    } else {
        pi
    };
    let defect = expansion_idempotency_defect(&pi)?;
    Ok(ProjectionOperator { expansion: pi, realization: None, idempotency_defect: defect })
}

/// Sampled path of degree-0 idempotent symbols.
#[derive(Clone, Debug)]
pub struct IdempotentSymbolPath {
    pub samples: Vec<(f64, HomogeneousSymbol)>,
    pub continuity_modulus: f64,
}

impl IdempotentSymbolPath {
    pub fn new(samples: Vec<(f64, HomogeneousSymbol)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two samples".into()));
        }
        if samples[0].0 != 0.0 || samples.last().unwrap().0 != 1.0 {
            return Err(Error::InvalidArgument("path samples must start at t = 0 and end at t = 1".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("path parameters must increase strictly".into()));
        }
        let mut worst: f64 = 0.0;
        for (_, s) in &samples {
            if s.degree != 0 {
                return Err(Error::InvalidArgument("path samples must have degree 0".into()));
            }
            worst = worst.max(symbol_idempotency_defect(s)?);
        }
        if worst > IDEMPOTENT_TOL {
            return Err(Error::IdempotencyDefect { defect: worst });
        }
        let continuity_modulus = samples.windows(2).map(|w| w[0].1.distance(&w[1].1)).fold(0.0, f64::max);
        Ok(Self { samples, continuity_modulus })
    }

    /// Samples `f(t)` at `count` equally spaced parameters.
    pub fn from_fn(count: usize, f: impl Fn(f64) -> Result<HomogeneousSymbol> + Sync) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument("a path needs at least two samples".into()));
        }
        let samples = (0..count)
            .into_par_iter()
            .map(|i| {
                let t = if i + 1 == count { 1.0 } else { i as f64 / (count - 1) as f64 };
                f(t).map(|s| (t, s))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }
}

/// Residues along a transported path of involutions.
#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    pub parameters: Vec<f64>,
    pub residues_re: Vec<f64>,
    pub residues_im: Vec<f64>,
    /// `max_i |Res G_{t_{i+1}} − Res G_{t_i}| / (t_{i+1} − t_i)`.
    pub max_drift_rate: f64,
    /// `|Res P_0 − Res P_1|`.
    pub endpoint_difference: f64,
    pub continuity_modulus: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Transport of `F_0 = 2Π_0 − 1` to `F_1 = 2Π_1 − 1` along a path of
/// idempotent leading symbols.
///
/// `P_t = (2π_t − 1) + (1−t)(F_0 − f_{0,0}) + t(F_1 − f_{0,1})` is an almost
/// involution, normalized by `G_t = P_t Σ_{k≤d+2} a_k (1 − P_t²)^k`, and the
/// residue of `G_t` is sampled along the path.
pub fn transport_involution(
    path: &IdempotentSymbolPath,
    p0: &ProjectionOperator,
    p1: &ProjectionOperator,
) -> Result<TransportReport> {
    let shape = p0.shape();
    let g = shape.group();
    let start = &path.samples[0].1;
    let end = &path.samples.last().unwrap().1;
    let lead0 = p0.expansion.principal().expect("nonempty");
    let lead1 = p1.expansion.principal().expect("nonempty");
    let mismatch = start.resolved_distance(lead0).max(end.resolved_distance(lead1));
    if mismatch > IDEMPOTENT_TOL {
        return Err(Error::EndpointMismatch { defect: mismatch });
    }
    let trunc = p0.expansion.truncation_degree.max(p1.expansion.truncation_degree).max(g.critical_degree() - 1);
    let lower = |p: &ProjectionOperator| -> Result<SymbolExpansion> {
        let comps: Vec<HomogeneousSymbol> =
            p.expansion.components.iter().filter(|x| x.degree < 0).map(|x| x.scale(c(2.0))).collect();
        SymbolExpansion::new(comps, trunc)
    };
    let (l0, l1) = (lower(p0)?, lower(p1)?);
    let terms = g.d() + 3;
    let residues: Vec<Complex64> = path
        .samples
        .par_iter()
        .map(|(t, s)| -> Result<Complex64> {
            let mut f = s.scale(c(2.0)).sub(&HomogeneousSymbol::unit(shape))?;
            f.abelian = None;
            let pt = SymbolExpansion::new(vec![f], trunc)?
                .add(&l0.scale(c(1.0 - t)))?
                .add(&l1.scale(c(*t)))?;
            Ok(residue::residue(&normalize_involution(&pt, terms)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = path.samples.iter().map(|(t, _)| *t).collect();
    let mut rate: f64 = 0.0;
    for i in 0..ts.len() - 1 {
        rate = rate.max((residues[i + 1] - residues[i]).norm() / (ts[i + 1] - ts[i]));
    }
    let endpoint_difference = (p0.residue() - p1.residue()).norm();
    Ok(TransportReport {
        parameters: ts,
        residues_re: residues.iter().map(|z| z.re).collect(),
        residues_im: residues.iter().map(|z| z.im).collect(),
        max_drift_rate: rate,
        endpoint_difference,
        continuity_modulus: path.continuity_modulus,
        tolerance: PATH_TOL,
        within_tolerance: rate <= PATH_TOL && endpoint_difference <= PATH_TOL,
    })
}

/// Comparison of two projections with a common range.
#[derive(Clone, Debug, Serialize)]
pub struct SameRangeReport {
    pub max_principal_angle: f64,
    pub residue_1: [f64; 2],
    pub residue_2: [f64; 2],
    pub orthogonalized_residue_1: [f64; 2],
    pub orthogonalized_residue_2: [f64; 2],
    /// `Res(1 − Π_j)` for the same-kernel form of the statement.
    pub complement_residue_1: [f64; 2],
    pub complement_residue_2: [f64; 2],
    pub difference: f64,
    pub tolerance: f64,
    pub equal: bool,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Max principal angle between sector ranges of two realizations.
pub fn realization_range_angle(a: &SectorOperator, b: &SectorOperator) -> Result<f64> {
    if a.per_sector.len() != b.per_sector.len() {
        return Err(Error::DimensionMismatch("realizations have different sector counts".into()));
    }
    let angles: Vec<f64> = a
        .per_sector
        .par_iter()
        .zip(&b.per_sector)
        .map(|(x, y)| linalg::max_principal_angle(&linalg::range_basis(x, 1e-8), &linalg::range_basis(y, 1e-8)))
        .collect();
    Ok(angles.into_iter().fold(0.0, f64::max))
}

/// Checks that the realizations of `P1`, `P2` have equal ranges, then compares
/// their residues directly and after orthogonalization. Equal ranges give
/// equal orthogonal projections; the kernel form runs through `1 − Π`.
pub fn same_range_residue(p1: &ProjectionOperator, p2: &ProjectionOperator, tolerance: f64) -> Result<SameRangeReport> {
    let (r1, r2) = match (&p1.realization, &p2.realization) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidArgument("both projections need realizations".into())),
    };
    let angle = realization_range_angle(r1, r2)?;
    if angle > 1e-8 {
        return Err(Error::RangesDiffer { max_angle: angle });
    }
    let (o1, o2) = (orthogonalize(p1)?, orthogonalize(p2)?);
    let (res1, res2) = (p1.residue(), p2.residue());
    let (ro1, ro2) = (o1.residue(), o2.residue());
    let (c1, c2) = (p1.complement()?.residue(), p2.complement()?.residue());
    let difference = (res1 - res2).norm().max((ro1 - ro2).norm()).max((c1 - c2).norm());
    Ok(SameRangeReport {
        max_principal_angle: angle,
        residue_1: pair(res1),
        residue_2: pair(res2),
        orthogonalized_residue_1: pair(ro1),
        orthogonalized_residue_2: pair(ro2),
        complement_residue_1: pair(c1),
        complement_residue_2: pair(c2),
        difference,
        tolerance,
        equal: difference <= tolerance,
    })
}

/// `A⁻¹ Π A` with `A = Π₀ + (1 − Π)(1 − Π₀)` and `Π₀` the orthogonalization:
/// a projection with the range of `Π₀`.
pub fn similar_projection(p: &ProjectionOperator) -> Result<ProjectionOperator> {
    let o = orthogonalize(p)?;
    let trunc = p.expansion.truncation_degree;
    let one = SymbolExpansion::unit(p.shape()).with_truncation(trunc);
    let a = o.expansion.add(&expansion_mul(&one.sub(&p.expansion)?, &one.sub(&o.expansion)?)?)?;
    let terms = (1 - trunc).max(1) as usize;
    let ainv = inverse_expansion(&a, terms)?.with_truncation(trunc);
    let e = expansion_mul(&expansion_mul(&ainv, &p.expansion)?, &a)?.prune(0.0);
    let realization = match (&p.realization, &o.realization) {
        (Some(r), Some(ro)) => Some(r.try_zip(ro, |m, m0| {
            let id = CMat::identity(m.nrows(), m.ncols());
            let am = m0 + (&id - m) * (&id - m0);
            Ok(linalg::inverse(&am)? * m * am)
        })?),
        _ => None,
    };
    let defect = expansion_idempotency_defect(&e)?;
    Ok(ProjectionOperator { expansion: e, realization, idempotency_defect: defect })
}

/// Hermite-basis Givens rotation `U = exp(θ(|i⟩⟨j| − |j⟩⟨i|))` on one fiber sign.
pub fn givens(dim: usize, i: usize, j: usize, theta: f64) -> CMat {
    let mut u = CMat::identity(dim, dim);
    let (s, co) = theta.sin_cos();
    u[(i, i)] = c(co);
    u[(j, j)] = c(co);
    u[(j, i)] = c(s);
    u[(i, j)] = c(-s);
    u
}

/// `U(t) π U(t)*` on the fiber of one sign, with `U(t)` a Givens rotation by `tθ`
/// in the Hermite plane `(i, j)`.
pub fn rotated_symbol(p: &HomogeneousSymbol, sign: i8, i: usize, j: usize, theta: f64) -> Result<HomogeneousSymbol> {
    let dim = p.shape.fiber_dim();
    let u = givens(dim, i, j, theta);
    let mut out = p.clone();
    let f = &u * p.fiber(sign) * u.adjoint();
    if sign > 0 {
        out.fiber_plus = f;
    } else {
        out.fiber_minus = f;
    }
    out.abelian = None;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::random_expansion;
    use rand::SeedableRng;

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&crate::linalg::CVec::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    #[test]
    fn riesz_projection_of_diagonal_matrices() {
        let m = diag(&[0.0, 1.0]);
        let p1 = riesz_projection(&m, c(1.0), 0.5).unwrap();
        assert!(linalg::max_abs(&(p1 - diag(&[0.0, 1.0]))) < 1e-14);
        let p0 = riesz_projection(&m, c(0.0), 0.5).unwrap();
        assert!(linalg::max_abs(&(p0 - diag(&[1.0, 0.0]))) < 1e-14);
        assert!(matches!(riesz_projection(&m, c(0.0), 1.0), Err(Error::ContourHitsSpectrum { .. })));
    }

    #[test]
    fn riesz_projection_matches_eigenprojection_for_clustered_spectrum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        use rand::Rng;
        // Non-normal matrix V D V⁻¹ with two clusters.
        let d = diag(&[0.9, 1.0, 1.1, 3.0, 3.05, 2.9]);
        let v = CMat::from_fn(6, 6, |i, j| {
            c(if i == j { 2.0 } else { 0.0 }) + Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
        });
        let vinv = linalg::inverse(&v).unwrap();
        let m = &v * &d * &vinv;
        let expect = &v * diag(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]) * &vinv;
        let p = riesz_projection(&m, c(1.0), 0.8).unwrap();
        assert!(linalg::max_abs(&(&p - &expect)) < 1e-9);
        assert!(linalg::max_abs(&(&p * &p - &p)) < 1e-10);
    }

    #[test]
    fn orthogonalize_two_by_two() {
        let shape = SymbolShape::new(1, 2, 1);
        let pi = CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(0.0)]);
        let s = HomogeneousSymbol::new(0, shape, pi.clone(), pi).unwrap();
        let p = ProjectionOperator::from_expansion(SymbolExpansion::single(s)).unwrap();
        let o = orthogonalize(&p).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let lead = o.expansion.principal().unwrap();
        assert!(linalg::max_abs(&(&lead.fiber_plus - &expect)) < 1e-12);
        let again = orthogonalize(&o).unwrap();
        assert!(again.expansion.principal().unwrap().distance(lead) < 1e-10);
    }

    #[test]
    fn projections_from_trivial_symbols() {
        let shape = SymbolShape::new(1, 1, 8);
        let zero = projection_from_symbol(&HomogeneousSymbol::zero(shape, 0), None, Default::default()).unwrap();
        assert!(zero.expansion.max_abs() < 1e-14);
        let one = projection_from_symbol(&HomogeneousSymbol::unit(shape), None, Default::default()).unwrap();
        assert!(one.expansion.principal().unwrap().distance(&HomogeneousSymbol::unit(shape)) < 1e-14);
        assert!(one.expansion.components.iter().skip(1).all(|x| x.max_abs() < 1e-14));
    }

    #[test]
    fn projection_from_ground_state_with_lower_terms() {
        let shape = SymbolShape::new(1, 1, 12);
        let mut f = CMat::zeros(12, 12);
        f[(0, 0)] = c(1.0);
        let s0 = HomogeneousSymbol::new(0, shape, f, CMat::zeros(12, 12)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let lower = random_expansion(&mut rng, shape, &[-1, -2, -3, -4], -4);
        let p = projection_from_symbol(&s0, Some(&lower.scale(c(0.2))), Default::default()).unwrap();
        assert!(p.idempotency_defect < 1e-9, "{}", p.idempotency_defect);
        assert!(p.expansion.principal().unwrap().distance(&s0) < 1e-12);
        assert_eq!(p.expansion.truncation_degree, -4);
    }

    #[test]
    fn taylor_coefficients_of_inverse_square_root() {
        let a = inverse_sqrt_taylor(5);
        let expect = [1.0, 0.5, 0.375, 0.3125, 0.2734375];
        for (x, y) in a.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn path_validation() {
        let shape = SymbolShape::new(1, 1, 4);
        let u = HomogeneousSymbol::unit(shape);
        assert!(IdempotentSymbolPath::new(vec![(0.0, u.clone())]).is_err());
        assert!(IdempotentSymbolPath::new(vec![(0.0, u.clone()), (0.5, u.clone())]).is_err());
        let bad = u.scale(c(2.0));
        assert!(matches!(
            IdempotentSymbolPath::new(vec![(0.0, u.clone()), (1.0, bad)]),
            Err(Error::IdempotencyDefect { .. })
        ));
        let ok = IdempotentSymbolPath::new(vec![(0.0, u.clone()), (1.0, u)]).unwrap();
        assert_eq!(ok.continuity_modulus, 0.0);
    }
}
