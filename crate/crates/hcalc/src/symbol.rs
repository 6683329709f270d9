//! Homogeneous Heisenberg symbols stored fiberwise, their product, adjoints,
//! transposes, inversion, scalar evaluation, and symbol expansions.
//!
//! A symbol of degree `m` is determined by two operators on `L²(ℝⁿ) ⊗ ℂ^r`,
//! its group Fourier transforms at `ξ_0 = ±1`; at any other `λ` the fiber is
//! `|λ|^{m/2} F_{sign λ}` in the `λ`-scaled Hermite basis. The product of
//! symbols is composition of fibers.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::group::HeisenbergGroupSpec;
use crate::hermite::{sign_pattern, trace_product, weyl_probe, HermiteSpace};
use crate::linalg::{self, c, CMat, I};
use crate::{Error, Result};

/// Equator band: points with `|ξ_0| < EQUATOR_BAND · ‖ξ‖²` are not evaluated from fibers.
pub const EQUATOR_BAND: f64 = 0.05;

/// Relative threshold of the fiber invertibility test.
pub const TOL_INVERT: f64 = 1e-8;

/// Number of samples of an abelian trace on the equatorial circle.
pub const ABELIAN_SAMPLES: usize = 128;

/// Truncation degree used for expansions that are exact finite sums.
pub const EXACT_TRUNCATION: i32 = -1000;

/// Shared shape data of symbols that can be composed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymbolShape {
    pub n: usize,
    pub rank: usize,
    pub cutoff: usize,
}

impl SymbolShape {
    pub fn new(n: usize, rank: usize, cutoff: usize) -> Self {
        Self { n, rank, cutoff }
    }

    pub fn space(&self) -> HermiteSpace {
        HermiteSpace::new(self.n, self.cutoff)
    }

    pub fn fiber_dim(&self) -> usize {
        self.rank * self.space().dim()
    }

    /// Fiber indices (rank-major) whose Hermite part is resolved.
    pub fn resolved_indices(&self) -> Vec<usize> {
        let s = self.space();
        let b = s.dim();
        let res = s.resolved_indices();
        (0..self.rank).flat_map(|r| res.iter().map(move |&i| r * b + i)).collect()
    }

    pub fn group(&self) -> HeisenbergGroupSpec {
        HeisenbergGroupSpec { n: self.n }
    }
}

/// Values of a symbol on the equator `ξ_0 = 0`, sampled for `n = 1` at the
/// directions `ω_k = (cos α_k, sin α_k)/‖·‖₄`, `α_k = 2πk/K`, and
/// trigonometrically interpolated in `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbelianTrace {
    pub samples: Vec<CMat>,
}

impl AbelianTrace {
    pub fn directions(k: usize) -> Vec<[f64; 2]> {
        (0..k)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                let (s, co) = a.sin_cos();
                let nrm = (co.powi(4) + s.powi(4)).powf(0.25);
                [co / nrm, s / nrm]
            })
            .collect()
    }

    /// Samples `f(ω)` at the standard equatorial directions.
    pub fn from_fn(f: impl Fn(&[f64; 2]) -> CMat) -> Self {
        Self { samples: Self::directions(ABELIAN_SAMPLES).iter().map(|w| f(w)).collect() }
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self { samples: self.samples.iter().map(f).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        Self { samples: self.samples.iter().zip(&other.samples).map(|(a, b)| f(a, b)).collect() }
    }

    /// Value at the equatorial direction with polar angle `alpha`.
    pub fn eval_angle(&self, alpha: f64) -> CMat {
        let k = self.samples.len();
        let h = 2.0 * std::f64::consts::PI / k as f64;
        let mut out = CMat::zeros(self.samples[0].nrows(), self.samples[0].ncols());
        for (j, s) in self.samples.iter().enumerate() {
            let d = alpha - j as f64 * h;
            let half = 0.5 * d;
            let w = if half.sin().abs() < 1e-14 {
                1.0
            } else {
                (0.5 * k as f64 * d).sin() * half.cos() / half.sin() / k as f64
            };
            out += s * c(w);
        }
        out
    }

    /// Sample shifted by half a period: the values at `−ω`.
    pub fn antipodal(&self) -> Self {
        let k = self.samples.len();
        Self { samples: (0..k).map(|i| self.samples[(i + k / 2) % k].clone()).collect() }
    }
}

/// A Heisenberg-homogeneous symbol of integer degree.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousSymbol {
    pub degree: i32,
    pub shape: SymbolShape,
    pub fiber_plus: CMat,
    pub fiber_minus: CMat,
    pub abelian: Option<AbelianTrace>,
    pub self_adjoint: bool,
}

fn check_fiber(m: &CMat, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "fiber is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("fiber entries must be finite".into()));
    }
    Ok(())
}

/// Validated constructor; the CR dimension `n` is inferred from the fiber size.
pub fn make_homogeneous(
    degree: f64,
    fiber_plus: CMat,
    fiber_minus: CMat,
    rank: usize,
    cutoff: usize,
) -> Result<HomogeneousSymbol> {
    if degree.fract() != 0.0 || !degree.is_finite() {
        return Err(Error::InvalidArgument(format!("degree {degree} is not an integer")));
    }
    if rank == 0 || cutoff == 0 || fiber_plus.nrows() % rank != 0 {
        return Err(Error::DimensionMismatch("rank does not divide the fiber size".into()));
    }
    let b = fiber_plus.nrows() / rank;
    let mut n = 0;
    let mut p = 1;
    while p < b {
        p *= cutoff;
        n += 1;
    }
    if p != b || n == 0 {
        return Err(Error::DimensionMismatch(format!("fiber block {b} is not a power of {cutoff}")));
    }
    HomogeneousSymbol::new(degree as i32, SymbolShape::new(n, rank, cutoff), fiber_plus, fiber_minus)
}

impl HomogeneousSymbol {
    pub fn new(degree: i32, shape: SymbolShape, fiber_plus: CMat, fiber_minus: CMat) -> Result<Self> {
        let dim = shape.fiber_dim();
        check_fiber(&fiber_plus, dim)?;
        check_fiber(&fiber_minus, dim)?;
        Ok(Self { degree, shape, fiber_plus, fiber_minus, abelian: None, self_adjoint: false })
    }

    pub fn with_abelian(mut self, trace: AbelianTrace) -> Self {
        self.abelian = Some(trace);
        self
    }

    /// Marks the symbol self-adjoint after checking that both fibers are Hermitian.
    pub fn flag_self_adjoint(mut self) -> Result<Self> {
        let tol = 1e-10 * (1.0 + linalg::max_abs(&self.fiber_plus).max(linalg::max_abs(&self.fiber_minus)));
        if linalg::hermitian_defect(&self.fiber_plus) > tol || linalg::hermitian_defect(&self.fiber_minus) > tol {
            return Err(Error::InvalidArgument("fibers are not Hermitian".into()));
        }
        self.self_adjoint = true;
        Ok(self)
    }

    pub fn fiber(&self, sign: i8) -> &CMat {
        if sign > 0 {
            &self.fiber_plus
        } else {
            &self.fiber_minus
        }
    }

    pub fn unit(shape: SymbolShape) -> Self {
        let d = shape.fiber_dim();
        let r = shape.rank;
        Self {
            degree: 0,
            shape,
            fiber_plus: linalg::eye(d),
            fiber_minus: linalg::eye(d),
            abelian: if shape.n == 1 { Some(AbelianTrace::from_fn(|_| linalg::eye(r))) } else { None },
            self_adjoint: true,
        }
    }

    pub fn zero(shape: SymbolShape, degree: i32) -> Self {
        let d = shape.fiber_dim();
        let r = shape.rank;
        Self {
            degree,
            shape,
            fiber_plus: linalg::zeros(d, d),
            fiber_minus: linalg::zeros(d, d),
            abelian: if shape.n == 1 { Some(AbelianTrace::from_fn(|_| linalg::zeros(r, r))) } else { None },
            self_adjoint: true,
        }
    }

    /// Symbol of `(1/i) X_field` (degree 2 for the central field, 1 otherwise), rank one.
    pub fn frame_symbol(n: usize, cutoff: usize, field: usize) -> Result<Self> {
        if field > 2 * n {
            return Err(Error::InvalidArgument(format!("frame index {field} out of range")));
        }
        let shape = SymbolShape::new(n, 1, cutoff);
        let space = shape.space();
        let f = |sign: i8| crate::hermite::frame_fiber(&space, field, sign) * (-I);
        let degree = if field == 0 { 2 } else { 1 };
        let abelian = if n == 1 {
            Some(AbelianTrace::from_fn(|w| {
                let v = if field == 0 { 0.0 } else { w[field - 1] };
                CMat::from_element(1, 1, c(v))
            }))
        } else {
            None
        };
        let mut s = Self::new(degree, shape, f(1), f(-1))?;
        s.abelian = abelian;
        s.flag_self_adjoint()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            degree: self.degree,
            shape: self.shape,
            fiber_plus: &self.fiber_plus * z,
            fiber_minus: &self.fiber_minus * z,
            abelian: self.abelian.as_ref().map(|a| a.map(|m| m * z)),
            self_adjoint: self.self_adjoint && z.im == 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::InvalidArgument(format!(
                "cannot add degrees {} and {}",
                self.degree, other.degree
            )));
        }
        Ok(Self {
            degree: self.degree,
            shape: self.shape,
            fiber_plus: &self.fiber_plus + &other.fiber_plus,
            fiber_minus: &self.fiber_minus + &other.fiber_minus,
            abelian: match (&self.abelian, &other.abelian) {
                (Some(a), Some(b)) => Some(a.zip(b, |x, y| x + y)),
                _ => None,
            },
            self_adjoint: self.self_adjoint && other.self_adjoint,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c(-1.0)))
    }

    /// Largest entry difference over both fibers.
    pub fn distance(&self, other: &Self) -> f64 {
        linalg::max_abs(&(&self.fiber_plus - &other.fiber_plus))
            .max(linalg::max_abs(&(&self.fiber_minus - &other.fiber_minus)))
    }

    /// Largest entry difference restricted to the resolved block.
    pub fn resolved_distance(&self, other: &Self) -> f64 {
        let idx = self.shape.resolved_indices();
        let d = |a: &CMat, b: &CMat| linalg::max_abs(&linalg::select(&(a - b), &idx, &idx));
        d(&self.fiber_plus, &other.fiber_plus).max(d(&self.fiber_minus, &other.fiber_minus))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.fiber_plus).max(linalg::max_abs(&self.fiber_minus))
    }

    /// `tr F₊ + tr F₋`.
    pub fn fiber_trace_sum(&self) -> Complex64 {
        linalg::trace(&self.fiber_plus) + linalg::trace(&self.fiber_minus)
    }

    /// Restriction of both fibers to the resolved block.
    pub fn resolved_block(&self, sign: i8) -> CMat {
        let idx = self.shape.resolved_indices();
        linalg::select(self.fiber(sign), &idx, &idx)
    }
}

/// Product `p * q`: degrees add and fibers compose.
pub fn star(p: &HomogeneousSymbol, q: &HomogeneousSymbol) -> Result<HomogeneousSymbol> {
    p.check_compatible(q)?;
    let (fp, fm) = rayon::join(|| &p.fiber_plus * &q.fiber_plus, || &p.fiber_minus * &q.fiber_minus);
    Ok(HomogeneousSymbol {
        degree: p.degree + q.degree,
        shape: p.shape,
        fiber_plus: fp,
        fiber_minus: fm,
        abelian: match (&p.abelian, &q.abelian) {
            (Some(a), Some(b)) => Some(a.zip(b, |x, y| x * y)),
            _ => None,
        },
        self_adjoint: false,
    })
}

/// `σ(P*) = σ(P)*`: conjugate transpose of each fiber.
pub fn adjoint_symbol(p: &HomogeneousSymbol) -> HomogeneousSymbol {
    HomogeneousSymbol {
        degree: p.degree,
        shape: p.shape,
        fiber_plus: p.fiber_plus.adjoint(),
        fiber_minus: p.fiber_minus.adjoint(),
        abelian: p.abelian.as_ref().map(|a| a.map(|m| m.adjoint())),
        self_adjoint: p.self_adjoint,
    }
}

/// `σ(Pᵗ)(ξ) = σ(P)(−ξ)ᵗ`: transpose of each fiber and exchange of the two signs.
pub fn transpose_symbol(p: &HomogeneousSymbol) -> HomogeneousSymbol {
    HomogeneousSymbol {
        degree: p.degree,
        shape: p.shape,
        fiber_plus: p.fiber_minus.transpose(),
        fiber_minus: p.fiber_plus.transpose(),
        abelian: p.abelian.as_ref().map(|a| a.antipodal().map(|m| m.transpose())),
        self_adjoint: p.self_adjoint,
    }
}

/// Fiberwise inverse when both fibers pass the Rockland test
/// `σ_min ≥ TOL_INVERT · ‖F‖`.
pub fn invert_homogeneous(p: &HomogeneousSymbol) -> Result<HomogeneousSymbol> {
    let norms = [linalg::op_norm(&p.fiber_plus), linalg::op_norm(&p.fiber_minus)];
    let scale = norms[0].max(norms[1]);
    for (sign, f) in [(1i8, &p.fiber_plus), (-1i8, &p.fiber_minus)] {
        let smin = linalg::min_singular_value(f);
        if !(smin >= TOL_INVERT * scale) || scale == 0.0 {
            return Err(Error::NotInvertible { sign, min_singular_value: smin });
        }
    }
    let (ip, im) = rayon::join(|| linalg::inverse(&p.fiber_plus), || linalg::inverse(&p.fiber_minus));
    let abelian = p.abelian.as_ref().and_then(|a| {
        let inv: Option<Vec<CMat>> = a.samples.iter().map(|m| m.clone().try_inverse()).collect();
        inv.map(|samples| AbelianTrace { samples })
    });
    Ok(HomogeneousSymbol {
        degree: -p.degree,
        shape: p.shape,
        fiber_plus: ip?,
        fiber_minus: im?,
        abelian,
        self_adjoint: p.self_adjoint,
    })
}

/// Block-diagonal symbol on `ℰ₁ ⊕ ℰ₂`; ranks add.
pub fn direct_sum_symbol(p: &HomogeneousSymbol, q: &HomogeneousSymbol) -> Result<HomogeneousSymbol> {
    if p.shape.n != q.shape.n || p.shape.cutoff != q.shape.cutoff || p.degree != q.degree {
        return Err(Error::DimensionMismatch("direct sum needs equal n, cutoff and degree".into()));
    }
    let shape = SymbolShape::new(p.shape.n, p.shape.rank + q.shape.rank, p.shape.cutoff);
    let abelian = match (&p.abelian, &q.abelian) {
        (Some(a), Some(b)) => Some(a.zip(b, linalg::direct_sum)),
        _ => None,
    };
    Ok(HomogeneousSymbol {
        degree: p.degree,
        shape,
        fiber_plus: linalg::direct_sum(&p.fiber_plus, &q.fiber_plus),
        fiber_minus: linalg::direct_sum(&p.fiber_minus, &q.fiber_minus),
        abelian,
        self_adjoint: p.self_adjoint && q.self_adjoint,
    })
}

/// Symbol in a horizontally rotated frame, `n = 1`: `p_θ(ξ) = p(ξ_0, R_θ ξ')`.
///
/// A rotation of `(ξ_1, ξ_2)` is implemented on the fibers by the metaplectic
/// operator `e^{∓iθN}` at `ξ_0 = ±1`.
pub fn rotate_horizontal(p: &HomogeneousSymbol, theta: f64) -> Result<HomogeneousSymbol> {
    if p.shape.n != 1 {
        return Err(Error::UnsupportedDimension { n: p.shape.n });
    }
    let space = p.shape.space();
    let b = space.dim();
    let r = p.shape.rank;
    let phase = |sign: f64| {
        let d = CMat::from_fn(b, b, |i, j| if i == j { (I * (sign * theta * i as f64)).exp() } else { c(0.0) });
        linalg::kron(&linalg::eye(r), &d)
    };
    let (up, um) = (phase(-1.0), phase(1.0));
    // R_θ ω(α) = s·ω(α+θ) with s = ‖e(α+θ)‖₄/‖e(α)‖₄, and degree-m homogeneity
    // on the equator contributes s^m.
    let n4 = |a: f64| (a.cos().powi(4) + a.sin().powi(4)).powf(0.25);
    let abelian = p.abelian.as_ref().map(|a| {
        let k = a.samples.len();
        AbelianTrace {
            samples: (0..k)
                .map(|i| {
                    let alpha = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                    let s = n4(alpha + theta) / n4(alpha);
                    a.eval_angle(alpha + theta) * c(s.powi(p.degree))
                })
                .collect(),
        }
    });
    Ok(HomogeneousSymbol {
        degree: p.degree,
        shape: p.shape,
        fiber_plus: &up * &p.fiber_plus * up.adjoint(),
        fiber_minus: &um * &p.fiber_minus * um.adjoint(),
        abelian,
        self_adjoint: p.self_adjoint,
    })
}

/// `‖ξ‖ = (ξ_0² + ξ_1⁴ + … + ξ_d⁴)^{1/4}`.
pub fn anisotropic_norm(xi: &[f64]) -> f64 {
    let s: f64 = xi[0] * xi[0] + xi[1..].iter().map(|v| v.powi(4)).sum::<f64>();
    s.powf(0.25)
}

/// Level weights `w_k = ½ erfc((k − 0.55N)/(0.1N))` applied to fibers before the
/// Weyl trace. The alternating tail of the parity sum is summed smoothly; the
/// reconstructed symbol is accurate where `|ξ'|²/(2|ξ_0|) ≲ N/16`.
pub fn level_window(space: &HermiteSpace) -> Vec<f64> {
    let n = space.cutoff as f64;
    let w1: Vec<f64> = (0..space.cutoff).map(|k| 0.5 * libm::erfc((k as f64 - 0.55 * n) / (0.1 * n))).collect();
    (0..space.dim())
        .map(|i| space.multi_index(i).iter().map(|&k| w1[k]).product())
        .collect()
}

impl HomogeneousSymbol {
    /// Value on `ξ_0 = sign`, `ξ' = xi_h`, from the fibers (no equator logic).
    pub fn fiber_value_unit(&self, sign: i8, xi_h: &[f64]) -> CMat {
        let space = self.shape.space();
        let n = self.shape.n;
        let (s1, s2) = sign_pattern(sign);
        let q: Vec<f64> = (0..n).map(|j| s1 * xi_h[j]).collect();
        let r: Vec<f64> = (0..n).map(|j| s2 * xi_h[n + j]).collect();
        let probe = weyl_probe(&space, &q, &r);
        let w = level_window(&space);
        let b = space.dim();
        let rank = self.shape.rank;
        let f = self.fiber(sign);
        let mut out = CMat::zeros(rank, rank);
        for a in 0..rank {
            for bb in 0..rank {
                let block = CMat::from_fn(b, b, |i, j| f[(a * b + i, bb * b + j)] * (w[i] * w[j]).sqrt());
                out[(a, bb)] = trace_product(&block, &probe);
            }
        }
        out
    }

    /// Value at a point with `ξ_0 ≠ 0` through homogeneity and the Weyl correspondence.
    pub fn fiber_value(&self, xi: &[f64]) -> CMat {
        let lam = xi[0];
        let sign: i8 = if lam > 0.0 { 1 } else { -1 };
        let s = lam.abs().sqrt();
        let h: Vec<f64> = xi[1..].iter().map(|v| v / s).collect();
        self.fiber_value_unit(sign, &h) * c(lam.abs().powf(self.degree as f64 / 2.0))
    }

    fn abelian_value(&self, omega: &[f64]) -> Result<CMat> {
        let a = self.abelian.as_ref().ok_or(Error::EquatorUnresolved)?;
        if self.shape.n != 1 {
            return Err(Error::EquatorUnresolved);
        }
        let alpha = omega[1].atan2(omega[0]);
        let alpha = if alpha < 0.0 { alpha + 2.0 * std::f64::consts::PI } else { alpha };
        Ok(a.eval_angle(alpha))
    }
}

/// Value of the matrix-valued symbol at `ξ ≠ 0`.
///
/// Outside the band `|ξ_0| < EQUATOR_BAND·‖ξ‖²` the value comes from the fiber
/// at `sign ξ_0`. Inside the band, the point is moved to the unit sphere
/// `ξ = (cos φ, √(sin φ) ω)` and the value is interpolated in `φ` through seven
/// nodes: three fiber values on each side of the band and the abelian trace at
/// `φ = π/2`.
pub fn scalar_eval(p: &HomogeneousSymbol, xi: &[f64]) -> Result<CMat> {
    let d = 2 * p.shape.n;
    if xi.len() != d + 1 {
        return Err(Error::DimensionMismatch(format!("ξ has {} entries", xi.len())));
    }
    let rho = anisotropic_norm(xi);
    if rho == 0.0 {
        return Err(Error::InvalidArgument("ξ = 0".into()));
    }
    if xi[0].abs() >= EQUATOR_BAND * rho * rho {
        return Ok(p.fiber_value(xi));
    }
    let unit: Vec<f64> = crate::group::dilate(1.0 / rho, xi)?;
    let scale = c(rho.powi(p.degree));
    let phi = unit[0].clamp(-1.0, 1.0).acos();
    let sphi = phi.sin();
    let omega: Vec<f64> = unit[1..].iter().map(|v| v / sphi.sqrt()).collect();
    let eq = p.abelian_value(&omega)?;
    let top = EQUATOR_BAND.acos();
    let h = std::f64::consts::FRAC_PI_2 - top;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let nodes = [top - 2.0 * h, top - h, top, half_pi, std::f64::consts::PI - top, std::f64::consts::PI - top + h, std::f64::consts::PI - top + 2.0 * h];
    let values: Vec<CMat> = nodes
        .iter()
        .map(|&ph| {
            if (ph - half_pi).abs() < 1e-15 {
                eq.clone()
            } else {
                let s = ph.sin().sqrt();
                let mut pt = vec![ph.cos()];
                pt.extend(omega.iter().map(|w| w * s));
                p.fiber_value(&pt)
            }
        })
        .collect();
    let mut out = CMat::zeros(p.shape.rank, p.shape.rank);
    for (i, vi) in values.iter().enumerate() {
        let mut l = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                l *= (phi - xj) / (nodes[i] - xj);
            }
        }
        out += vi * c(l);
    }
    Ok(out * scale)
}

/// Finite list of homogeneous components of strictly decreasing degree.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolExpansion {
    pub components: Vec<HomogeneousSymbol>,
    pub truncation_degree: i32,
}

impl SymbolExpansion {
    pub fn new(mut components: Vec<HomogeneousSymbol>, truncation_degree: i32) -> Result<Self> {
        components.sort_by(|a, b| b.degree.cmp(&a.degree));
        for w in components.windows(2) {
            if w[0].degree == w[1].degree {
                return Err(Error::InvalidArgument(format!("repeated degree {}", w[0].degree)));
            }
            if w[0].shape != w[1].shape {
                return Err(Error::DimensionMismatch("components differ in shape".into()));
            }
        }
        components.retain(|c| c.degree >= truncation_degree);
        Ok(Self { components, truncation_degree })
    }

    /// Exact finite expansion (no truncation in products beyond the other factor's).
    pub fn exact(components: Vec<HomogeneousSymbol>) -> Result<Self> {
        Self::new(components, EXACT_TRUNCATION)
    }

    pub fn single(p: HomogeneousSymbol) -> Self {
        Self { components: vec![p], truncation_degree: EXACT_TRUNCATION }
    }

    pub fn unit(shape: SymbolShape) -> Self {
        Self::single(HomogeneousSymbol::unit(shape))
    }

    pub fn with_truncation(&self, t: i32) -> Self {
        Self {
            components: self.components.iter().filter(|c| c.degree >= t).cloned().collect(),
            truncation_degree: t,
        }
    }

    pub fn shape(&self) -> Option<SymbolShape> {
        self.components.first().map(|c| c.shape)
    }

    pub fn order(&self) -> Option<i32> {
        self.components.first().map(|c| c.degree)
    }

    pub fn component(&self, degree: i32) -> Option<&HomogeneousSymbol> {
        self.components.iter().find(|c| c.degree == degree)
    }

    pub fn principal(&self) -> Option<&HomogeneousSymbol> {
        self.components.first()
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.components.iter().map(|c| c.degree).collect()
    }

    /// Sum with componentwise degree matching; truncation is the larger of the two.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let trunc = self.truncation_degree.max(other.truncation_degree);
        let mut out: Vec<HomogeneousSymbol> = Vec::new();
        let mut degs: Vec<i32> = self.degrees();
        degs.extend(other.degrees());
        degs.sort_by(|a, b| b.cmp(a));
        degs.dedup();
        for d in degs.into_iter().filter(|&d| d >= trunc) {
            let v = match (self.component(d), other.component(d)) {
                (Some(a), Some(b)) => a.add(b)?,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            };
            out.push(v);
        }
        Self::new(out, trunc)
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale(z)).collect(),
            truncation_degree: self.truncation_degree,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c(-1.0)))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            components: self.components.iter().map(adjoint_symbol).collect(),
            truncation_degree: self.truncation_degree,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            components: self.components.iter().map(transpose_symbol).collect(),
            truncation_degree: self.truncation_degree,
        }
    }

    /// Largest entry over all components on the resolved block.
    pub fn resolved_max_abs(&self) -> f64 {
        self.components
            .iter()
            .map(|c| linalg::max_abs(&c.resolved_block(1)).max(linalg::max_abs(&c.resolved_block(-1))))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Drops components whose fibers vanish to `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self {
            components: self.components.iter().filter(|c| c.max_abs() > tol).cloned().collect(),
            truncation_degree: self.truncation_degree,
        }
    }
}

/// Termwise product regrouped by degree, truncated at the larger truncation degree.
///
/// Pair products are formed in parallel and reduced in a fixed order, so the
/// result does not depend on the thread count.
pub fn expansion_mul(p: &SymbolExpansion, q: &SymbolExpansion) -> Result<SymbolExpansion> {
    let (sp, sq) = match (p.shape(), q.shape()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Ok(SymbolExpansion {
                components: Vec::new(),
                truncation_degree: p.truncation_degree.max(q.truncation_degree),
            })
        }
    };
    if sp != sq {
        return Err(Error::DimensionMismatch("expansion shapes differ".into()));
    }
    let trunc = p.truncation_degree.max(q.truncation_degree);
    let pairs: Vec<(usize, usize)> = (0..p.components.len())
        .flat_map(|i| (0..q.components.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| p.components[i].degree + q.components[j].degree >= trunc)
        .collect();
    let products: Vec<HomogeneousSymbol> = pairs
        .par_iter()
        .map(|&(i, j)| star(&p.components[i], &q.components[j]))
        .collect::<Result<Vec<_>>>()?;
    let mut degs: Vec<i32> = products.iter().map(|c| c.degree).collect();
    degs.sort_by(|a, b| b.cmp(a));
    degs.dedup();
    let mut out = Vec::with_capacity(degs.len());
    for d in degs {
        let mut acc: Option<HomogeneousSymbol> = None;
        for prod in products.iter().filter(|c| c.degree == d) {
            acc = Some(match acc {
                None => prod.clone(),
                Some(a) => a.add(prod)?,
            });
        }
        out.push(acc.unwrap());
    }
    SymbolExpansion::new(out, trunc)
}

/// Inverse expansion of `P` to `terms` homogeneous orders:
/// `q_{−m} = p_m⁻¹`, `q_{−m−j} = −q_{−m} Σ_{k=1}^{j} p_{m−k} q_{−m−j+k}`.
pub fn inverse_expansion(p: &SymbolExpansion, terms: usize) -> Result<SymbolExpansion> {
    let principal = p.principal().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let m = principal.degree;
    let q0 = invert_homogeneous(principal)?;
    let mut q: Vec<HomogeneousSymbol> = vec![q0.clone()];
    for j in 1..terms as i32 {
        let mut acc = HomogeneousSymbol::zero(principal.shape, -j);
        for k in 1..=j {
            if let Some(pk) = p.component(m - k) {
                let qq = &q[(j - k) as usize];
                acc = acc.add(&star(pk, qq)?)?;
            }
        }
        q.push(star(&q0, &acc)?.scale(c(-1.0)));
    }
    let lowest = -m - terms as i32 + 1;
    SymbolExpansion::new(q, lowest.max(EXACT_TRUNCATION))
}

/// Parametrix `Q` with `P Q = 1 + R`, `R` of top degree at most `m − depth`.
pub fn neumann_parametrix(p: &SymbolExpansion, depth: usize) -> Result<SymbolExpansion> {
    let m = p.order().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let terms = (depth as i32 - m).max(1) as usize;
    inverse_expansion(p, terms)
}

/// Remainder `P Q − 1` computed without truncation.
pub fn parametrix_remainder(p: &SymbolExpansion, q: &SymbolExpansion) -> Result<SymbolExpansion> {
    let shape = p.shape().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let pe = SymbolExpansion { components: p.components.clone(), truncation_degree: EXACT_TRUNCATION };
    let qe = SymbolExpansion { components: q.components.clone(), truncation_degree: EXACT_TRUNCATION };
    expansion_mul(&pe, &qe)?.sub(&SymbolExpansion::unit(shape))
}

/// Random symbol whose fiber entries are damped by `(1 + level)^{m/4}` in
/// each index, mimicking the growth of genuine symbol fibers.
pub fn random_symbol<R: Rng>(rng: &mut R, shape: SymbolShape, degree: i32, amplitude: f64) -> HomogeneousSymbol {
    let space = shape.space();
    let b = space.dim();
    let weight: Vec<f64> = (0..shape.fiber_dim())
        .map(|i| {
            let lvl = space.level(i % b) as f64;
            (1.0 + lvl).powf(degree as f64 / 4.0 - 1.0)
        })
        .collect();
    let mut gen = |_sign: i8| {
        CMat::from_fn(shape.fiber_dim(), shape.fiber_dim(), |i, j| {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            z * (amplitude * weight[i] * weight[j])
        })
    };
    let fp = gen(1);
    let fm = gen(-1);
    HomogeneousSymbol::new(degree, shape, fp, fm).expect("shape is consistent")
}

/// Random expansion with one component per degree in `degrees`.
pub fn random_expansion<R: Rng>(rng: &mut R, shape: SymbolShape, degrees: &[i32], truncation: i32) -> SymbolExpansion {
    let comps = degrees.iter().map(|&d| random_symbol(rng, shape, d, 1.0)).collect();
    SymbolExpansion::new(comps, truncation).expect("distinct degrees")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand::SeedableRng;

    fn shape1(n: usize) -> SymbolShape {
        SymbolShape::new(1, 1, n)
    }

    #[test]
    fn unit_and_validation() {
        let s = shape1(8);
        let u = HomogeneousSymbol::unit(s);
        let p = make_homogeneous(0.0, u.fiber_plus.clone(), u.fiber_minus.clone(), 1, 8).unwrap();
        assert_eq!(p.shape, s);
        assert!(make_homogeneous(0.5, u.fiber_plus.clone(), u.fiber_minus.clone(), 1, 8).is_err());
        assert!(make_homogeneous(0.0, u.fiber_plus.clone(), linalg::eye(7), 1, 8).is_err());
        let x0 = HomogeneousSymbol::frame_symbol(1, 8, 0).unwrap();
        assert_eq!(x0.degree, 2);
        assert!((x0.fiber_plus[(3, 3)] - c(1.0)).norm() < 1e-15);
        assert!((x0.fiber_minus[(3, 3)] - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn frame_commutator_is_minus_central_field() {
        let n = 16;
        let x1 = HomogeneousSymbol::frame_symbol(1, n, 1).unwrap();
        let x2 = HomogeneousSymbol::frame_symbol(1, n, 2).unwrap();
        let x0 = HomogeneousSymbol::frame_symbol(1, n, 0).unwrap();
        // With σ(X) = i·σ((1/i)X) the commutator of σ(X_1), σ(X_2) is minus the
        // commutator of the (1/i)-normalized symbols, and should equal σ(−X_0).
        let comm = star(&x1, &x2).unwrap().sub(&star(&x2, &x1).unwrap()).unwrap();
        let lhs = comm.scale(c(-1.0));
        let rhs = x0.scale(-I);
        assert!(lhs.resolved_distance(&rhs) < 1e-12);
        assert_eq!(lhs.degree, 2);
    }

    #[test]
    fn adjoint_and_transpose_laws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = SymbolShape::new(1, 2, 6);
        let p = random_symbol(&mut rng, s, 1, 1.0);
        let q = random_symbol(&mut rng, s, -2, 1.0);
        let lhs = adjoint_symbol(&star(&p, &q).unwrap());
        let rhs = star(&adjoint_symbol(&q), &adjoint_symbol(&p)).unwrap();
        assert!(lhs.distance(&rhs) < 1e-10);
        let lt = transpose_symbol(&star(&p, &q).unwrap());
        let rt = star(&transpose_symbol(&q), &transpose_symbol(&p)).unwrap();
        assert!(lt.distance(&rt) < 1e-10);
        assert!(transpose_symbol(&transpose_symbol(&p)).distance(&p) == 0.0);
        let h = HomogeneousSymbol::frame_symbol(1, 6, 1).unwrap();
        assert!(adjoint_symbol(&h).distance(&h) == 0.0);
    }

    #[test]
    fn inversion_recovers_unit_on_resolved_block() {
        let n = 16;
        let shape = shape1(n);
        let space = shape.space();
        // Folland–Stein fiber at λ = 0: N + 1/2 on both signs.
        let f = space.number() + linalg::eye(n) * c(0.5);
        let fs = HomogeneousSymbol::new(2, shape, f.clone(), f).unwrap();
        let inv = invert_homogeneous(&fs).unwrap();
        assert_eq!(inv.degree, -2);
        let prod = star(&fs, &inv).unwrap();
        assert!(prod.resolved_distance(&HomogeneousSymbol::unit(shape)) < 1e-8);
        let u = HomogeneousSymbol::unit(shape);
        assert!(invert_homogeneous(&u).unwrap().distance(&u) < 1e-15);
        let g = space.number();
        let sing = HomogeneousSymbol::new(2, shape, g.clone(), g + linalg::eye(n)).unwrap();
        assert!(matches!(invert_homogeneous(&sing), Err(Error::NotInvertible { sign: 1, .. })));
    }

    #[test]
    fn anisotropic_norm_values() {
        assert_eq!(anisotropic_norm(&[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(anisotropic_norm(&[0.0, 0.0, 1.0]), 1.0);
        assert!((anisotropic_norm(&[4.0, 2.0, 0.0]) - 2f64.powf(1.25)).abs() < 1e-14);
    }

    #[test]
    fn scalar_eval_of_frame_symbols_and_unit() {
        let n = 32;
        let x0 = HomogeneousSymbol::frame_symbol(1, n, 0).unwrap();
        let x1 = HomogeneousSymbol::frame_symbol(1, n, 1).unwrap();
        let x2 = HomogeneousSymbol::frame_symbol(1, n, 2).unwrap();
        let u = HomogeneousSymbol::unit(shape1(n));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // Points inside the resolved region |ξ'|²/(2|ξ_0|) ≤ N/16.
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lam: f64 = sign * rng.gen_range(0.2..2.0);
            let rad = (2.0 * lam.abs() * 2.0).sqrt() * rng.gen_range(0.0..1.0);
            let ang: f64 = rng.gen_range(0.0..6.3);
            let xi = [lam, rad * ang.cos(), rad * ang.sin()];
            let v0 = scalar_eval(&x0, &xi).unwrap()[(0, 0)];
            let v1 = scalar_eval(&x1, &xi).unwrap()[(0, 0)];
            let v2 = scalar_eval(&x2, &xi).unwrap()[(0, 0)];
            let vu = scalar_eval(&u, &xi).unwrap()[(0, 0)];
            assert!((v0 - c(xi[0])).norm() < 1e-6, "{v0} vs {}", xi[0]);
            assert!((v1 - c(xi[1])).norm() < 1e-6, "{v1} vs {}", xi[1]);
            assert!((v2 - c(xi[2])).norm() < 1e-6, "{v2} vs {}", xi[2]);
            assert!((vu - c(1.0)).norm() < 1e-6, "{vu}");
        }
    }

    #[test]
    fn scalar_eval_in_equator_band_uses_abelian_trace() {
        let n = 32;
        let x1 = HomogeneousSymbol::frame_symbol(1, n, 1).unwrap();
        // A point on the equator itself.
        let v = scalar_eval(&x1, &[0.0, 0.6, -0.3]).unwrap()[(0, 0)];
        assert!((v - c(0.6)).norm() < 1e-9);
        let mut no_trace = x1.clone();
        no_trace.abelian = None;
        assert!(matches!(scalar_eval(&no_trace, &[0.0, 0.6, -0.3]), Err(Error::EquatorUnresolved)));
        assert!(scalar_eval(&x1, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn scalar_eval_is_homogeneous() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = SymbolShape::new(1, 2, 12);
        let p = random_symbol(&mut rng, s, -3, 1.0);
        let xi = [0.7, 0.4, -0.5];
        let base = scalar_eval(&p, &xi).unwrap();
        for t in [0.5, 2.0, 5.0] {
            let v = scalar_eval(&p, &crate::group::dilate(t, &xi).unwrap()).unwrap();
            let expect = &base * c(t.powi(-3));
            assert!(linalg::max_abs(&(v - &expect)) <= 1e-8 * linalg::max_abs(&expect));
        }
    }

    #[test]
    fn expansion_degree_bookkeeping_and_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let s = SymbolShape::new(1, 1, 6);
        let p = random_expansion(&mut rng, s, &[2, 1], EXACT_TRUNCATION);
        let q = random_expansion(&mut rng, s, &[-2, -3], EXACT_TRUNCATION);
        let pq = expansion_mul(&p, &q).unwrap();
        assert_eq!(pq.degrees(), vec![0, -1, -2]);
        let one = SymbolExpansion::unit(s);
        let same = expansion_mul(&one, &p).unwrap();
        for (a, b) in same.components.iter().zip(&p.components) {
            assert!(a.distance(b) < 1e-15);
        }
        let t = expansion_mul(&p.with_truncation(-1), &q.with_truncation(-3)).unwrap();
        assert_eq!(t.degrees(), vec![0, -1]);
    }

    #[test]
    fn parametrix_of_perturbed_folland_stein() {
        let n = 16;
        let s = shape1(n);
        let space = s.space();
        let f = space.number() + linalg::eye(n) * c(0.5);
        let fs = HomogeneousSymbol::new(2, s, f.clone(), f).unwrap();
        let v = HomogeneousSymbol::frame_symbol(1, n, 1).unwrap().scale(c(0.3));
        let p = SymbolExpansion::exact(vec![fs, v]).unwrap();
        let mut last = i32::MAX;
        for depth in 1..=6 {
            let q = neumann_parametrix(&p, depth).unwrap();
            let r = parametrix_remainder(&p, &q).unwrap().prune(1e-12);
            let top = r.order().unwrap_or(i32::MIN);
            assert!(top <= 2 - depth as i32, "depth {depth}: remainder degree {top}");
            assert!(top <= last);
            last = top;
        }
        let q4 = neumann_parametrix(&p, 4).unwrap();
        let r4 = parametrix_remainder(&p, &q4).unwrap().prune(1e-12);
        assert!(r4.order().unwrap() <= -2);
        // Homogeneous input: exact inverse, empty remainder.
        let single = SymbolExpansion::exact(vec![p.components[0].clone()]).unwrap();
        let qi = neumann_parametrix(&single, 3).unwrap();
        let r = parametrix_remainder(&single, &qi).unwrap();
        assert!(r.components.iter().all(|c| linalg::max_abs(&c.resolved_block(1)) < 1e-12 && linalg::max_abs(&c.resolved_block(-1)) < 1e-12));
    }

    #[test]
    fn abelian_trace_interpolates_smooth_functions() {
        let a = AbelianTrace::from_fn(|w| CMat::from_element(1, 1, c(w[0] * w[0] - 0.3 * w[1])));
        for alpha in [0.1, 1.0, 2.5, 4.0, 6.0] {
            let (s, co) = f64::sin_cos(alpha);
            let nrm: f64 = (co.powi(4) + s.powi(4)).powf(0.25);
            let expect = (co / nrm).powi(2) - 0.3 * s / nrm;
            let got = a.eval_angle(alpha)[(0, 0)];
            assert!((got.re - expect).abs() < 1e-9, "{alpha} {got} {expect}");
        }
    }

    #[test]
    fn horizontal_rotation_matches_rotated_evaluation() {
        let n = 32;
        let x1 = HomogeneousSymbol::frame_symbol(1, n, 1).unwrap();
        let theta = 0.7;
        let r = rotate_horizontal(&x1, theta).unwrap();
        for xi in [[0.8, 0.3, -0.4], [-1.1, -0.2, 0.5]] {
            let rotated = [xi[0], theta.cos() * xi[1] - theta.sin() * xi[2], theta.sin() * xi[1] + theta.cos() * xi[2]];
            let lhs = scalar_eval(&r, &xi).unwrap()[(0, 0)];
            assert!((lhs - c(rotated[1])).norm() < 1e-6, "{lhs} vs {}", rotated[1]);
        }
        let v = r.abelian.as_ref().unwrap().eval_angle(0.0)[(0, 0)];
        assert!((v.re - theta.cos()).abs() < 1e-9);
    }

    #[test]
    fn direct_sums_are_block_diagonal() {
        let s = SymbolShape::new(1, 1, 4);
        let u = HomogeneousSymbol::unit(s);
        let z = HomogeneousSymbol::zero(s, 0);
        let d = direct_sum_symbol(&u, &z).unwrap();
        assert_eq!(d.shape.rank, 2);
        assert_eq!(d.fiber_trace_sum(), c(8.0));
    }

    proptest! {
        #[test]
        fn star_is_associative(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = SymbolShape::new(1, 1, 8);
            let a = random_symbol(&mut rng, s, 1, 1.0);
            let b = random_symbol(&mut rng, s, 0, 1.0);
            let cc = random_symbol(&mut rng, s, -2, 1.0);
            let l = star(&star(&a, &b).unwrap(), &cc).unwrap();
            let r = star(&a, &star(&b, &cc).unwrap()).unwrap();
            prop_assert!(l.distance(&r) < 1e-10);
        }
    }
}
