//! Quadrature rules on intervals, round spheres and the anisotropic unit
//! sphere `‖ξ‖ = 1` of the Heisenberg dual.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::symbol::EQUATOR_BAND;
use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(count.max(1)).unwrap());
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Composite Gauss–Legendre rule over consecutive panels `[breaks[i], breaks[i+1]]`.
pub fn composite_gauss_legendre(breaks: &[f64], per_panel: usize) -> Vec<(f64, f64)> {
    breaks.windows(2).flat_map(|w| gauss_legendre(per_panel, w[0], w[1])).collect()
}

/// Equally spaced nodes on `[0, 2π)` with weights `2π/k`.
pub fn periodic_trapezoid(k: usize) -> Vec<(f64, f64)> {
    (0..k).map(|i| (2.0 * PI * i as f64 / k as f64, 2.0 * PI / k as f64)).collect()
}

/// Product rule on the round sphere `S^{m−1} ⊂ ℝ^m` in hyperspherical
/// coordinates: Gauss–Legendre in the polar angles and the trapezoid rule in
/// the azimuth. Weights carry the surface Jacobian.
pub fn round_sphere_rule(m: usize, polar_nodes: usize, azimuth_nodes: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(m >= 2, "sphere dimension");
    let azimuth = periodic_trapezoid(azimuth_nodes);
    let mut points: Vec<(Vec<f64>, f64)> = azimuth.iter().map(|&(a, w)| (vec![a.cos(), a.sin()], w)).collect();
    for dim in 3..=m {
        let polar = gauss_legendre(polar_nodes, 0.0, PI);
        let mut next = Vec::with_capacity(points.len() * polar.len());
        for &(th, wt) in &polar {
            let (s, co) = th.sin_cos();
            let jac = s.powi(dim as i32 - 2);
            for (p, w) in &points {
                let mut v = vec![co];
                v.extend(p.iter().map(|x| x * s));
                next.push((v, w * wt * jac));
            }
        }
        points = next;
    }
    points
}

/// Surface measure used on `‖ξ‖ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceMeasure {
    /// `ι_E dξ` with `E = 2ξ_0∂_0 + Σ ξ_j∂_j`, the measure for which
    /// `∫_{ℝ^{d+1}} f dξ = ∫_0^∞ ∫_S f(δ_ρ ω) σ_E(ω) ρ^{d+1} dρ`.
    EulerForm,
    /// Euclidean surface measure induced from `ℝ^{d+1}`.
    Euclidean,
}

impl SurfaceMeasure {
    pub fn note(&self) -> &'static str {
        match self {
            SurfaceMeasure::EulerForm => {
                "residue densities use (2π)^-(d+1) ∫_{‖ξ‖=1} tr p_{-(d+2)} ι_E dξ, the normalization matching the homogeneous kernel expansion"
            }
            SurfaceMeasure::Euclidean => {
                "residue densities use (2π)^-(d+1) ∫_{‖ξ‖=1} tr p_{-(d+2)} dA with dA the Euclidean surface measure"
            }
        }
    }
}

/// Treatment of the band `|ξ_0| < EQUATOR_BAND` on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquatorRule {
    /// Evaluate through the symbol's own equator logic (abelian trace for `n = 1`).
    Interpolate,
    /// Evaluate the fibers directly at every node with `ξ_0 ≠ 0`.
    FiberContinuation,
}

/// Quadrature specification for the anisotropic unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per `φ` panel (five panels).
    pub phi_nodes: usize,
    /// Azimuthal nodes of the horizontal sphere (polar angles use half as many).
    pub omega_nodes: usize,
    pub equator_band: f64,
    pub measure: SurfaceMeasure,
    pub equator_rule: EquatorRule,
    /// Repeat with doubled node counts and raise `QuadratureUnstable` on a relative change above `1e-4`.
    pub refine_check: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            phi_nodes: 16,
            omega_nodes: 64,
            equator_band: EQUATOR_BAND,
            measure: SurfaceMeasure::EulerForm,
            equator_rule: EquatorRule::Interpolate,
            refine_check: true,
        }
    }
}

impl QuadratureSpec {
    pub fn refined(&self) -> Self {
        Self { phi_nodes: 2 * self.phi_nodes, omega_nodes: 2 * self.omega_nodes, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_nodes < 2 || self.omega_nodes < 4 || !(self.equator_band > 0.0 && self.equator_band < 1.0) {
            return Err(Error::InvalidArgument(format!("quadrature spec {self:?}")));
        }
        Ok(())
    }
}

/// A node on `‖ξ‖ = 1` with its weight.
#[derive(Clone, Debug)]
pub struct SphereNode {
    pub xi: Vec<f64>,
    pub weight: f64,
}

/// Nodes on the anisotropic unit sphere of `H^{2n+1}`.
///
/// The sphere is parametrized by `ξ_0 = cos φ`, `ξ' = √(sin φ) v/‖v‖₄` with
/// `v` on the round sphere `S^{d−1}`; then `ι_E dξ = sin^{n−1}φ ‖v‖₄^{−d} dφ dA(v)`.
/// The `φ` range is split at the equator band and at `π/2` so that the panel
/// boundaries fall on the band edges.
pub fn anisotropic_sphere_rule(n: usize, spec: &QuadratureSpec) -> Result<Vec<SphereNode>> {
    spec.validate()?;
    let d = 2 * n;
    let top = spec.equator_band.acos();
    let breaks = [0.0, 0.5 * top, top, 0.5 * PI, PI - top, PI - 0.5 * top, PI];
    let phi = composite_gauss_legendre(&breaks, spec.phi_nodes);
    let horizontal = round_sphere_rule(d, (spec.omega_nodes / 2).max(2), spec.omega_nodes);
    let mut out = Vec::with_capacity(phi.len() * horizontal.len());
    for &(ph, wp) in &phi {
        let (s, co) = ph.sin_cos();
        for (v, wv) in &horizontal {
            let n4 = v.iter().map(|x| x.powi(4)).sum::<f64>().powf(0.25);
            let mut xi = vec![co];
            xi.extend(v.iter().map(|x| s.sqrt() * x / n4));
            let mut w = wp * wv * s.powi(n as i32 - 1) * n4.powi(-(d as i32));
            if spec.measure == SurfaceMeasure::Euclidean {
                w *= euclidean_factor(&xi);
            }
            out.push(SphereNode { xi, weight: w });
        }
    }
    Ok(out)
}

/// `dA / ι_E dξ = |∇‖ξ‖⁴| / 4` on `‖ξ‖ = 1`, with `|∇‖ξ‖⁴|` written through
/// `E·∇‖ξ‖⁴ = 4`.
pub fn euclidean_factor(xi: &[f64]) -> f64 {
    let g2 = 4.0 * xi[0] * xi[0] + 16.0 * xi[1..].iter().map(|x| x.powi(6)).sum::<f64>();
    g2.sqrt() / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(5, 0.0, 2.0);
        let s: f64 = r.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn round_sphere_areas() {
        let s1: f64 = round_sphere_rule(2, 4, 16).iter().map(|p| p.1).sum();
        assert!((s1 - 2.0 * PI).abs() < 1e-13);
        let s2: f64 = round_sphere_rule(3, 8, 16).iter().map(|p| p.1).sum();
        assert!((s2 - 4.0 * PI).abs() < 1e-12);
        let s3: f64 = round_sphere_rule(4, 16, 16).iter().map(|p| p.1).sum();
        assert!((s3 - 2.0 * PI * PI).abs() < 1e-12, "{s3}");
    }

    #[test]
    fn sphere_nodes_lie_on_the_unit_sphere() {
        let nodes = anisotropic_sphere_rule(1, &QuadratureSpec::default()).unwrap();
        for nd in nodes.iter().step_by(97) {
            assert!((crate::symbol::anisotropic_norm(&nd.xi) - 1.0).abs() < 1e-13);
            assert!(nd.weight > 0.0);
        }
    }
}
