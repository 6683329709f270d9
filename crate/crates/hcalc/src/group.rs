//! The Heisenberg group `H^{2n+1}`: group law, dilations, left-invariant
//! frame, Levi forms and their signatures, the `Y(q)` condition and frame maps.
//!
//! Coordinates are ordered `(x_0, x_1, …, x_{2n})` with `x_0` central.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigen, CMat, RMat};
use crate::projection::riesz_projection;
use crate::{Error, Result};

/// Dimension data of `H^{2n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergGroupSpec {
    pub n: usize,
}

impl HeisenbergGroupSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        Ok(Self { n })
    }

    /// Horizontal dimension `d = 2n`.
    pub fn d(&self) -> usize {
        2 * self.n
    }

    /// Homogeneous dimension `d + 2`.
    pub fn homogeneous_dim(&self) -> usize {
        2 * self.n + 2
    }

    /// Degree `−(d+2)` whose symbol component carries the residue density.
    pub fn critical_degree(&self) -> i32 {
        -(self.homogeneous_dim() as i32)
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }
}

/// A point of `H^{2n+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub coords: Vec<f64>,
}

impl GroupPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() % 2 == 0 || coords.len() < 3 {
            return Err(Error::DimensionMismatch(format!("{} coordinates", coords.len())));
        }
        Ok(Self { coords })
    }

    pub fn identity(spec: HeisenbergGroupSpec) -> Self {
        Self { coords: vec![0.0; spec.dim()] }
    }

    pub fn n(&self) -> usize {
        (self.coords.len() - 1) / 2
    }

    pub fn inverse(&self) -> Self {
        Self { coords: self.coords.iter().map(|x| -x).collect() }
    }
}

/// `z_0 = x_0 + y_0 + ½ Σ_j (x_{n+j} y_j − x_j y_{n+j})`, horizontal parts add.
pub fn group_law(x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
    if x.coords.len() != y.coords.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} coordinates",
            x.coords.len(),
            y.coords.len()
        )));
    }
    let n = x.n();
    let mut z: Vec<f64> = x.coords.iter().zip(&y.coords).map(|(a, b)| a + b).collect();
    let mut twist = 0.0;
    for j in 1..=n {
        twist += x.coords[n + j] * y.coords[j] - x.coords[j] * y.coords[n + j];
    }
    z[0] += 0.5 * twist;
    Ok(GroupPoint { coords: z })
}

/// Anisotropic dilation `(t²ξ_0, tξ_1, …, tξ_d)`.
pub fn dilate(t: f64, xi: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor {t} must be positive")));
    }
    Ok(xi
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 { t * t * v } else { t * v })
        .collect())
}

pub fn dilate_point(t: f64, x: &GroupPoint) -> Result<GroupPoint> {
    Ok(GroupPoint { coords: dilate(t, &x.coords)? })
}

/// A vector field `Σ_i (c_i + Σ_k L_{ik} x_k) ∂_i` with affine coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineField {
    pub constant: Vec<f64>,
    pub linear: RMat,
}

impl AffineField {
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        (0..self.constant.len())
            .map(|i| self.constant[i] + (0..x.len()).map(|k| self.linear[(i, k)] * x[k]).sum::<f64>())
            .collect()
    }

    /// Lie bracket `[V, W]`; for affine fields the result is affine again.
    pub fn bracket(&self, other: &AffineField) -> AffineField {
        let dim = self.constant.len();
        // [V,W]^i = Σ_k V^k ∂_k W^i − W^k ∂_k V^i, with ∂_k W^i = L^W_{ik} constant.
        let lv = &self.linear;
        let lw = &other.linear;
        let mut constant = vec![0.0; dim];
        for i in 0..dim {
            for k in 0..dim {
                constant[i] += self.constant[k] * lw[(i, k)] - other.constant[k] * lv[(i, k)];
            }
        }
        let linear = lw * lv - lv * lw;
        AffineField { constant, linear }
    }
}

/// The left-invariant frame `X_0 = ∂_0`, `X_j = ∂_j + ½x_{n+j}∂_0`, `X_{n+j} = ∂_{n+j} − ½x_j∂_0`.
pub fn left_frame(spec: HeisenbergGroupSpec) -> Vec<AffineField> {
    let n = spec.n;
    let dim = spec.dim();
    (0..dim)
        .map(|f| {
            let mut constant = vec![0.0; dim];
            constant[f] = 1.0;
            let mut linear = RMat::zeros(dim, dim);
            if f >= 1 && f <= n {
                linear[(0, n + f)] = 0.5;
            } else if f > n {
                linear[(0, f - n)] = -0.5;
            }
            AffineField { constant, linear }
        })
        .collect()
}

/// Components of the contact form `θ⁰ = dx_0 + ½Σ(x_j dx_{n+j} − x_{n+j} dx_j)` at `x`.
pub fn contact_form(x: &[f64]) -> Vec<f64> {
    let n = (x.len() - 1) / 2;
    let mut out = vec![0.0; x.len()];
    out[0] = 1.0;
    for j in 1..=n {
        out[j] = -0.5 * x[n + j];
        out[n + j] = 0.5 * x[j];
    }
    out
}

/// Structure constants: coefficients of `[X_i, X_j]` in the frame.
pub fn bracket(i: usize, j: usize, spec: HeisenbergGroupSpec) -> Result<Vec<f64>> {
    let dim = spec.dim();
    if i >= dim || j >= dim {
        return Err(Error::InvalidArgument(format!("frame index ({i},{j}) out of range")));
    }
    let n = spec.n;
    let mut out = vec![0.0; dim];
    if i >= 1 && i <= n && j == i + n {
        out[0] = -1.0;
    } else if j >= 1 && j <= n && i == j + n {
        out[0] = 1.0;
    }
    Ok(out)
}

/// Hermitian value of the Levi form in a chosen `T_{1,0}` frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LeviFormMatrix {
    pub matrix: CMat,
}

#[derive(Deserialize, Serialize)]
struct LeviJson {
    n: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl LeviFormMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch("Levi form must be square".into()));
        }
        if crate::linalg::hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::InvalidArgument("Levi form must be Hermitian".into()));
        }
        Ok(Self { matrix })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let mut m = CMat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self { matrix: m }
    }

    /// Parses `{"n": int, "matrix": [[[re, im], …], …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LeviJson = serde_json::from_str(text)?;
        if raw.matrix.len() != raw.n || raw.matrix.iter().any(|r| r.len() != raw.n) {
            return Err(Error::DimensionMismatch("matrix shape does not match n".into()));
        }
        let m = CMat::from_fn(raw.n, raw.n, |i, j| Complex64::new(raw.matrix[i][j][0], raw.matrix[i][j][1]));
        Self::new(m)
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.matrix.nrows();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| [self.matrix[(i, j)].re, self.matrix[(i, j)].im]).collect())
            .collect();
        Ok(serde_json::to_string(&LeviJson { n, matrix })?)
    }
}

/// Eigenvalues of magnitude below this count as degenerate.
pub const SIGNATURE_DEAD_BAND: f64 = 1e-10;

/// Numbers `(κ₊, κ₋)` of positive and negative eigenvalues.
pub fn levi_signature(l: &LeviFormMatrix) -> Result<(usize, usize)> {
    let (vals, _) = hermitian_eigen(&l.matrix);
    let mut kp = 0;
    let mut km = 0;
    for v in vals {
        if v.abs() < SIGNATURE_DEAD_BAND {
            return Err(Error::DegenerateLeviForm { eigenvalue: v });
        }
        if v > 0.0 {
            kp += 1;
        } else {
            km += 1;
        }
    }
    Ok((kp, km))
}

/// Projection onto the negative eigenspace as the contour integral
/// `(2πi)⁻¹∮(λ − L)⁻¹ dλ`.
///
/// `bounds = (c₂, c₁)` encloses the negative spectrum `[c₂, c₁]`; when absent it
/// is read off the spectrum. The circle has center `(c₂+c₁)/2` and radius
/// `(c₁−c₂)/2` plus 10% of the gap between `c₁` and the nonnegative spectrum.
pub fn negative_eigenprojection(l: &LeviFormMatrix, bounds: Option<(f64, f64)>) -> Result<CMat> {
    let (vals, _) = hermitian_eigen(&l.matrix);
    let dim = l.matrix.nrows();
    let negatives: Vec<f64> = vals.iter().cloned().filter(|&v| v < 0.0).collect();
    if negatives.is_empty() && bounds.is_none() {
        return Ok(CMat::zeros(dim, dim));
    }
    let (c2, c1) = match bounds {
        Some(b) => b,
        None => (negatives[0], *negatives.last().unwrap()),
    };
    let next = vals.iter().cloned().filter(|&v| v >= 0.0).fold(f64::INFINITY, f64::min);
    let gap = if next.is_finite() { next - c1 } else { (c1 - c2).abs().max(1.0) };
    let margin = 0.1 * gap.max(0.0);
    let center = Complex64::new(0.5 * (c1 + c2), 0.0);
    let radius = 0.5 * (c1 - c2) + margin.max(1e-3 * (1.0 + c2.abs()));
    riesz_projection(&l.matrix, center, radius)
}

/// `Y(q)`: `q ∉ {κ₊, …, n−κ₋} ∪ {κ₋, …, n−κ₊}`.
pub fn y_condition(q: usize, kappa_plus: usize, kappa_minus: usize, n: usize) -> bool {
    let in_first = kappa_plus <= q && q + kappa_minus <= n;
    let in_second = kappa_minus <= q && q + kappa_plus <= n;
    !(in_first || in_second)
}

/// Whether `S_{b;q}` is a zeroth-order projection of the calculus:
/// `Π₀(∂̄_{b;q})` needs `Y(q+1)` unless `q = n`, and `Π₀(∂̄*_{b;q})` needs
/// `Y(q−1)` unless `q = 0`.
pub fn szego_projection_gate(q: usize, kappa_plus: usize, kappa_minus: usize, n: usize) -> bool {
    let above = q == n || y_condition(q + 1, kappa_plus, kappa_minus, n);
    let below = q == 0 || y_condition(q - 1, kappa_plus, kappa_minus, n);
    above && below
}

/// Linear identification of `(T_aM/H_a) ⊕ H_a` with `H^{2n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMap {
    pub linear_map: RMat,
}

impl FrameMap {
    pub fn identity(spec: HeisenbergGroupSpec) -> Self {
        Self { linear_map: RMat::identity(spec.dim(), spec.dim()) }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.linear_map * x).iter().cloned().collect()
    }

    pub fn inverse(&self) -> Result<FrameMap> {
        self.linear_map
            .clone()
            .try_inverse()
            .map(|m| FrameMap { linear_map: m })
            .ok_or_else(|| Error::Singular("frame map".into()))
    }

    /// The map respects the grading when the central row and column are
    /// supported on the central entry only.
    pub fn respects_grading(&self, tol: f64) -> bool {
        let m = &self.linear_map;
        (1..m.nrows()).all(|i| m[(0, i)].abs() <= tol && m[(i, 0)].abs() <= tol)
    }

    pub fn compose(&self, other: &FrameMap) -> FrameMap {
        FrameMap { linear_map: &self.linear_map * &other.linear_map }
    }
}

/// Matrix of the dilation `δ_t`.
pub fn dilation_matrix(spec: HeisenbergGroupSpec, t: f64) -> RMat {
    let mut m = RMat::identity(spec.dim(), spec.dim());
    m[(0, 0)] = t * t;
    for i in 1..spec.dim() {
        m[(i, i)] = t;
    }
    m
}

/// A frame at a point, given in adapted coordinates of `T_aM` where
/// `H_a = {v_0 = 0}`: column 0 is `X_0(a)` and columns `1..=2n` are the
/// horizontal vectors.
#[derive(Clone, Debug)]
pub struct PointFrame {
    pub vectors: RMat,
    /// Almost complex structure on `H_a` (2n × 2n) used to enforce admissibility.
    pub j: Option<RMat>,
    /// Metric on `H_a` (2n × 2n); identity when absent.
    pub metric: Option<RMat>,
}

/// `φ_{X,a}`: sends `x_0 [X_0(a)] + Σ x_j X_j(a)` to `(x_0, …, x_{2n})`.
///
/// Only the class of `X_0(a)` modulo `H_a` enters. When a complex structure is
/// supplied and the frame is not admissible (`X_{n+j} ≠ J X_j`), the first `n`
/// horizontal vectors are orthonormalized for the Hermitian form
/// `g(X,Y) + i g(X,JY)` and completed by `X_{n+j} = J X_j`.
pub fn frame_map_from_frame(frame: &PointFrame) -> Result<FrameMap> {
    let dim = frame.vectors.nrows();
    if frame.vectors.ncols() != dim || dim % 2 == 0 {
        return Err(Error::DimensionMismatch("frame must be (2n+1) square".into()));
    }
    let n = (dim - 1) / 2;
    let x0 = frame.vectors[(0, 0)];
    if x0.abs() < 1e-12 {
        return Err(Error::InvalidArgument("X_0(a) lies in H_a".into()));
    }
    let mut h = frame.vectors.view((1, 1), (2 * n, 2 * n)).into_owned();
    if let Some(j) = &frame.j {
        let g = frame.metric.clone().unwrap_or_else(|| RMat::identity(2 * n, 2 * n));
        let admissible = (0..n).all(|k| {
            let jx = j * h.column(k);
            (jx - h.column(n + k)).amax() < 1e-12
        });
        if !admissible {
            h = admissible_completion(&h, j, &g)?;
        }
    }
    if h.determinant().abs() < 1e-12 {
        return Err(Error::InvalidArgument("degenerate horizontal frame".into()));
    }
    let mut f = RMat::zeros(dim, dim);
    f[(0, 0)] = x0;
    f.view_mut((1, 1), (2 * n, 2 * n)).copy_from(&h);
    let phi = f.try_inverse().ok_or_else(|| Error::Singular("frame".into()))?;
    Ok(FrameMap { linear_map: phi })
}

fn admissible_completion(h: &RMat, j: &RMat, g: &RMat) -> Result<RMat> {
    let n = h.ncols() / 2;
    let herm = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| -> Complex64 {
        let gxy = (x.transpose() * g * y)[(0, 0)];
        let gxjy = (x.transpose() * g * (j * y))[(0, 0)];
        Complex64::new(gxy, gxjy)
    };
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    for k in 0..n {
        let mut v = h.column(k).into_owned();
        for b in &basis {
            // Complex projection: v ← v − Re(h(b,v)) b − Im(h(b,v)) J b.
            let coef = herm(b, &v);
            v -= b * coef.re + (j * b) * coef.im;
        }
        let norm = herm(&v, &v).re;
        if norm <= 1e-24 {
            return Err(Error::InvalidArgument("frame vectors are complex-linearly dependent".into()));
        }
        basis.push(v / norm.sqrt());
    }
    let mut out = RMat::zeros(2 * n, 2 * n);
    for (k, b) in basis.iter().enumerate() {
        out.set_column(k, b);
        out.set_column(n + k, &(j * b));
    }
    Ok(out)
}

/// Standard symplectic matrix `Ω` with `dθ(X,Y) = Xᵀ Ω Y` on `H`, where
/// `dθ = Σ θ^j ∧ θ^{n+j}`.
pub fn standard_dtheta(n: usize) -> RMat {
    let mut m = RMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, n + j)] = 1.0;
        m[(n + j, j)] = -1.0;
    }
    m
}

/// Standard complex structure `J X_j = X_{n+j}`, `J X_{n+j} = −X_j`.
pub fn standard_j(n: usize) -> RMat {
    let mut m = RMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(n + j, j)] = 1.0;
        m[(j, n + j)] = -1.0;
    }
    m
}

/// Levi form of a calibrated complex structure `J` in the Hermitian frame
/// built from a `J`-complex basis of `H`: `L_{jk} = dθ(v_j, J v_k) + i dθ(v_j, v_k)`.
pub fn levi_form_of(j: &RMat, dtheta: &RMat) -> Result<LeviFormMatrix> {
    let n2 = j.nrows();
    let n = n2 / 2;
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut span = DMatrix::<f64>::zeros(n2, 0);
    for e in 0..n2 {
        if basis.len() == n {
            break;
        }
        let mut cand = nalgebra::DVector::<f64>::zeros(n2);
        cand[e] = 1.0;
        let mut trial = span.clone().insert_columns(span.ncols(), 2, 0.0);
        trial.set_column(span.ncols(), &cand);
        trial.set_column(span.ncols() + 1, &(j * &cand));
        let sv = trial.clone().svd(false, false).singular_values;
        if sv.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-8 {
            basis.push(cand);
            span = trial;
        }
    }
    if basis.len() != n {
        return Err(Error::InvalidArgument("no J-complex basis".into()));
    }
    let m = CMat::from_fn(n, n, |a, b| {
        let va = &basis[a];
        let vb = &basis[b];
        let re = (va.transpose() * dtheta * (j * vb))[(0, 0)];
        let im = (va.transpose() * dtheta * vb)[(0, 0)];
        Complex64::new(re, im)
    });
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    LeviFormMatrix::new(herm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> GroupPoint {
        GroupPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn group_law_hand_value() {
        let z = group_law(&pt(&[0.0, 1.0, 0.0]), &pt(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(z.coords, vec![-0.5, 1.0, 1.0]);
    }

    #[test]
    fn identity_and_inverse() {
        let x = pt(&[0.3, -1.2, 2.5]);
        let e = GroupPoint::identity(HeisenbergGroupSpec::new(1).unwrap());
        assert_eq!(group_law(&e, &x).unwrap(), x);
        let z = group_law(&x, &x.inverse()).unwrap();
        assert!(z.coords.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(group_law(&pt(&[0.0, 0.0, 0.0]), &pt(&[0.0; 5])).is_err());
        assert!(GroupPoint::new(vec![0.0; 4]).is_err());
    }

    #[test]
    fn dilation_values() {
        assert_eq!(dilate(2.0, &[1.0, 1.0, 1.0]).unwrap(), vec![4.0, 2.0, 2.0]);
        assert_eq!(dilate(1.0, &[0.3, 0.2, 0.1]).unwrap(), vec![0.3, 0.2, 0.1]);
        assert!(dilate(0.0, &[1.0, 0.0, 0.0]).is_err());
        assert!(dilate(-1.0, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn frame_coefficients_and_contact_form() {
        let spec = HeisenbergGroupSpec::new(1).unwrap();
        let frame = left_frame(spec);
        let coef = frame[1].coefficients(&[0.0, 0.0, 5.0]);
        assert_eq!(coef[0], 2.5);
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let spec2 = HeisenbergGroupSpec::new(2).unwrap();
        let frame2 = left_frame(spec2);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| next()).collect();
            let th = contact_form(&x);
            for f in frame2.iter().skip(1) {
                let v = f.coefficients(&x);
                let pairing: f64 = th.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(pairing.abs() < 1e-14);
            }
            assert_eq!(frame2[0].coefficients(&x), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn structure_constants_match_vector_field_brackets() {
        for n in 1..=3 {
            let spec = HeisenbergGroupSpec::new(n).unwrap();
            let frame = left_frame(spec);
            for i in 0..spec.dim() {
                for j in 0..spec.dim() {
                    let b = frame[i].bracket(&frame[j]);
                    let expect = bracket(i, j, spec).unwrap();
                    // Brackets of left-invariant fields are constant multiples of X_0 here.
                    assert!(b.linear.amax() < 1e-15);
                    for k in 0..spec.dim() {
                        assert!((b.constant[k] - expect[k]).abs() < 1e-15);
                    }
                }
            }
        }
        let spec = HeisenbergGroupSpec::new(1).unwrap();
        assert_eq!(bracket(1, 2, spec).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert!(bracket(0, 3, spec).is_err());
    }

    #[test]
    fn levi_signatures() {
        let id = LeviFormMatrix::from_real_diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(levi_signature(&id).unwrap(), (3, 0));
        let d = LeviFormMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert_eq!(levi_signature(&d).unwrap(), (1, 1));
        let degenerate = LeviFormMatrix::from_real_diagonal(&[1.0, 1e-12]);
        assert!(matches!(levi_signature(&degenerate), Err(Error::DegenerateLeviForm { .. })));
    }

    #[test]
    fn signature_constant_along_unitary_path() {
        let base = LeviFormMatrix::from_real_diagonal(&[2.0, -1.0]).matrix;
        for s in 0..50 {
            let t = s as f64 / 49.0 * std::f64::consts::PI;
            let (ct, st) = (t.cos(), t.sin());
            let phase = Complex64::from_polar(1.0, 0.7 * t);
            let r = CMat::from_row_slice(2, 2, &[c(ct), -phase.conj() * st, phase * st, c(ct)]);
            let a = r.adjoint() * &base * &r;
            let l = LeviFormMatrix::new((&a + a.adjoint()) * c(0.5)).unwrap();
            assert_eq!(levi_signature(&l).unwrap(), (1, 1));
        }
    }

    #[test]
    fn negative_projection_examples() {
        let l = LeviFormMatrix::from_real_diagonal(&[2.0, -1.0]);
        let p = negative_eigenprojection(&l, None).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        assert!(max_abs(&(p - expect)) < 1e-9);
        let pd = LeviFormMatrix::from_real_diagonal(&[2.0, 1.0]);
        assert!(max_abs(&negative_eigenprojection(&pd, None).unwrap()) < 1e-15);
    }

    #[test]
    fn negative_projection_matches_eigenvectors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let g = CMat::from_fn(4, 4, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let h = (&g + g.adjoint()) * c(0.5);
            let l = LeviFormMatrix::new(h.clone()).unwrap();
            let p = negative_eigenprojection(&l, None).unwrap();
            let (vals, vecs) = hermitian_eigen(&h);
            let mut oracle = CMat::zeros(4, 4);
            let mut kminus = 0;
            for (k, v) in vals.iter().enumerate() {
                if *v < 0.0 {
                    let col = vecs.column(k);
                    oracle += &col * col.adjoint();
                    kminus += 1;
                }
            }
            assert!(max_abs(&(&p - &oracle)) < 1e-9);
            assert!(max_abs(&(&p * &p - &p)) < 1e-9);
            assert!(crate::linalg::hermitian_defect(&p) < 1e-9);
            assert!((crate::linalg::trace(&p).re - kminus as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn y_condition_examples() {
        for n in 1..=6 {
            for q in 0..=n {
                assert_eq!(y_condition(q, n, 0, n), q != 0 && q != n);
            }
        }
        assert!(y_condition(1, 2, 0, 2));
        assert!(!y_condition(1, 3, 1, 4));
        assert!(y_condition(0, 3, 1, 4));
        assert!(y_condition(2, 3, 1, 4));
    }

    #[test]
    fn szego_gate_needs_both_neighbours() {
        assert!(szego_projection_gate(1, 3, 1, 4));
        assert!(!szego_projection_gate(0, 1, 0, 1));
        assert!(!szego_projection_gate(1, 1, 0, 1));
        // Strictly pseudoconvex n = 3: Y(q) holds for q = 1, 2, so the gate passes at q = 0 and q = 3 only.
        let gates: Vec<bool> = (0..=3).map(|q| szego_projection_gate(q, 3, 0, 3)).collect();
        assert_eq!(gates, vec![true, false, false, true]);
    }

    #[test]
    fn y_condition_swap_symmetry() {
        for n in 1..=6 {
            for kp in 0..=n {
                for km in 0..=(n - kp) {
                    for q in 0..=n {
                        assert_eq!(y_condition(q, kp, km, n), y_condition(q, km, kp, n));
                    }
                }
            }
        }
    }

    #[test]
    fn frame_maps() {
        let spec = HeisenbergGroupSpec::new(1).unwrap();
        let std = PointFrame { vectors: RMat::identity(3, 3), j: None, metric: None };
        let phi = frame_map_from_frame(&std).unwrap();
        assert!((phi.linear_map.clone() - RMat::identity(3, 3)).amax() < 1e-15);

        // X'_j = e^f X_j, X'_0 = e^{2f} X_0 with e^f = 2: φ'^{-1} = φ^{-1} ∘ δ_2.
        let lam = 2.0;
        let mut v = RMat::identity(3, 3);
        v[(0, 0)] = lam * lam;
        v[(1, 1)] = lam;
        v[(2, 2)] = lam;
        let phi_s = frame_map_from_frame(&PointFrame { vectors: v, j: None, metric: None }).unwrap();
        let lhs = phi_s.inverse().unwrap().linear_map;
        let rhs = phi.inverse().unwrap().linear_map * dilation_matrix(spec, lam);
        assert!((lhs - rhs).amax() < 1e-14);
        assert!(phi_s.respects_grading(0.0));

        // Horizontal rotation leaves the central row unchanged.
        let th: f64 = 0.4;
        let mut rot = RMat::identity(3, 3);
        rot[(1, 1)] = th.cos();
        rot[(1, 2)] = -th.sin();
        rot[(2, 1)] = th.sin();
        rot[(2, 2)] = th.cos();
        let phi_r = frame_map_from_frame(&PointFrame { vectors: rot, j: None, metric: None }).unwrap();
        for k in 0..3 {
            assert_eq!(phi_r.linear_map[(0, k)], phi.linear_map[(0, k)]);
        }
    }

    #[test]
    fn non_admissible_frame_is_completed() {
        let mut v = RMat::identity(3, 3);
        v[(1, 1)] = 2.0;
        v[(2, 2)] = 5.0;
        let frame = PointFrame { vectors: v, j: Some(standard_j(1)), metric: None };
        let phi = frame_map_from_frame(&frame).unwrap();
        let inv = phi.inverse().unwrap().linear_map;
        assert!((inv[(1, 1)] - 1.0).abs() < 1e-14 && (inv[(2, 2)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn levi_form_of_standard_structure_is_positive() {
        for n in 1..=3 {
            let l = levi_form_of(&standard_j(n), &standard_dtheta(n)).unwrap();
            assert_eq!(levi_signature(&l).unwrap(), (n, 0));
        }
    }

    #[test]
    fn levi_json_round_trip() {
        let l = LeviFormMatrix::from_real_diagonal(&[1.0, -2.0]);
        let back = LeviFormMatrix::from_json(&l.to_json().unwrap()).unwrap();
        assert_eq!(back, l);
    }

    fn arb_point(n: usize) -> impl Strategy<Value = GroupPoint> {
        proptest::collection::vec(-10.0f64..10.0, 2 * n + 1).prop_map(|c| GroupPoint { coords: c })
    }

    proptest! {
        #[test]
        fn associativity(x in arb_point(2), y in arb_point(2), z in arb_point(2)) {
            let a = group_law(&group_law(&x, &y).unwrap(), &z).unwrap();
            let b = group_law(&x, &group_law(&y, &z).unwrap()).unwrap();
            for (u, v) in a.coords.iter().zip(&b.coords) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn dilations_are_automorphisms(x in arb_point(1), y in arb_point(1), t in 0.1f64..5.0) {
            let lhs = dilate_point(t, &group_law(&x, &y).unwrap()).unwrap();
            let rhs = group_law(&dilate_point(t, &x).unwrap(), &dilate_point(t, &y).unwrap()).unwrap();
            for (u, v) in lhs.coords.iter().zip(&rhs.coords) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn dilation_semigroup(s in 0.1f64..4.0, t in 0.1f64..4.0, xi in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let a = dilate(t, &dilate(s, &xi).unwrap()).unwrap();
            let b = dilate(t * s, &xi).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn inverse_law(x in arb_point(3)) {
            let z = group_law(&x.inverse(), &x).unwrap();
            prop_assert!(z.coords.iter().all(|v| v.abs() < 1e-12));
        }
    }
}
