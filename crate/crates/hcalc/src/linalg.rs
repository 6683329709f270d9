//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operator 2-norm via the largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().cloned().collect()
}

pub fn min_singular_value(m: &CMat) -> f64 {
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `‖A − Aᴴ‖_max`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn is_square(m: &CMat) -> bool {
    m.nrows() == m.ncols()
}

/// Inverse through LU; fails on exactly singular input.
pub fn inverse(m: &CMat) -> Result<CMat> {
    if !is_square(m) {
        return Err(Error::DimensionMismatch(format!("inverse of {}x{}", m.nrows(), m.ncols())));
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU inverse".into()))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and unitary eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * c(0.5);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(m.nrows(), m.ncols());
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Iterations allowed per row before the Schur iteration is abandoned.
const SCHUR_ITERATIONS_PER_ROW: usize = 200;
/// Deflation tolerances tried in turn, in units of machine epsilon.
const SCHUR_TOLERANCES: [f64; 3] = [1.0, 8.0, 64.0];
/// Restarts from a shifted unitary conjugate before giving up.
const SCHUR_RESTARTS: u64 = 4;

/// Eigenvalues of a general complex square matrix via the Schur form.
///
/// On a cluster of equal eigenvalues the rounding noise left on the
/// subdiagonal can sit just above a deflation threshold of one ulp, and the
/// iteration never ends. The threshold is relaxed up to `64 ε`, and as a last
/// resort the iteration is restarted on `Q* (m + σ) Q` for a seeded unitary `Q`
/// and a complex shift `σ`, which is removed from the result.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_iter = SCHUR_ITERATIONS_PER_ROW * n;
    for k in SCHUR_TOLERANCES {
        if let Some(s) = m.clone().try_schur(k * f64::EPSILON, max_iter) {
            return Ok(s.unpack().1.diagonal().iter().cloned().collect());
        }
    }
    let eps = SCHUR_TOLERANCES[SCHUR_TOLERANCES.len() - 1] * f64::EPSILON;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    for seed in 0..SCHUR_RESTARTS {
        let sigma = Complex64::new(0.318 + 0.1 * seed as f64, 0.127) * scale;
        let q = seeded_unitary(n, seed);
        let conj = q.adjoint() * (m + CMat::identity(n, n) * sigma) * &q;
        if let Some(s) = conj.try_schur(eps, max_iter) {
            return Ok(s.unpack().1.diagonal().iter().map(|&e| e - sigma).collect());
        }
    }
    Err(Error::Singular(format!("Schur iteration did not converge on a {n}x{n} matrix")))
}

/// Unitary factor of the QR decomposition of a seeded random matrix.
fn seeded_unitary(n: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c40_0000 + seed);
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a.qr().q()
}

/// Moore–Penrose pseudo-inverse with singular values below `rel_cutoff · σ_max` treated as zero.
pub fn pinv(m: &CMat, rel_cutoff: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMat::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * smax && s > 0.0 {
            let col = vt.row(k).adjoint();
            let row = u.column(k).adjoint();
            out += (col * row) * c(1.0 / s);
        }
    }
    out
}

/// Orthonormal basis of the column space (rank decided at `rel_tol · σ_max`).
pub fn range_basis(m: &CMat, rel_tol: f64) -> CMat {
    if m.ncols() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > rel_tol * smax && smax > 0.0)
        .collect();
    let mut out = CMat::zeros(m.nrows(), keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Largest principal angle between the column spaces of two orthonormal bases.
/// Returns `π/2` when the dimensions differ.
pub fn max_principal_angle(qa: &CMat, qb: &CMat) -> f64 {
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let s = singular_values(&(qa.adjoint() * qb));
    let smin = s.into_iter().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    smin.acos()
}

/// Principal-submatrix extraction by index list.
pub fn select(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Block-diagonal direct sum.
pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Real symmetric eigenvalues, ascending.
pub fn real_symmetric_eigenvalues(m: &RMat) -> Vec<f64> {
    let s = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = s.symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Least squares `argmin ‖A x − b‖` via SVD; returns `None` when `A` is rank deficient.
pub fn least_squares(a: &RMat, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return None;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin <= 1e-13 * smax {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_clustered_involutions() {
        for (n, plus) in [(24, 1), (24, 12), (33, 32)] {
            for seed in 0..4 {
                let q = seeded_unitary(n, 100 + seed);
                let d = CMat::from_diagonal(&CVec::from_fn(n, |i, _| c(if i < plus { 1.0 } else { -1.0 })));
                let f = &q * d * q.adjoint();
                let mut e = eigenvalues(&f).unwrap();
                e.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
                for (i, z) in e.iter().enumerate() {
                    let want = if i < plus { 1.0 } else { -1.0 };
                    assert!((z - c(want)).norm() < 1e-10, "{n} {plus} {seed}: {z}");
                }
            }
        }
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        let p = pinv(&m, 1e-10);
        let back = &m * &p * &m;
        assert!(max_abs(&(back - &m)) < 1e-12);
        assert!(max_abs(&(&p - p.adjoint())) < 1e-12);
    }

    #[test]
    fn principal_angle_detects_equal_and_orthogonal_ranges() {
        let a = CMat::from_row_slice(3, 1, &[c(1.0), c(0.0), c(0.0)]);
        let b = CMat::from_row_slice(3, 1, &[c(0.0), c(1.0), c(0.0)]);
        assert!(max_principal_angle(&a, &a) < 1e-7);
        assert!((max_principal_angle(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_is_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0), I, -I, c(-1.0)]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals[0] < vals[1]);
        let d = CMat::from_diagonal(&CVec::from_iterator(2, vals.iter().map(|&x| c(x))));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &m)) < 1e-12);
    }
}
