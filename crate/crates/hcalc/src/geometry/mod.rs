//! Geometric operator families on the model group: Folland–Stein operators,
//! `∂̄_b` and the Kohn Laplacians on `(0,q)`-fibers, Szegő symbols at level
//! `k`, their covariance under conformal and orientation changes, and the
//! interpolation of calibrated complex structures.
//!
//! `(0,q)`-fibers are realized on the full exterior algebra `Λ^{0,•}` of an
//! `n`-dimensional antiholomorphic frame, tensored with the Hermite basis.
//! Exterior index `I ⊆ {0..n−1}` is a bitmask and is the outer (rank) index.

pub mod rumin;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::group::{levi_form_of, levi_signature, standard_dtheta, standard_j, y_condition};
use crate::hermite::{frame_fiber, HermiteSpace, Padded};
use crate::linalg::{self, c, kron, CMat, RMat, I};
use crate::projection::{riesz_projection, symbol_idempotency_defect, ProjectionOperator};
use crate::symbol::{
    invert_homogeneous, star, transpose_symbol, AbelianTrace, HomogeneousSymbol, SymbolExpansion, SymbolShape,
};
use crate::{Error, Result};

/// Padding used when ladder polynomials are assembled before compression.
const LADDER_PAD: usize = 4;

/// Radius of the contour isolating the kernel of the integer-spectrum fibers.
const KERNEL_RADIUS: f64 = 0.5;

fn fiber_space(n: usize, cutoff: usize) -> Result<HermiteSpace> {
    if n == 0 || cutoff < 2 {
        return Err(Error::InvalidArgument(format!("n = {n}, cutoff = {cutoff}")));
    }
    Ok(HermiteSpace::new(n, cutoff))
}

/// Fiber of `−½Σ(X_j)² + iλX_0` at `sign` on `space`, assembled from
/// the frame fibers.
fn folland_stein_fiber(space: &HermiteSpace, lambda: f64, sign: i8) -> CMat {
    let mut out = frame_fiber(space, 0, sign) * (I * lambda);
    for j in 1..=2 * space.n {
        let x = frame_fiber(space, j, sign);
        out -= &x * &x * c(0.5);
    }
    out
}

/// Symbol of the Folland–Stein operator `−½Σ_j (X_j)² + iλX_0` (degree 2).
pub fn folland_stein(lambda: f64, n: usize, cutoff: usize) -> Result<HomogeneousSymbol> {
    let small = fiber_space(n, cutoff)?;
    let pad = Padded::new(small, LADDER_PAD);
    let f = |sign: i8| pad.compress(&folland_stein_fiber(&pad.big, lambda, sign));
    let mut s = HomogeneousSymbol::new(2, SymbolShape::new(n, 1, cutoff), f(1), f(-1))?;
    if n == 1 {
        s = s.with_abelian(AbelianTrace::from_fn(|w| CMat::from_element(1, 1, c(0.5 * (w[0] * w[0] + w[1] * w[1])))));
    }
    Ok(s)
}

/// One-dimensional block `½(Q² + P²)` and the shifts `∓λ` give the fiber as a
/// Kronecker sum; its singular values are the moduli of the sums of the
/// one-dimensional eigenvalues. Used for large `n·N` where the dense fiber
/// is impractical.
pub fn folland_stein_min_singular_value(lambda: f64, n: usize, cutoff: usize) -> Result<f64> {
    let one = folland_stein(0.0, 1, cutoff)?;
    let mut best = f64::INFINITY;
    for sign in [1i8, -1] {
        let block = one.fiber(sign);
        let (vals, _) = linalg::hermitian_eigen(block);
        // fiber(λ=0) at n=1 is N̂ + ½; strip the ½ so that sums add levels only.
        let levels: Vec<f64> = vals.iter().map(|v| v - 0.5).collect();
        let target = if sign > 0 { lambda - n as f64 / 2.0 } else { -lambda - n as f64 / 2.0 };
        let mut sums = vec![0.0];
        for _ in 0..n {
            let mut next = Vec::with_capacity(sums.len() * levels.len());
            for s in &sums {
                for l in &levels {
                    next.push(s + l);
                }
            }
            sums = next;
        }
        for s in sums {
            best = best.min((s - target).abs());
        }
    }
    Ok(best)
}

/// Minimal fiber singular value of a symbol over both signs.
pub fn min_fiber_singular_value(p: &HomogeneousSymbol) -> f64 {
    linalg::min_singular_value(&p.fiber_plus).min(linalg::min_singular_value(&p.fiber_minus))
}

/// `ω̄_j ∧ ·` on the exterior algebra of dimension `2^n`.
pub fn wedge(n: usize, j: usize) -> CMat {
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for mask in 0..dim {
        if mask & (1 << j) != 0 {
            continue;
        }
        let below = (mask & ((1 << j) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
        m[(mask | (1 << j), mask)] = c(sign);
    }
    m
}

/// Exterior indices of form degree `q`, in increasing bitmask order.
pub fn degree_indices(n: usize, q: usize) -> Vec<usize> {
    (0..1usize << n).filter(|m| m.count_ones() as usize == q).collect()
}

/// Rank-major indices of the Hermite blocks belonging to form degree `q`.
fn block_indices(n: usize, q: usize, block: usize) -> Vec<usize> {
    degree_indices(n, q).into_iter().flat_map(|a| (0..block).map(move |k| a * block + k)).collect()
}

/// Diagonal projection onto form degree `q`, tensored with the Hermite identity.
fn degree_projector(n: usize, q: usize, block: usize) -> CMat {
    let dim = (1 << n) * block;
    let mut m = CMat::zeros(dim, dim);
    for i in block_indices(n, q, block) {
        m[(i, i)] = c(1.0);
    }
    m
}

/// Fiber of `Z̄_j = (X_j + iX_{n+j})/√2`: `i a_j` on the positive side, `−i a_j†` on the negative side.
pub fn zbar_fiber(space: &HermiteSpace, j: usize, sign: i8) -> CMat {
    let x = frame_fiber(space, j + 1, sign);
    let y = frame_fiber(space, space.n + j + 1, sign);
    (x + y * I) * c(std::f64::consts::FRAC_1_SQRT_2)
}

/// `∂̄_b = Σ_j ω̄_j ∧ Z̄_j` on the full exterior algebra at `sign`.
fn dbar_full_fiber(space: &HermiteSpace, sign: i8) -> CMat {
    let n = space.n;
    let mut out = CMat::zeros((1 << n) * space.dim(), (1 << n) * space.dim());
    for j in 0..n {
        out += kron(&wedge(n, j), &zbar_fiber(space, j, sign));
    }
    out
}

fn dbar_abelian(n: usize, q: usize) -> Option<AbelianTrace> {
    if n != 1 {
        return None;
    }
    let e = if q == 0 { wedge(1, 0) } else { CMat::zeros(2, 2) };
    Some(AbelianTrace::from_fn(|w| &e * (I * Complex64::new(w[0], w[1]) * std::f64::consts::FRAC_1_SQRT_2)))
}

/// `∂̄_{b;q}`: the component of `∂̄_b` mapping `(0,q)` into `(0,q+1)` fibers,
/// as a degree-1 symbol on the full exterior algebra (rank `2^n`).
pub fn dbar_b(n: usize, q: usize, cutoff: usize) -> Result<HomogeneousSymbol> {
    if q > n {
        return Err(Error::InvalidArgument(format!("form degree {q} exceeds n = {n}")));
    }
    let space = fiber_space(n, cutoff)?;
    let b = space.dim();
    let pin = degree_projector(n, q, b);
    let f = |sign: i8| &dbar_full_fiber(&space, sign) * &pin;
    let mut s = HomogeneousSymbol::new(1, SymbolShape::new(n, 1 << n, cutoff), f(1), f(-1))?;
    if let Some(a) = dbar_abelian(n, q) {
        s = s.with_abelian(a);
    }
    Ok(s)
}

/// `∂̄_b` and the Kohn Laplacian `∂̄*∂̄ + ∂̄∂̄*` on the full exterior algebra,
/// assembled on a padded Hermite space and returned uncompressed.
struct PaddedComplex {
    pad: Padded,
    dbar: [CMat; 2],
    lap: [CMat; 2],
}

impl PaddedComplex {
    fn new(n: usize, cutoff: usize) -> Result<Self> {
        let pad = Padded::new(fiber_space(n, cutoff)?, LADDER_PAD);
        let d = |sign: i8| dbar_full_fiber(&pad.big, sign);
        let dbar = [d(1), d(-1)];
        let lap = [lap_of(&dbar[0]), lap_of(&dbar[1])];
        Ok(Self { pad, dbar, lap })
    }

    fn rank(&self) -> usize {
        1 << self.pad.small.n
    }

    fn compress_degree(&self, m: &CMat, q: usize) -> CMat {
        let full = self.pad.compress_ranked(m, self.rank());
        let idx = block_indices(self.pad.small.n, q, self.pad.small.dim());
        linalg::select(&full, &idx, &idx)
    }
}

fn lap_of(d: &CMat) -> CMat {
    d.adjoint() * d + d * d.adjoint()
}

fn sign_index(sign: i8) -> usize {
    if sign > 0 {
        0
    } else {
        1
    }
}

/// `□_{b;q}` on `Λ^{0,q}` fibers (rank `C(n,q)`, degree 2).
pub fn kohn_laplacian(n: usize, q: usize, cutoff: usize) -> Result<HomogeneousSymbol> {
    if q > n {
        return Err(Error::InvalidArgument(format!("form degree {q} exceeds n = {n}")));
    }
    let cx = PaddedComplex::new(n, cutoff)?;
    let f = |sign: i8| cx.compress_degree(&cx.lap[sign_index(sign)], q);
    let rank = degree_indices(n, q).len();
    let mut s = HomogeneousSymbol::new(2, SymbolShape::new(n, rank, cutoff), f(1), f(-1))?;
    if n == 1 {
        s = s.with_abelian(AbelianTrace::from_fn(|w| CMat::from_element(1, 1, c(0.5 * (w[0] * w[0] + w[1] * w[1])))));
    }
    s.flag_self_adjoint()
}

/// Kernel projections of `∂̄_{b;q}` and `∂̄*_{b;q}` on `Λ^{0,q}` and the
/// Szegő projection `S_{b;q} = Π₀(∂̄_{b;q}) + Π₀(∂̄*_{b;q}) − 1`.
#[derive(Clone, Debug)]
pub struct DbarProjections {
    pub n: usize,
    pub q: usize,
    pub dbar_kernel: ProjectionOperator,
    /// `Π₀(∂̄*_{b;q})`, present when `Y(q−1)` holds or `q = 0`.
    pub dbar_star_kernel: Option<ProjectionOperator>,
    /// Present when both kernel projections exist.
    pub szego: Option<ProjectionOperator>,
    /// `max ‖S_{b;q} − Riesz kernel projection of □_{b;q}‖` over both fibers.
    pub szego_relation_defect: Option<f64>,
}

/// Model signature: strictly pseudoconvex, `κ₊ = n`, `κ₋ = 0`.
fn y_model(q: usize, n: usize) -> bool {
    y_condition(q, n, 0, n)
}

/// `Π₀(∂̄_{b;q}) = 1 − ∂̄* N_{b;q+1} ∂̄` on `Λ^{0,q}` with `N_{b;q+1}` the
/// inverse of `□_{b;q+1}`; gated by `Y(q+1)`. The companion `Π₀(∂̄*_{b;q})`
/// uses `N_{b;q−1}` under `Y(q−1)`. `depth` sets the truncation degree of the
/// (exactly homogeneous) expansions.
pub fn dbar_kernel_projection(n: usize, q: usize, cutoff: usize, depth: usize) -> Result<DbarProjections> {
    if q > n {
        return Err(Error::InvalidArgument(format!("form degree {q} exceeds n = {n}")));
    }
    if q < n && !y_model(q + 1, n) {
        return Err(Error::YConditionFails { q: q + 1 });
    }
    let cx = PaddedComplex::new(n, cutoff)?;
    let rank = degree_indices(n, q).len();
    let shape = SymbolShape::new(n, rank, cutoff);
    let big_block = cx.pad.big.dim();
    let trunc = -(depth as i32);

    // Π₀(∂̄_q): ∂̄ from degree q, inverse Laplacian on degree q+1.
    let kernel_of = |from: usize, via: Option<usize>, adjoint: bool| -> Result<[CMat; 2]> {
        let mut out = [CMat::zeros(0, 0), CMat::zeros(0, 0)];
        for sign in [1i8, -1] {
            let s = sign_index(sign);
            let id = CMat::identity(rank * cx.pad.small.dim(), rank * cx.pad.small.dim());
            let Some(mid) = via else {
                out[s] = id;
                continue;
            };
            // Levels at the top of the padded space see truncated ladders; the
            // Laplacian is inverted on the interior, which contains the image
            // of the kept block.
            let top = cx.pad.big.cutoff - 1;
            let idx_mid: Vec<usize> = block_indices(n, mid, big_block)
                .into_iter()
                .filter(|&i| cx.pad.big.multi_index(i % big_block).iter().all(|&k| k < top))
                .collect();
            let idx_from = block_indices(n, from, big_block);
            let lap_mid = linalg::select(&cx.lap[s], &idx_mid, &idx_mid);
            let nmid = linalg::inverse(&lap_mid).map_err(|_| Error::NotInvertible {
                sign,
                min_singular_value: linalg::min_singular_value(&lap_mid),
            })?;
            let d = if adjoint {
                linalg::select(&cx.dbar[s].adjoint(), &idx_mid, &idx_from)
            } else {
                linalg::select(&cx.dbar[s], &idx_mid, &idx_from)
            };
            let corr = d.adjoint() * nmid * &d;
            let big_id = CMat::identity(corr.nrows(), corr.ncols());
            let pi_big = big_id - corr;
            out[s] = compress_blocks(&pi_big, &cx.pad, rank);
        }
        Ok(out)
    };
    let as_projection = |f: [CMat; 2], trivial: bool| -> Result<ProjectionOperator> {
        let [p, m] = f;
        let mut sym = HomogeneousSymbol::new(0, shape, p, m)?;
        if n == 1 {
            // A nontrivial kernel projection of ∂̄ or ∂̄* has a decaying Weyl
            // symbol and vanishes on the equator.
            let v = if trivial { 1.0 } else { 0.0 };
            sym = sym.with_abelian(AbelianTrace::from_fn(|_| CMat::identity(rank, rank) * c(v)));
        }
        ProjectionOperator::from_expansion(SymbolExpansion::new(vec![sym], trunc)?)
    };
    let dbar_kernel = as_projection(kernel_of(q, if q < n { Some(q + 1) } else { None }, false)?, q == n)?;
    let star_gate = q == 0 || y_model(q - 1, n);
    let dbar_star_kernel = if star_gate {
        Some(as_projection(kernel_of(q, if q > 0 { Some(q - 1) } else { None }, true)?, q == 0)?)
    } else {
        None
    };
    let (szego, szego_relation_defect) = match &dbar_star_kernel {
        Some(ps) => {
            let one = SymbolExpansion::unit(shape).with_truncation(trunc);
            let e = dbar_kernel.expansion.add(&ps.expansion)?.sub(&one)?;
            let s = ProjectionOperator::from_expansion(e)?;
            let lap = kohn_laplacian(n, q, cutoff)?;
            let lead = s.expansion.principal().expect("nonempty");
            let mut defect: f64 = 0.0;
            for sign in [1i8, -1] {
                let r = riesz_projection(lap.fiber(sign), c(0.0), KERNEL_RADIUS)?;
                let idx = lap.shape.resolved_indices();
                defect = defect.max(linalg::max_abs(&linalg::select(&(lead.fiber(sign) - r), &idx, &idx)));
            }
            (Some(s), Some(defect))
        }
        None => (None, None),
    };
    Ok(DbarProjections { n, q, dbar_kernel, dbar_star_kernel, szego, szego_relation_defect })
}

/// Compresses a matrix on `rank` padded Hermite blocks back to the small space.
fn compress_blocks(m: &CMat, pad: &Padded, rank: usize) -> CMat {
    pad.compress_ranked(m, rank)
}

/// Fiber of `□_b + ikX_0` on functions: `N̂ − k` on the positive side and
/// `N̂ + n + k` on the negative side.
fn szego_operator_fiber(space: &HermiteSpace, k: usize, sign: i8) -> CMat {
    let n = space.n;
    folland_stein_fiber(space, n as f64 / 2.0, sign) + frame_fiber(space, 0, sign) * (I * k as f64)
}

/// Symbol `s_k` of the level-`k` Szegő projection: the Riesz projection onto
/// the kernel of the fiber of `□_b + ikX_0`.
pub fn szego_symbol(k: usize, n: usize, cutoff: usize) -> Result<HomogeneousSymbol> {
    let small = fiber_space(n, cutoff)?;
    if k + 1 >= cutoff {
        return Err(Error::InvalidArgument(format!("level {k} not resolved at cutoff {cutoff}")));
    }
    let pad = Padded::new(small, LADDER_PAD);
    let f = |sign: i8| -> Result<CMat> {
        let op = pad.compress(&szego_operator_fiber(&pad.big, k, sign));
        riesz_projection(&op, c(0.0), KERNEL_RADIUS)
    };
    let mut s = HomogeneousSymbol::new(0, SymbolShape::new(n, 1, cutoff), f(1)?, f(-1)?)?;
    if n == 1 {
        s = s.with_abelian(AbelianTrace::from_fn(|_| CMat::zeros(1, 1)));
    }
    s.flag_self_adjoint()
}

/// `s_k` built from the frame `X'_j = Σ_i frame[(i, j)] X_i` of `H` and the
/// central field `X'_0 = x0_scale · X_0`. With `orientation = −1` the contact
/// form and the complex structure are both reversed: `X'_0 ↦ −X'_0` and
/// `Z̄'_j = (X'_j − iX'_{n+j})/√2`.
pub fn szego_symbol_in_frame(k: usize, n: usize, cutoff: usize, frame: &RMat, x0_scale: f64, orientation: i8) -> Result<HomogeneousSymbol> {
    if frame.nrows() != 2 * n || frame.ncols() != 2 * n {
        return Err(Error::DimensionMismatch(format!("frame is {:?}, expected {}×{}", frame.shape(), 2 * n, 2 * n)));
    }
    let small = fiber_space(n, cutoff)?;
    let pad = Padded::new(small, 2 * LADDER_PAD + cutoff / 2);
    let space = &pad.big;
    let f = |sign: i8| -> Result<CMat> {
        let base: Vec<CMat> = (1..=2 * n).map(|j| frame_fiber(space, j, sign)).collect();
        let field = |j: usize| -> CMat {
            let mut out = CMat::zeros(space.dim(), space.dim());
            for (i, b) in base.iter().enumerate() {
                out += b * c(frame[(i, j)]);
            }
            out
        };
        let x0 = frame_fiber(space, 0, sign) * c(x0_scale * orientation as f64);
        let cj = if orientation > 0 { I } else { -I };
        let mut lap = CMat::zeros(space.dim(), space.dim());
        for j in 0..n {
            let zb = (field(j) + field(n + j) * cj) * c(std::f64::consts::FRAC_1_SQRT_2);
            // −Z_j Z̄_j with Z_j the formal adjoint of −Z̄_j.
            lap += zb.adjoint() * &zb;
        }
        let op = pad.compress(&(lap + x0 * (I * k as f64)));
        riesz_projection(&op, c(0.0), KERNEL_RADIUS * x0_scale.min(1.0))
    };
    let mut s = HomogeneousSymbol::new(0, SymbolShape::new(n, 1, cutoff), f(1)?, f(-1)?)?;
    if n == 1 {
        s = s.with_abelian(AbelianTrace::from_fn(|_| CMat::zeros(1, 1)));
    }
    Ok(s)
}

/// Outcome of [`conformal_covariance_check`].
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub k: usize,
    pub n: usize,
    pub f_value: f64,
    /// `max ‖s_k − s_k^{(e^{2f}θ)}‖` over both fibers.
    pub conformal_defect: f64,
    /// `max ‖s_k^{(−θ,−J)} − s_k(·, −ξ)‖`, the latter from the transpose.
    pub flip_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Recomputes `s_k` for `e^{2f}θ` (frame `e^f X_j`, `e^{2f} X_0`) and for
/// `(−θ, −J)`, and compares with `s_k` and with `s_k(x, −ξ)`.
pub fn conformal_covariance_check(k: usize, n: usize, f_value: f64, cutoff: usize) -> Result<CovarianceReport> {
    let base = szego_symbol(k, n, cutoff)?;
    let lam = f_value.exp();
    let frame = RMat::identity(2 * n, 2 * n) * lam;
    let scaled = szego_symbol_in_frame(k, n, cutoff, &frame, lam * lam, 1)?;
    let flipped = szego_symbol_in_frame(k, n, cutoff, &RMat::identity(2 * n, 2 * n), 1.0, -1)?;
    let reflected = transpose_symbol(&base);
    let conformal_defect = base.distance(&scaled);
    let flip_defect = flipped.distance(&reflected);
    let tolerance = 1e-10;
    Ok(CovarianceReport {
        k,
        n,
        f_value,
        conformal_defect,
        flip_defect,
        tolerance,
        passed: conformal_defect <= tolerance && flip_defect <= tolerance,
    })
}

/// Contact data at a base point: `θ` scaled by `theta_scale`, with a
/// calibrated complex structure `J` on `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactData {
    pub n: usize,
    pub theta_scale: f64,
    pub j: RMat,
    pub dtheta: RMat,
}

/// Tolerance of the structural identities of [`ContactData`].
pub const CONTACT_TOL: f64 = 1e-12;

impl ContactData {
    pub fn standard(n: usize) -> Self {
        Self { n, theta_scale: 1.0, j: standard_j(n), dtheta: standard_dtheta(n) }
    }

    /// Validates `J² = −1`, `dθ(JX, JY) = dθ(X, Y)` and `dθ(X, JX) > 0` on
    /// random vectors drawn from `rng`.
    pub fn new<R: Rng>(n: usize, theta_scale: f64, j: RMat, dtheta: RMat, rng: &mut R, tol: f64) -> Result<Self> {
        let data = Self { n, theta_scale, j, dtheta };
        data.validate(rng, tol)?;
        Ok(data)
    }

    pub fn validate<R: Rng>(&self, rng: &mut R, tol: f64) -> Result<()> {
        let d = 2 * self.n;
        if self.j.shape() != (d, d) || self.dtheta.shape() != (d, d) || !(self.theta_scale > 0.0) {
            return Err(Error::DimensionMismatch("contact data of inconsistent size".into()));
        }
        let sq = &self.j * &self.j + RMat::identity(d, d);
        if sq.amax() > tol {
            return Err(Error::InvalidArgument(format!("J² + 1 = {:.3e}", sq.amax())));
        }
        let inv = self.j.transpose() * &self.dtheta * &self.j - &self.dtheta;
        if inv.amax() > tol {
            return Err(Error::InvalidArgument(format!("J does not preserve dθ: {:.3e}", inv.amax())));
        }
        for _ in 0..20 {
            let x = nalgebra::DVector::<f64>::from_fn(d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            if x.norm() == 0.0 {
                continue;
            }
            let v = x.dot(&(&self.dtheta * (&self.j * &x)));
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("dθ(X, JX) = {v} is not positive")));
            }
        }
        Ok(())
    }
}

/// Square root of a real matrix with spectrum off the closed negative axis
/// by the Denman–Beavers iteration.
pub fn matrix_sqrt(m: &RMat) -> Result<RMat> {
    let d = m.nrows();
    let mut y = m.clone();
    let mut z = RMat::identity(d, d);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or_else(|| Error::Singular("Denman–Beavers iterate".into()))?;
        let zi = z.clone().try_inverse().ok_or_else(|| Error::Singular("Denman–Beavers iterate".into()))?;
        let yn = (&y + zi) * 0.5;
        let zn = (&z + yi) * 0.5;
        let step = (&yn - &y).amax();
        y = yn;
        z = zn;
        if step < 1e-15 * (1.0 + y.amax()) {
            return Ok(y);
        }
    }
    Err(Error::Singular("Denman–Beavers iteration did not converge".into()))
}

/// `J_t` of the interpolation between calibrated `J` and `J′`:
/// `A_t = (1−t) + t J′ᵗJ` with `J′ᵗ = J J′ J` the `g_J`-transpose,
/// `B_t = A_t⁻¹ J` and `J_t = B_t (√(−B_t²))⁻¹`.
pub fn j_at(j: &RMat, jp: &RMat, t: f64) -> Result<RMat> {
    if t == 0.0 {
        return Ok(j.clone());
    }
    if t == 1.0 {
        return Ok(jp.clone());
    }
    let d = j.nrows();
    let jpt = j * jp * j;
    let a = RMat::identity(d, d) * (1.0 - t) + (jpt * j) * t;
    let ainv = a.try_inverse().ok_or_else(|| Error::Singular(format!("A_t at t = {t}")))?;
    let b = ainv * j;
    let root = matrix_sqrt(&(-(&b * &b)))?;
    let rinv = root.try_inverse().ok_or_else(|| Error::Singular(format!("modulus at t = {t}")))?;
    Ok(b * rinv)
}

/// Sampled path `J_t`.
#[derive(Clone, Debug)]
pub struct JPath {
    pub parameters: Vec<f64>,
    pub samples: Vec<RMat>,
    /// `max ‖J_{t_{i+1}} − J_{t_i}‖_max`.
    pub continuity_modulus: f64,
    /// Levi signature `(κ₊, κ₋)` of every sample.
    pub signatures: Vec<(usize, usize)>,
}

/// Samples the interpolation at `samples` points (33 by default), doubling
/// until the continuity modulus falls below `0.05`; each sample is checked to
/// be calibrated.
pub fn interpolate_j<R: Rng>(j: &RMat, jp: &RMat, dtheta: &RMat, samples: usize, rng: &mut R) -> Result<JPath> {
    let n = j.nrows() / 2;
    ContactData { n, theta_scale: 1.0, j: j.clone(), dtheta: dtheta.clone() }.validate(rng, 1e-10)?;
    ContactData { n, theta_scale: 1.0, j: jp.clone(), dtheta: dtheta.clone() }.validate(rng, 1e-10)?;
    let mut count = samples.max(2);
    loop {
        let parameters: Vec<f64> =
            (0..count).map(|i| if i + 1 == count { 1.0 } else { i as f64 / (count - 1) as f64 }).collect();
        let js = parameters.iter().map(|&t| j_at(j, jp, t)).collect::<Result<Vec<_>>>()?;
        let modulus = js.windows(2).map(|w| (&w[1] - &w[0]).amax()).fold(0.0, f64::max);
        if modulus < 0.05 || count > 1 << 14 {
            let mut signatures = Vec::with_capacity(js.len());
            for jt in &js {
                ContactData { n, theta_scale: 1.0, j: jt.clone(), dtheta: dtheta.clone() }.validate(rng, 1e-10)?;
                signatures.push(levi_signature(&levi_form_of(jt, dtheta)?)?);
            }
            return Ok(JPath { parameters, samples: js, continuity_modulus: modulus, signatures });
        }
        count = 2 * count - 1;
    }
}

/// Adapted frame of `(dθ, J_t)` for `n = 1`: `v = e_1/√dθ(e_1, J_t e_1)` and
/// `J_t v`, a symplectic basis of `H`.
pub fn adapted_frame(jt: &RMat, dtheta: &RMat) -> Result<RMat> {
    if jt.nrows() != 2 {
        return Err(Error::UnsupportedDimension { n: jt.nrows() / 2 });
    }
    let e1 = nalgebra::DVector::from_column_slice(&[1.0, 0.0]);
    let je1 = jt * &e1;
    let g = e1.dot(&(dtheta * &je1));
    if !(g > 0.0) {
        return Err(Error::InvalidArgument("J is not calibrated".into()));
    }
    let v = e1 / g.sqrt();
    let w = jt * &v;
    let mut f = RMat::zeros(2, 2);
    f.set_column(0, &v);
    f.set_column(1, &w);
    Ok(f)
}

/// Level-`k` Szegő symbol of `(θ, J_t)` through the adapted frame.
pub fn szego_symbol_for_j(k: usize, jt: &RMat, dtheta: &RMat, cutoff: usize) -> Result<HomogeneousSymbol> {
    let frame = adapted_frame(jt, dtheta)?;
    szego_symbol_in_frame(k, 1, cutoff, &frame, 1.0, 1)
}

/// Idempotency defect of `s_k` and the orthogonality defect between levels.
pub fn szego_level_defects(levels: &[usize], n: usize, cutoff: usize) -> Result<(f64, f64)> {
    let syms = levels.iter().map(|&k| szego_symbol(k, n, cutoff)).collect::<Result<Vec<_>>>()?;
    let mut idem: f64 = 0.0;
    let mut orth: f64 = 0.0;
    for (i, a) in syms.iter().enumerate() {
        idem = idem.max(symbol_idempotency_defect(a)?);
        for b in syms.iter().skip(i + 1) {
            orth = orth.max(star(a, b)?.max_abs());
        }
    }
    Ok((idem, orth))
}

/// Inverse of the Kohn Laplacian, when it exists (`Y(q)`).
pub fn kohn_inverse(n: usize, q: usize, cutoff: usize) -> Result<HomogeneousSymbol> {
    invert_homogeneous(&kohn_laplacian(n, q, cutoff)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::adjoint_symbol;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn folland_stein_invertibility() {
        let n = 1;
        assert!(matches!(invert_homogeneous(&folland_stein(0.5, n, 16).unwrap()), Err(Error::NotInvertible { .. })));
        assert!(matches!(invert_homogeneous(&folland_stein(-1.5, n, 16).unwrap()), Err(Error::NotInvertible { .. })));
        let fs0 = folland_stein(0.0, n, 64).unwrap();
        assert!(invert_homogeneous(&fs0).is_ok());
        assert!(min_fiber_singular_value(&fs0) > 0.4);
    }

    #[test]
    fn kronecker_sum_matches_dense_fiber() {
        for lam in [-1.25, 0.0, 0.5, 1.0, 2.375] {
            let dense = min_fiber_singular_value(&folland_stein(lam, 2, 6).unwrap());
            let ks = folland_stein_min_singular_value(lam, 2, 6).unwrap();
            assert!((dense - ks).abs() < 1e-10, "λ = {lam}: {dense} vs {ks}");
        }
    }

    #[test]
    fn dbar_complex_and_adjoint() {
        for n in [1usize, 2] {
            for q in 0..n {
                let a = dbar_b(n, q + 1, 5).unwrap();
                let b = dbar_b(n, q, 5).unwrap();
                assert!(star(&a, &b).unwrap().max_abs() < 1e-12);
            }
            let d = dbar_b(n, 0, 5).unwrap();
            let adj = adjoint_symbol(&d);
            assert!(linalg::max_abs(&(&adj.fiber_plus - d.fiber_plus.adjoint())) < 1e-15);
        }
    }

    #[test]
    fn kohn_laplacian_on_functions_is_folland_stein() {
        for n in [1usize, 2] {
            let k = kohn_laplacian(n, 0, 6).unwrap();
            let fs = folland_stein(n as f64 / 2.0, n, 6).unwrap();
            assert!(k.distance(&fs) < 1e-10);
        }
    }

    #[test]
    fn kohn_invertibility_follows_y_condition() {
        for n in [1usize, 2] {
            for q in 0..=n {
                let ok = kohn_inverse(n, q, 6).is_ok();
                assert_eq!(ok, y_model(q, n), "n = {n}, q = {q}");
            }
        }
    }

    #[test]
    fn dbar_kernel_projections() {
        assert!(matches!(dbar_kernel_projection(1, 0, 8, 4), Err(Error::YConditionFails { q: 1 })));
        let p = dbar_kernel_projection(2, 0, 6, 4).unwrap();
        assert!(p.dbar_kernel.idempotency_defect < 1e-9);
        // The range contains the fiber kernel of ∂̄_{b;0}: the ground state at +.
        let lead = p.dbar_kernel.expansion.principal().unwrap();
        assert!((lead.fiber_plus[(0, 0)] - c(1.0)).norm() < 1e-12);
        assert!(p.szego_relation_defect.unwrap() < 1e-9);
        assert!(matches!(dbar_kernel_projection(2, 1, 6, 4), Err(Error::YConditionFails { q: 2 })));
        let p2 = dbar_kernel_projection(2, 2, 6, 4).unwrap();
        assert!(p2.dbar_star_kernel.is_some());
        assert!(p2.szego_relation_defect.unwrap() < 1e-9);
    }

    #[test]
    fn szego_levels() {
        let s0 = szego_symbol(0, 1, 12).unwrap();
        assert!((linalg::trace(&s0.fiber_plus).re - 1.0).abs() < 1e-12);
        assert!(s0.fiber_minus.norm() < 1e-12);
        assert!((s0.fiber_plus[(0, 0)].re - 1.0).abs() < 1e-12);
        let s1 = szego_symbol(1, 1, 12).unwrap();
        assert!((linalg::trace(&s1.fiber_plus).re - 1.0).abs() < 1e-12);
        let (idem, orth) = szego_level_defects(&[0, 1, 2], 1, 12).unwrap();
        assert!(idem < 1e-10 && orth < 1e-10);
    }

    #[test]
    fn conformal_and_orientation_covariance() {
        for k in [0usize, 1] {
            let r = conformal_covariance_check(k, 1, 2f64.ln(), 12).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(conformal_covariance_check(0, 1, 0.0, 10).unwrap().passed);
    }

    #[test]
    fn j_interpolation_stays_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let j = standard_j(1);
        let dm = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let jp = &dm * &j * dm.clone().try_inverse().unwrap();
        let path = interpolate_j(&j, &jp, &standard_dtheta(1), 33, &mut rng).unwrap();
        assert!((&path.samples[0] - &j).amax() < 1e-12);
        assert!((path.samples.last().unwrap() - &jp).amax() < 1e-12);
        assert!(path.continuity_modulus < 0.05);
        assert!(path.signatures.iter().all(|s| *s == path.signatures[0]));
        let constant = interpolate_j(&j, &j, &standard_dtheta(1), 33, &mut rng).unwrap();
        assert!(constant.samples.iter().all(|s| (s - &j).amax() < 1e-12));
    }

    #[test]
    fn szego_symbol_along_j_path_is_idempotent() {
        let j = standard_j(1);
        let dm = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let jp = &dm * &j * dm.clone().try_inverse().unwrap();
        let dt = standard_dtheta(1);
        let s_start = szego_symbol_for_j(0, &j, &dt, 16).unwrap();
        assert!(s_start.distance(&szego_symbol(0, 1, 16).unwrap()) < 1e-10);
        let s_mid = szego_symbol_for_j(0, &j_at(&j, &jp, 0.5).unwrap(), &dt, 16).unwrap();
        assert!(symbol_idempotency_defect(&s_mid).unwrap() < 1e-10);
        assert!((linalg::trace(&s_mid.fiber_plus).re - 1.0).abs() < 1e-10);
    }
}
