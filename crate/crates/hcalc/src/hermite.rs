//! Truncated Hermite bases, ladder operators, displacement operators and the
//! Weyl correspondence used to pass between fibers and scalar symbols.
//!
//! A basis of size `N` per Cartesian factor is used for each of the `n`
//! oscillator pairs, giving `B = N^n` states indexed row-major by the
//! multi-index `(k_1, …, k_n)`.

use num_complex::Complex64;

use crate::linalg::{c, kron, CMat, I};

/// Tensor product of `n` truncated one-dimensional Hermite bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermiteSpace {
    pub n: usize,
    pub cutoff: usize,
}

impl HermiteSpace {
    pub fn new(n: usize, cutoff: usize) -> Self {
        assert!(n >= 1 && cutoff >= 1);
        Self { n, cutoff }
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.n as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.cutoff;
            idx /= self.cutoff;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.cutoff + k)
    }

    /// Total excitation `|k| = Σ k_i` of a basis state.
    pub fn level(&self, idx: usize) -> usize {
        self.multi_index(idx).iter().sum()
    }

    /// Indices whose every factor lies below `N/2`; accuracy contracts refer to this block.
    pub fn resolved_indices(&self) -> Vec<usize> {
        let half = (self.cutoff / 2).max(1);
        (0..self.dim())
            .filter(|&i| self.multi_index(i).iter().all(|&k| k < half))
            .collect()
    }

    /// Embedding of this space's indices inside a larger cutoff.
    pub fn indices_in(&self, big: &HermiteSpace) -> Vec<usize> {
        assert!(big.n == self.n && big.cutoff >= self.cutoff);
        (0..self.dim()).map(|i| big.flat_index(&self.multi_index(i))).collect()
    }

    fn embed_1d(&self, j: usize, op: &CMat) -> CMat {
        let id = CMat::identity(self.cutoff, self.cutoff);
        let mut out = CMat::identity(1, 1);
        for k in 0..self.n {
            out = kron(&out, if k == j { op } else { &id });
        }
        out
    }

    /// Annihilation operator of the `j`-th oscillator (0-based).
    pub fn annihilation(&self, j: usize) -> CMat {
        self.embed_1d(j, &annihilation_1d(self.cutoff))
    }

    pub fn creation(&self, j: usize) -> CMat {
        self.annihilation(j).adjoint()
    }

    /// Position quadrature `Q_j = (a + a†)/√2`.
    pub fn q(&self, j: usize) -> CMat {
        let a = self.annihilation(j);
        (&a + a.adjoint()) * c(std::f64::consts::FRAC_1_SQRT_2)
    }

    /// Momentum quadrature `P_j = i(a† − a)/√2`.
    pub fn p(&self, j: usize) -> CMat {
        let a = self.annihilation(j);
        (a.adjoint() - &a) * (I * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// Diagonal number operator `Σ_j a_j† a_j`.
    pub fn number(&self) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            out[(i, i)] = c(self.level(i) as f64);
        }
        out
    }

    /// Parity operator `(−1)^{|k|}`.
    pub fn parity(&self) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            out[(i, i)] = c(if self.level(i) % 2 == 0 { 1.0 } else { -1.0 });
        }
        out
    }
}

/// One-dimensional truncated annihilation operator.
pub fn annihilation_1d(cutoff: usize) -> CMat {
    let mut a = CMat::zeros(cutoff, cutoff);
    for k in 1..cutoff {
        a[(k - 1, k)] = c((k as f64).sqrt());
    }
    a
}

/// A cutoff together with a padded copy, used to form exact compressions of
/// polynomials in ladder operators: the polynomial is evaluated at the padded
/// size and then restricted, so no truncation error enters the kept block.
#[derive(Clone, Debug)]
pub struct Padded {
    pub small: HermiteSpace,
    pub big: HermiteSpace,
    keep: Vec<usize>,
}

impl Padded {
    pub fn new(small: HermiteSpace, pad: usize) -> Self {
        let big = HermiteSpace::new(small.n, small.cutoff + pad);
        let keep = small.indices_in(&big);
        Self { small, big, keep }
    }

    pub fn compress(&self, m: &CMat) -> CMat {
        crate::linalg::select(m, &self.keep, &self.keep)
    }

    /// Compression onto `rank` copies of the small space (rank index outermost).
    pub fn compress_ranked(&self, m: &CMat, rank: usize) -> CMat {
        let bb = self.big.dim();
        let idx: Vec<usize> = (0..rank)
            .flat_map(|r| self.keep.iter().map(move |&k| r * bb + k))
            .collect();
        crate::linalg::select(m, &idx, &idx)
    }
}

/// Sign pattern of the fiber representation: `dπ(X_j) = i s₁ √|λ| Q_j`,
/// `dπ(X_{n+j}) = i s₂ √|λ| P_j`, with `s₁ s₂ = sign λ`.
pub fn sign_pattern(sign: i8) -> (f64, f64) {
    if sign > 0 {
        (1.0, 1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Fiber at `λ = sign` of the frame field with index `field` (0 is the
/// central field, `1..=n` the `X_j`, `n+1..=2n` the `X_{n+j}`).
pub fn frame_fiber(space: &HermiteSpace, field: usize, sign: i8) -> CMat {
    let n = space.n;
    let (s1, s2) = sign_pattern(sign);
    match field {
        0 => CMat::identity(space.dim(), space.dim()) * (I * sign as f64),
        f if f <= n => space.q(f - 1) * (I * s1),
        f if f <= 2 * n => space.p(f - n - 1) * (I * s2),
        _ => panic!("frame index {field} out of range"),
    }
}

/// Matrix elements `⟨k|D(β)|j⟩`, `0 ≤ k, j < N`, of the displacement operator
/// `D(β) = exp(β a† − β̄ a)`, from the closed form
/// `⟨k|D(β)|j⟩ = √(j!/k!) β^{k−j} e^{−|β|²/2} L_j^{(k−j)}(|β|²)` for `k ≥ j`
/// and its adjoint counterpart for `k < j`. Truncation does not affect the
/// entries, and the Laguerre recurrence stays accurate at high levels.
pub fn displacement(beta: Complex64, cutoff: usize) -> CMat {
    let x = beta.norm_sqr();
    let g = (-0.5 * x).exp();
    CMat::from_fn(cutoff, cutoff, |k, j| {
        let (lo, hi) = (k.min(j), k.max(j));
        let alpha = (hi - lo) as f64;
        let mut ratio = 1.0;
        for t in (lo + 1)..=hi {
            ratio /= t as f64;
        }
        let lag = laguerre(lo, alpha, x);
        let z = if k >= j { beta } else { -beta.conj() };
        z.powu((hi - lo) as u32) * (ratio.sqrt() * g * lag)
    })
}

/// Matrix elements of `D(β)` from the coherent state `D(β)|0⟩` and the ladder
/// relation `D a† = (a† − β̄) D`; an independent evaluation used to validate
/// [`displacement`]. The column recurrence amplifies rounding at high levels,
/// so it is only trusted on moderate blocks.
pub fn displacement_ladder(beta: Complex64, cutoff: usize) -> CMat {
    let mut d = CMat::zeros(cutoff, cutoff);
    let bb = beta.conj();
    let mut v = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for k in 0..cutoff {
        if k > 0 {
            v = v * beta / (k as f64).sqrt();
        }
        d[(k, 0)] = v;
    }
    for j in 0..cutoff - 1 {
        let sj = ((j + 1) as f64).sqrt();
        for k in 0..cutoff {
            let up = if k > 0 { d[(k - 1, j)] * (k as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
            d[(k, j + 1)] = (up - bb * d[(k, j)]) / sj;
        }
    }
    d
}

/// Generalized Laguerre polynomial `L_k^{(α)}(x)` by the three-term recurrence.
pub fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut l0 = 1.0;
    let mut l1 = 1.0 + alpha - x;
    for m in 1..k {
        let mf = m as f64;
        let l2 = ((2.0 * mf + 1.0 + alpha - x) * l1 - (mf + alpha) * l0) / (mf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Tensor-product displacement `⊗_j D(β_j)` on the space.
pub fn displacement_nd(space: &HermiteSpace, betas: &[Complex64]) -> CMat {
    assert_eq!(betas.len(), space.n);
    let mut out = CMat::identity(1, 1);
    for &b in betas {
        out = kron(&out, &displacement(b, space.cutoff));
    }
    out
}

/// Matrix `M(q, r) = 2^n D(2α) Π`, `α_j = (q_j + i r_j)/√2`, so that the Weyl
/// symbol of an operator `A` at the phase-space point `(q, r)` is `tr(A M)`.
pub fn weyl_probe(space: &HermiteSpace, q: &[f64], r: &[f64]) -> CMat {
    let betas: Vec<Complex64> = q
        .iter()
        .zip(r)
        .map(|(&qq, &rr)| Complex64::new(qq, rr) * std::f64::consts::SQRT_2)
        .collect();
    let mut m = displacement_nd(space, &betas);
    let scale = (2.0f64).powi(space.n as i32);
    for j in 0..space.dim() {
        let s = if space.level(j) % 2 == 0 { scale } else { -scale };
        for k in 0..space.dim() {
            m[(k, j)] *= s;
        }
    }
    m
}

/// `tr(A M)` for square blocks of equal size.
pub fn trace_product(a: &CMat, m: &CMat) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for k in 0..a.nrows() {
            acc += a[(j, k)] * m[(k, j)];
        }
    }
    acc
}

/// Weyl symbol of `A` at the phase-space point `(q, r)`.
pub fn weyl_symbol(space: &HermiteSpace, a: &CMat, q: &[f64], r: &[f64]) -> Complex64 {
    trace_product(a, &weyl_probe(space, q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn canonical_commutator_on_resolved_block() {
        let s = HermiteSpace::new(1, 12);
        let comm = s.q(0) * s.p(0) - s.p(0) * s.q(0);
        for k in 0..11 {
            assert!((comm[(k, k)] - I).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_fibers_satisfy_commutation_relations() {
        for sign in [1i8, -1] {
            let s = HermiteSpace::new(2, 6);
            let x0 = frame_fiber(&s, 0, sign);
            for j in 1..=2 {
                for k in 1..=2 {
                    let a = frame_fiber(&s, j, sign);
                    let b = frame_fiber(&s, 2 + k, sign);
                    let comm = &a * &b - &b * &a;
                    let expect = if j == k { -&x0 } else { CMat::zeros(36, 36) };
                    let idx = s.resolved_indices();
                    let d = crate::linalg::select(&(comm - expect), &idx, &idx);
                    assert!(max_abs(&d) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ladder_recurrence_matches_laguerre_formula() {
        for beta in [Complex64::new(0.3, -0.2), Complex64::new(1.7, 2.1), Complex64::new(-3.0, 1.5)] {
            let a = displacement(beta, 20);
            let b = displacement_ladder(beta, 20);
            let err = max_abs(&(a - b));
            assert!(err < 1e-9, "{beta} {err}");
        }
    }

    #[test]
    fn displacement_is_unitary_on_low_block() {
        let d = displacement(Complex64::new(2.2, -1.7), 140);
        let u = d.adjoint() * &d;
        for j in 0..60 {
            for k in 0..60 {
                let e = if j == k { 1.0 } else { 0.0 };
                assert!((u[(j, k)] - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn weyl_symbols_of_localized_operators() {
        let s = HermiteSpace::new(1, 40);
        let mut ground = CMat::zeros(40, 40);
        ground[(0, 0)] = c(1.0);
        let (q, r) = (0.4, -0.9);
        let w = weyl_symbol(&s, &ground, &[q], &[r]);
        assert!((w - c(2.0 * (-(q * q + r * r) as f64).exp())).norm() < 1e-12);
        // |1⟩⟨0| has Weyl symbol 2√2 (q − i r) e^{−(q² + r²)}.
        let mut raise = CMat::zeros(40, 40);
        raise[(1, 0)] = c(1.0);
        let wr = weyl_symbol(&s, &raise, &[q], &[r]);
        let expect = Complex64::new(q, -r) * (2.0 * std::f64::consts::SQRT_2 * (-(q * q + r * r)).exp());
        assert!((wr - expect).norm() < 1e-12, "{wr} vs {expect}");
    }

    #[test]
    fn padded_compression_of_number_operator_is_exact() {
        let small = HermiteSpace::new(1, 8);
        let pad = Padded::new(small, 2);
        let a = pad.big.annihilation(0);
        let aad = &a * a.adjoint();
        let comp = pad.compress(&aad);
        for k in 0..8 {
            assert!((comp[(k, k)] - c(k as f64 + 1.0)).norm() < 1e-12);
        }
    }
}
