//! The contact complex of the three-dimensional quotient, sector by sector.
//!
//! With horizontal forms written in the frame dual to `X_1, X_2`, the complex
//! reads
//!
//! ```text
//! d_{R,0} f     = (X_1 f, X_2 f)
//! D_{R,1}(a, b) = ((X_0 − X_1X_2) a + X_1² b,  −X_2² a + (X_0 + X_2X_1) b)
//! d_{R,1}(a, b) = X_1 b − X_2 a
//! ```
//!
//! Each ladder step raises the Hermite level by at most one, so the forms of
//! degree 0, 1, 2, 3 are kept at cutoffs `N`, `N+1`, `N+3`, `N+4` on nonzero
//! sectors. The maps between these truncated spaces are then exact
//! restrictions of the full operators and the complex identities hold
//! exactly. Laplacians and adjoints are assembled on a padded space and
//! restricted afterwards.

use rayon::prelude::*;
use serde::Serialize;

use crate::hermite::{frame_fiber, HermiteSpace};
use crate::linalg::{self, c, CMat, CVec, I};
use crate::nilmanifold::{NilmanifoldModel, SectorOperator};
use crate::residue::{sector_trace_fit, SectorFit, SectorFitConfig};
use crate::{Error, Result};

/// Relative cutoff of the sector pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Extra Hermite levels of the padded assembly space.
const RUMIN_PAD: usize = 8;

/// Hermite cutoffs of the form degrees 0..=3 on nonzero sectors.
pub fn staircase(n: usize) -> [usize; 4] {
    [n, n + 1, n + 3, n + 4]
}

/// Per-sector operators of the contact complex and its Laplacians.
#[derive(Clone, Debug)]
pub struct RuminOperators {
    pub model: NilmanifoldModel,
    pub d0: SectorOperator,
    pub dd: SectorOperator,
    pub d1: SectorOperator,
    /// `d_{R,0}*` : degree 1 → degree 0 at cutoff `N+2`.
    pub d0_star: SectorOperator,
    /// `D_{R,1}*` : degree 2 → degree 1 at cutoff `N+5`.
    pub dd_star: SectorOperator,
    /// `d_{R,1}*` : degree 3 → degree 2 at cutoff `N+5`.
    pub d1_star: SectorOperator,
    pub lap0: SectorOperator,
    pub lap11: SectorOperator,
    pub lap12: SectorOperator,
    pub lap2: SectorOperator,
}

/// Frame fields of one sector on the padded space (or the abelian sector).
struct SectorFrame {
    x: [CMat; 3],
    /// Number of Hermite levels (or abelian modes) of the padded space.
    size: usize,
    abelian: bool,
}

impl SectorFrame {
    fn new(model: &NilmanifoldModel, m: i64, big: usize) -> Self {
        if m == 0 {
            let modes = model.abelian_modes();
            let mk = |f: usize| {
                let diag: Vec<_> =
                    modes.iter().map(|&k| if f == 0 { c(0.0) } else { I * model.abelian_frequency(k)[f - 1] }).collect();
                CMat::from_diagonal(&CVec::from_vec(diag))
            };
            return Self { x: [mk(0), mk(1), mk(2)], size: modes.len(), abelian: true };
        }
        let space = HermiteSpace::new(1, big);
        let mu = model.mu(m);
        let sign: i8 = if m > 0 { 1 } else { -1 };
        let r = mu.abs().sqrt();
        Self {
            x: [
                frame_fiber(&space, 0, sign) * c(mu.abs()),
                frame_fiber(&space, 1, sign) * c(r),
                frame_fiber(&space, 2, sign) * c(r),
            ],
            size: big,
            abelian: false,
        }
    }

    /// Restricts a block operator (blocks of the padded size) to `rows_cut`
    /// levels per output component and `cols_cut` per input component.
    fn restrict(&self, m: &CMat, out_parts: usize, in_parts: usize, rows_cut: usize, cols_cut: usize) -> CMat {
        let (rc, cc) = if self.abelian { (self.size, self.size) } else { (rows_cut, cols_cut) };
        let rows: Vec<usize> = (0..out_parts).flat_map(|p| (0..rc).map(move |k| p * self.size + k)).collect();
        let cols: Vec<usize> = (0..in_parts).flat_map(|p| (0..cc).map(move |k| p * self.size + k)).collect();
        linalg::select(m, &rows, &cols)
    }
}

fn blocks(parts: &[&[CMat]]) -> CMat {
    let rows = parts.len();
    let cols = parts[0].len();
    let b = parts[0][0].nrows();
    let mut out = CMat::zeros(rows * b, cols * b);
    for (i, row) in parts.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            out.view_mut((i * b, j * b), (b, b)).copy_from(blk);
        }
    }
    out
}

struct SectorComplex {
    d0: CMat,
    dd: CMat,
    d1: CMat,
    d0_star: CMat,
    dd_star: CMat,
    d1_star: CMat,
    lap0: CMat,
    lap11: CMat,
    lap12: CMat,
    lap2: CMat,
}

fn sector_complex(model: &NilmanifoldModel, m: i64) -> SectorComplex {
    let n = model.hermite_cutoff;
    let big = n + RUMIN_PAD;
    let f = SectorFrame::new(model, m, big);
    let [x0, x1, x2] = &f.x;
    let d0b = blocks(&[&[x1.clone()], &[x2.clone()]]);
    let ddb = blocks(&[&[x0 - x1 * x2, x1 * x1], &[-(x2 * x2), x0 + x2 * x1]]);
    let d1b = blocks(&[&[-x2.clone(), x1.clone()]]);
    let [c0, c1, c2, c3] = staircase(n);
    let d0 = f.restrict(&d0b, 2, 1, c1, c0);
    let dd = f.restrict(&ddb, 2, 2, c2, c1);
    let d1 = f.restrict(&d1b, 1, 2, c3, c2);
    let d0_star = f.restrict(&d0b.adjoint(), 1, 2, c1 + 1, c1);
    let dd_star = f.restrict(&ddb.adjoint(), 2, 2, c2 + 2, c2);
    let d1_star = f.restrict(&d1b.adjoint(), 2, 1, c3 + 1, c3);
    let g0 = d0b.adjoint() * &d0b * c(2.0);
    let dd0 = &d0b * d0b.adjoint();
    let g11 = &dd0 * &dd0 + ddb.adjoint() * &ddb;
    let g12 = &ddb * ddb.adjoint() + d1b.adjoint() * &d1b;
    let g2 = &d1b * d1b.adjoint();
    SectorComplex {
        d0,
        dd,
        d1,
        d0_star,
        dd_star,
        d1_star,
        lap0: f.restrict(&g0, 1, 1, c0, c0),
        lap11: f.restrict(&g11, 2, 2, c1, c1),
        lap12: f.restrict(&g12, 2, 2, c2, c2),
        lap2: f.restrict(&g2, 1, 1, c3, c3),
    }
}

/// Builds the complex on every sector of an `n = 1` model.
pub fn rumin_build(model: &NilmanifoldModel) -> Result<RuminOperators> {
    let sectors: Vec<i64> = model.sectors().collect();
    let parts: Vec<SectorComplex> = sectors.par_iter().map(|&m| sector_complex(model, m)).collect();
    let wrap = |f: &dyn Fn(&SectorComplex) -> CMat, tag: &str| SectorOperator {
        per_sector: parts.iter().map(f).collect(),
        sector_max: model.sector_max,
        rank: 1,
        symbol_tag: Some(tag.to_string()),
    };
    Ok(RuminOperators {
        model: model.clone(),
        d0: wrap(&|s| s.d0.clone(), "d_R0"),
        dd: wrap(&|s| s.dd.clone(), "D_R1"),
        d1: wrap(&|s| s.d1.clone(), "d_R1"),
        d0_star: wrap(&|s| s.d0_star.clone(), "d_R0*"),
        dd_star: wrap(&|s| s.dd_star.clone(), "D_R1*"),
        d1_star: wrap(&|s| s.d1_star.clone(), "d_R1*"),
        lap0: wrap(&|s| s.lap0.clone(), "Δ_R0"),
        lap11: wrap(&|s| s.lap11.clone(), "Δ_R11"),
        lap12: wrap(&|s| s.lap12.clone(), "Δ_R12"),
        lap2: wrap(&|s| s.lap2.clone(), "Δ_R2"),
    })
}

/// Structural checks of the complex.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexReport {
    /// `max ‖D_{R,1} d_{R,0}‖ / (‖D_{R,1}‖ ‖d_{R,0}‖)` over sectors, entrywise norms.
    pub dd_d0: f64,
    /// `max ‖d_{R,1} D_{R,1}‖ / (‖d_{R,1}‖ ‖D_{R,1}‖)` over sectors, entrywise norms.
    pub d1_dd: f64,
    /// Largest Hermitian defect among the Laplacians.
    pub laplacian_hermitian_defect: f64,
    /// Smallest singular value of each Laplacian over nonzero sectors, in the
    /// order `Δ_R0, Δ_R11, Δ_R12, Δ_R2`, scaled by `|μ_m|^{order/2}`.
    pub min_scaled_singular_values: [f64; 4],
    /// Dimension of `ker Δ_R0` on the abelian sector.
    pub abelian_kernel_dim: usize,
}

pub fn complex_report(ops: &RuminOperators) -> Result<ComplexReport> {
    let relative = |a: &SectorOperator, b: &SectorOperator| -> Result<f64> {
        let ab = a.mul(b)?;
        Ok(ab
            .per_sector
            .iter()
            .zip(a.per_sector.iter().zip(&b.per_sector))
            .map(|(p, (x, y))| {
                let scale = linalg::max_abs(x) * linalg::max_abs(y);
                if scale > 0.0 { linalg::max_abs(p) / scale } else { 0.0 }
            })
            .fold(0.0, f64::max))
    };
    let dd_d0 = relative(&ops.dd, &ops.d0)?;
    let d1_dd = relative(&ops.d1, &ops.dd)?;
    let laps = [&ops.lap0, &ops.lap11, &ops.lap12, &ops.lap2];
    let orders = [2.0, 4.0, 4.0, 2.0];
    let herm = laps.iter().map(|l| l.hermitian_defect()).fold(0.0, f64::max);
    let mut mins = [f64::INFINITY; 4];
    for (i, l) in laps.iter().enumerate() {
        let vals: Vec<f64> = l
            .sectors()
            .filter(|(m, _)| *m != 0)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(m, a)| {
                let (ev, _) = linalg::hermitian_eigen(a);
                ev[0] / ops.model.mu(m).abs().powf(orders[i] / 2.0)
            })
            .collect();
        mins[i] = vals.into_iter().fold(f64::INFINITY, f64::min);
    }
    let (ev0, _) = linalg::hermitian_eigen(ops.lap0.sector(0));
    let top = ev0.iter().cloned().fold(0.0, f64::max);
    let abelian_kernel_dim = ev0.iter().filter(|v| v.abs() <= 1e-10 * top.max(1.0)).count();
    Ok(ComplexReport { dd_d0, d1_dd, laplacian_hermitian_defect: herm, min_scaled_singular_values: mins, abelian_kernel_dim })
}

/// Orthogonal projection onto the kernel of `a`, `1 − a⁺a`. The rank is read
/// off the singular values at `PINV_CUTOFF · σ_max`; the kernel basis is the
/// matching set of eigenvectors of `a*a`, which is orthonormal to rounding.
pub fn kernel_projection(a: &CMat) -> CMat {
    let sv = linalg::singular_values(a);
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > PINV_CUTOFF * top && s > 0.0).count();
    let (_, vecs) = linalg::hermitian_eigen(&(a.adjoint() * a));
    let nullity = a.ncols() - rank;
    let v = vecs.columns(0, nullity).into_owned();
    &v * v.adjoint()
}

/// A kernel projection with its sector fit and diagnostics.
#[derive(Clone, Debug)]
pub struct RuminProjection {
    pub name: String,
    pub projection: SectorOperator,
    pub idempotency_defect: f64,
    pub hermitian_defect: f64,
    /// Sectors whose smallest retained singular value is below `1e-8` of the largest.
    pub ill_conditioned_sectors: Vec<i64>,
    pub fit: Option<SectorFit>,
}

fn conditioning_flag(a: &CMat) -> bool {
    let sv = linalg::singular_values(a);
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let retained: Vec<f64> = sv.into_iter().filter(|s| *s > PINV_CUTOFF * top).collect();
    retained.iter().cloned().fold(f64::INFINITY, f64::min) < 1e-8 * top
}

fn kernel_projection_of(op: &SectorOperator, name: &str, model: &NilmanifoldModel) -> Result<RuminProjection> {
    let projection = op.map(kernel_projection);
    let flags: Vec<i64> = op
        .sectors()
        .collect::<Vec<_>>()
        .par_iter()
        .filter(|(_, a)| conditioning_flag(a))
        .map(|(m, _)| *m)
        .collect();
    let idempotency_defect = projection
        .per_sector
        .par_iter()
        .map(|p| linalg::max_abs(&(p * p - p)))
        .reduce(|| 0.0, f64::max);
    let hermitian_defect = projection.hermitian_defect();
    let traces = crate::nilmanifold::sector_traces(&projection);
    let fit = sector_trace_fit(&traces, model.central_period, 1, 0, &SectorFitConfig::default()).ok();
    Ok(RuminProjection {
        name: name.to_string(),
        projection,
        idempotency_defect,
        hermitian_defect,
        ill_conditioned_sectors: flags,
        fit,
    })
}

/// Kernel projections of the operators of the complex and their adjoints.
#[derive(Clone, Debug)]
pub struct RuminProjections {
    pub d0: RuminProjection,
    pub d0_star: RuminProjection,
    pub dd: RuminProjection,
    pub dd_star: RuminProjection,
    pub d1: RuminProjection,
    pub d1_star: RuminProjection,
}

impl RuminProjections {
    pub fn all(&self) -> [&RuminProjection; 6] {
        [&self.d0, &self.d0_star, &self.dd, &self.dd_star, &self.d1, &self.d1_star]
    }

    /// `(Res Π₀(d*) + Res Π₀(d), combined band)` for the pairs `d_{R,0}`,
    /// `D_{R,1}`, `d_{R,1}`; `None` where a fit is missing.
    pub fn duality(&self) -> Vec<(String, Option<(f64, f64)>)> {
        [(&self.d0, &self.d0_star), (&self.dd, &self.dd_star), (&self.d1, &self.d1_star)]
            .iter()
            .map(|(a, b)| {
                let v = match (&a.fit, &b.fit) {
                    (Some(fa), Some(fb)) => Some(((fa.c_re + fb.c_re).abs(), fa.band + fb.band)),
                    _ => None,
                };
                (a.name.clone(), v)
            })
            .collect()
    }
}

pub fn rumin_projections(ops: &RuminOperators) -> Result<RuminProjections> {
    if ops.d0.per_sector.is_empty() {
        return Err(Error::InvalidArgument("empty complex".into()));
    }
    let md = &ops.model;
    Ok(RuminProjections {
        d0: kernel_projection_of(&ops.d0, "Π₀(d_R0)", md)?,
        d0_star: kernel_projection_of(&ops.d0_star, "Π₀(d_R0*)", md)?,
        dd: kernel_projection_of(&ops.dd, "Π₀(D_R1)", md)?,
        dd_star: kernel_projection_of(&ops.dd_star, "Π₀(D_R1*)", md)?,
        d1: kernel_projection_of(&ops.d1, "Π₀(d_R1)", md)?,
        d1_star: kernel_projection_of(&ops.d1_star, "Π₀(d_R1*)", md)?,
    })
}

/// Ratio of operator norms on the resolved block between sectors `m2` and
/// `m1`; a homogeneous operator of order `r` gives `(m2/m1)^{r/2}`.
pub fn sector_scaling(op: &SectorOperator, model: &NilmanifoldModel, m1: i64, m2: i64, parts_in: usize) -> f64 {
    let keep = model.hermite_cutoff / 2;
    let restrict = |a: &CMat| {
        let per_in = a.ncols() / parts_in;
        let cols: Vec<usize> = (0..parts_in).flat_map(|p| (0..keep).map(move |k| p * per_in + k)).collect();
        let rows: Vec<usize> = (0..a.nrows()).collect();
        linalg::op_norm(&linalg::select(a, &rows, &cols))
    };
    restrict(op.sector(m2)) / restrict(op.sector(m1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilmanifold::{build_model, NilmanifoldConfig};

    fn ops() -> RuminOperators {
        let md = build_model(&NilmanifoldConfig { period: 1.0, sectors: 4, hermite_cutoff: 16, abelian_grid: 8 }).unwrap();
        rumin_build(&md).unwrap()
    }

    #[test]
    fn complex_identities_are_exact() {
        let o = ops();
        let r = complex_report(&o).unwrap();
        assert!(r.dd_d0 < 1e-12, "{}", r.dd_d0);
        assert!(r.d1_dd < 1e-12, "{}", r.d1_dd);
        assert!(r.laplacian_hermitian_defect < 1e-10);
        assert!(r.min_scaled_singular_values.iter().all(|v| *v > 1e-3), "{:?}", r.min_scaled_singular_values);
        assert_eq!(r.abelian_kernel_dim, 1);
    }

    #[test]
    fn central_part_of_second_order_operator() {
        let o = ops();
        // The horizontal parts of the diagonal blocks add up to the bracket
        // [X_2, X_1] = X_0, so the two blocks sum to 3X_0 = 3iμ_m.
        let [_, n1, n2, _] = staircase(16);
        for m in [3i64, -2] {
            let d = o.dd.sector(m);
            let sum = d.view((0, 0), (n2, n1)) + d.view((n2, n1), (n2, n1));
            let mut expect = CMat::zeros(n2, n1);
            for k in 0..n1 {
                expect[(k, k)] = I * (3.0 * o.model.mu(m));
            }
            assert!(linalg::max_abs(&(sum - expect)) < 1e-10, "sector {m}");
        }
    }

    #[test]
    fn orders_under_sector_scaling() {
        let o = ops();
        let md = &o.model;
        let r_d0 = sector_scaling(&o.d0, md, 1, 4, 1);
        let r_dd = sector_scaling(&o.dd, md, 1, 4, 2);
        assert!((r_d0 - 2.0).abs() < 1e-10, "{r_d0}");
        assert!((r_dd - 4.0).abs() < 1e-10, "{r_dd}");
        let r_l0 = sector_scaling(&o.lap0, md, 1, 4, 1);
        let r_l11 = sector_scaling(&o.lap11, md, 1, 4, 2);
        assert!((r_l0 - 4.0).abs() < 1e-10 && (r_l11 - 16.0).abs() < 1e-10, "{r_l0} {r_l11}");
    }

    #[test]
    fn kernel_projections_are_idempotent() {
        let o = ops();
        let p = rumin_projections(&o).unwrap();
        for q in p.all() {
            assert!(q.idempotency_defect < 1e-9, "{} {}", q.name, q.idempotency_defect);
        }
        // Constants are closed: Π₀(d_R0) is the projection onto mode 0 of the abelian sector.
        let a = p.d0.projection.sector(0);
        let modes = o.model.abelian_modes();
        let zero = modes.iter().position(|k| *k == [0, 0]).unwrap();
        assert!((a[(zero, zero)] - c(1.0)).norm() < 1e-12);
        assert!((linalg::trace(a).re - 1.0).abs() < 1e-10);
        for m in [1i64, -2, 4] {
            assert!(p.d0.projection.sector(m).norm() < 1e-10);
        }
    }
}
