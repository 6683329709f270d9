//! Property suites behind `hcalc verify` and the acceptance tests.
//!
//! Each suite returns a list of [`Check`]s, a measured quantity compared with
//! a tolerance or a threshold. The suites take their resolutions from
//! [`SuiteParams`] and draw every random instance from its seed.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::rumin::{complex_report, rumin_build, rumin_projections, ComplexReport, RuminProjections};
use crate::geometry::{
    dbar_kernel_projection, folland_stein, folland_stein_min_singular_value, interpolate_j, min_fiber_singular_value,
    szego_symbol, szego_symbol_for_j,
};
use crate::group::{
    bracket, dilate, group_law, left_frame, standard_dtheta, standard_j, szego_projection_gate, y_condition, FrameMap,
    GroupPoint, HeisenbergGroupSpec,
};
use crate::linalg::{self, c, CMat, RMat};
use crate::nilmanifold::{
    build_model, lift, reconstruct_kernel, sector_traces, KernelOptions, NilmanifoldConfig, NilmanifoldModel,
    SectorOperator,
};
use crate::projection::{
    projection_from_symbol, riesz_expansion, rotated_symbol, transport_involution, FromSymbolOptions,
    IdempotentSymbolPath, ProjectionOperator,
};
use crate::residue::{
    kernel_log_fit, lower_terms_for_seed, residue, rho_R, sector_trace_fit, trace_property_check, IdempotentPair,
    KernelSample, LogFit, LogFitConfig, SectorFitConfig,
};
use crate::symbol::{
    direct_sum_symbol, expansion_mul, inverse_expansion, random_expansion, HomogeneousSymbol, SymbolExpansion,
    SymbolShape, EXACT_TRUNCATION,
};
use crate::{Error, Result};

/// How a measured value is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// Passes when `measured ≤ tolerance`.
    AtMost,
    /// Passes when `measured > tolerance`.
    Above,
}

/// One measured property.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
    pub note: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            relation: Relation::AtMost,
            passed: measured <= tolerance,
            note: note.into(),
        }
    }

    pub fn above(name: impl Into<String>, measured: f64, threshold: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: threshold,
            relation: Relation::Above,
            passed: measured > threshold,
            note: note.into(),
        }
    }
}

/// Resolutions and seed of a suite run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteParams {
    /// Hermite cutoff `N` of symbol fibers and sector blocks.
    pub hermite_cutoff: usize,
    /// Sector count `M` of the sector-trace fits.
    pub sectors: i64,
    /// Sector count of the kernel reconstruction, which needs far more
    /// central modes than the trace fits.
    pub kernel_sectors: i64,
    /// Hermite cutoff of the kernel reconstruction.
    pub kernel_cutoff: usize,
    pub seed: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self { hermite_cutoff: 32, sectors: 32, kernel_sectors: 16384, kernel_cutoff: 16, seed: 20240531 }
    }
}

/// Round-off floor added to fitted bands: a jackknife over data that the fit
/// reproduces exactly has a spread at the level of rounding only.
pub const BAND_FLOOR: f64 = 1e-9;

/// Amplitude of the random lower-order terms.
pub const LOWER_AMPLITUDE: f64 = 0.2;

/// Coefficient of the degree-1 perturbation `σ((1/i)X_1)` of the
/// Folland–Stein operators in the cross-route checks.
pub const PERTURBATION: f64 = 0.3;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_point<R: Rng>(rng: &mut R, n: usize) -> GroupPoint {
    GroupPoint::new((0..=2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("odd dimension")
}

/// Group law, inverse, dilations and the frame commutation table on 1000
/// random instances spread over `n = 1, 2, 3`.
pub fn group_algebra(params: &SuiteParams) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (mut assoc, mut inv, mut dil, mut table, mut frame) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let instances = 1000;
    for k in 0..instances {
        let n = 1 + k % 3;
        let spec = HeisenbergGroupSpec::new(n)?;
        let (x, y, z) = (random_point(&mut rng, n), random_point(&mut rng, n), random_point(&mut rng, n));
        let t = rng.gen_range(0.1..3.0);
        let left = group_law(&group_law(&x, &y)?, &z)?;
        let right = group_law(&x, &group_law(&y, &z)?)?;
        assoc = assoc.max(max_abs_diff(&left.coords, &right.coords));
        let zero = vec![0.0; spec.dim()];
        inv = inv
            .max(max_abs_diff(&group_law(&x, &x.inverse())?.coords, &zero))
            .max(max_abs_diff(&group_law(&x.inverse(), &x)?.coords, &zero));
        let dxy = dilate(t, &group_law(&x, &y)?.coords)?;
        let dx = GroupPoint::new(dilate(t, &x.coords)?)?;
        let dy = GroupPoint::new(dilate(t, &y.coords)?)?;
        dil = dil.max(max_abs_diff(&dxy, &group_law(&dx, &dy)?.coords));
        // [X_i, X_j] from the affine fields against the expected table and
        // against the structure constants expanded in the frame at x.
        let fields = left_frame(spec);
        let i = rng.gen_range(0..spec.dim());
        let j = rng.gen_range(0..spec.dim());
        let direct = fields[i].bracket(&fields[j]).coefficients(&x.coords);
        let mut expected = vec![0.0; spec.dim()];
        if (1..=n).contains(&i) && j == i + n {
            expected[0] = -1.0;
        } else if (1..=n).contains(&j) && i == j + n {
            expected[0] = 1.0;
        }
        table = table.max(max_abs_diff(&direct, &expected));
        let consts = bracket(i, j, spec)?;
        let mut expanded = vec![0.0; spec.dim()];
        for (k, &b) in consts.iter().enumerate() {
            for (e, v) in expanded.iter_mut().zip(fields[k].coefficients(&x.coords)) {
                *e += b * v;
            }
        }
        frame = frame.max(max_abs_diff(&direct, &expanded));
    }
    let note = format!("{instances} instances, coordinates in [-1, 1], n = 1..3");
    Ok(vec![
        Check::at_most("associativity", assoc, 1e-12, &note),
        Check::at_most("inverse law", inv, 1e-12, &note),
        Check::at_most("dilation automorphism", dil, 1e-12, &note),
        Check::at_most("commutation table [X_j, X_{n+k}] = -δ_jk X_0", table, 1e-12, &note),
        Check::at_most("frame brackets vs structure constants", frame, 1e-12, &note),
    ])
}

/// `λ` is exceptional when `|λ| ∈ n/2 + ℕ`.
fn exceptional(lambda: f64, n: usize) -> bool {
    let k = lambda.abs() - n as f64 / 2.0;
    k >= -1e-12 && (k - k.round()).abs() < 1e-12
}

/// Folland–Stein `λ`-scan over `[−4, 4]` with step `1/8` for `n = 1, 2`.
pub fn folland_stein_scan(params: &SuiteParams) -> Result<Vec<Check>> {
    let cutoff = params.hermite_cutoff;
    let lambdas: Vec<f64> = (-32..=32).map(|k| k as f64 / 8.0).collect();
    let mut out = Vec::new();
    for n in [1usize, 2] {
        let svs = lambdas
            .par_iter()
            .map(|&l| {
                if n == 1 {
                    folland_stein(l, 1, cutoff).map(|s| min_fiber_singular_value(&s))
                } else {
                    folland_stein_min_singular_value(l, n, cutoff)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut at = 0.0f64;
        let mut off = f64::INFINITY;
        let mut count = 0;
        for (l, s) in lambdas.iter().zip(&svs) {
            if exceptional(*l, n) {
                at = at.max(*s);
                count += 1;
            } else {
                off = off.min(*s);
            }
        }
        let route = if n == 1 { "dense fiber" } else { "Kronecker-sum spectrum" };
        out.push(Check::at_most(
            format!("n = {n}: max σ_min at λ ∈ ±(n/2 + ℕ)"),
            at,
            1e-8,
            format!("{count} exceptional λ, N = {cutoff}, {route}"),
        ));
        out.push(Check::above(
            format!("n = {n}: min σ_min elsewhere"),
            off,
            0.1,
            format!("{} regular λ, N = {cutoff}, {route}", lambdas.len() - count),
        ));
    }
    // The Kronecker route against dense n = 2 fibers at a small cutoff.
    let small = 6;
    let diffs = lambdas
        .par_iter()
        .map(|&l| -> Result<f64> {
            let dense = min_fiber_singular_value(&folland_stein(l, 2, small)?);
            Ok((dense - folland_stein_min_singular_value(l, 2, small)?).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    out.push(Check::at_most(
        "n = 2: Kronecker-sum route vs dense fibers",
        diffs.into_iter().fold(0.0, f64::max),
        1e-10,
        format!("N = {small}, all scan points"),
    ));
    Ok(out)
}

/// `|Res(AB) − Res(BA)|` relative to the pairing scale on 20 random pairs.
pub fn trace_property(params: &SuiteParams) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x3);
    let shape = SymbolShape::new(1, 2, params.hermite_cutoff);
    let pairs: Vec<(SymbolExpansion, SymbolExpansion)> = (0..20)
        .map(|_| {
            let ta: i32 = rng.gen_range(-4..=2);
            let tb: i32 = rng.gen_range(-4..=2);
            let da: Vec<i32> = (-4..=ta).rev().collect();
            let db: Vec<i32> = (-4..=tb).rev().collect();
            (random_expansion(&mut rng, shape, &da, EXACT_TRUNCATION), random_expansion(&mut rng, shape, &db, EXACT_TRUNCATION))
        })
        .collect();
    let defects = pairs
        .par_iter()
        .map(|(a, b)| trace_property_check(a, b))
        .collect::<Result<Vec<_>>>()?;
    let rel = defects.iter().map(|t| t.defect / t.scale.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    let abs = defects.iter().map(|t| t.defect).fold(0.0, f64::max);
    let nontrivial = defects.iter().filter(|t| t.scale > 0.0).count();
    Ok(vec![
        Check::at_most(
            "|Res(AB) - Res(BA)| / scale",
            rel,
            1e-6,
            format!("20 pairs, degrees in [-4, 2], rank 2, N = {}, {nontrivial} with a degree -4 pairing", params.hermite_cutoff),
        ),
        Check::at_most("max |Res(AB) - Res(BA)|", abs, 1e-6, "absolute defect"),
    ])
}

/// Degree-2 operator `FS(λ) + 0.3·σ((1/i)X_1)` on `n = 1`.
pub fn perturbed_folland_stein(lambda: f64, cutoff: usize) -> Result<SymbolExpansion> {
    let fs = folland_stein(lambda, 1, cutoff)?;
    let x1 = HomogeneousSymbol::frame_symbol(1, cutoff, 1)?.scale(c(PERTURBATION));
    SymbolExpansion::exact(vec![fs, x1])
}

/// Residues of differential symbols, of expansions below degree `−(d+3)` and
/// of homogeneous degree-0 projections.
pub fn vanishing_laws(params: &SuiteParams) -> Result<Vec<Check>> {
    let n_cut = params.hermite_cutoff;
    let mut diff = 0.0f64;
    for n in [1usize, 2] {
        let cut = if n == 1 { n_cut } else { 6 };
        let fs = SymbolExpansion::single(folland_stein(0.3, n, cut)?);
        diff = diff.max(residue(&fs).norm());
        let mut fields = Vec::new();
        for f in 0..=2 * n {
            let x = SymbolExpansion::single(HomogeneousSymbol::frame_symbol(n, cut, f)?);
            diff = diff.max(residue(&x).norm());
            fields.push(x);
        }
        // Products and sums of differential symbols stay differential.
        let prod = expansion_mul(&fields[1], &fields[n + 1])?;
        diff = diff.max(residue(&prod).norm());
        let sum = expansion_mul(&fs, &fields[1])?.add(&fields[0])?;
        diff = diff.max(residue(&sum).norm());
    }
    diff = diff.max(residue(&perturbed_folland_stein(-0.7, n_cut)?).norm());

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x4);
    let mut low = 0.0f64;
    for n in [1usize, 2] {
        let cut = if n == 1 { n_cut } else { 6 };
        let shape = SymbolShape::new(n, 1, cut);
        let crit = shape.group().critical_degree();
        let degs: Vec<i32> = (crit - 4..=crit - 1).rev().collect();
        for _ in 0..5 {
            let e = random_expansion(&mut rng, shape, &degs, crit - 4);
            low = low.max(residue(&e).norm());
        }
        // A product whose degrees all lie below −(d+2).
        let a = random_expansion(&mut rng, shape, &[crit / 2, crit / 2 - 1], crit - 4);
        let b = random_expansion(&mut rng, shape, &[crit / 2 - 1, crit / 2 - 2], crit - 4);
        low = low.max(residue(&expansion_mul(&a, &b)?).norm());
    }

    let mut proj = 0.0f64;
    let mut count = 0;
    for k in 0..4 {
        let s = szego_symbol(k, 1, n_cut)?;
        proj = proj.max(residue(&SymbolExpansion::single(s.clone())).norm());
        let r = rotated_symbol(&s, 1, k, k + 1, 0.4)?;
        proj = proj.max(residue(&SymbolExpansion::single(r)).norm());
        count += 2;
    }
    let pd = dbar_kernel_projection(2, 0, 6, 4)?;
    let lead = pd.dbar_kernel.expansion.principal().expect("nonempty").clone();
    proj = proj.max(residue(&SymbolExpansion::single(lead)).norm());
    count += 1;
    Ok(vec![
        Check::at_most("Res of differential-type symbols", diff, 1e-8, "Folland-Stein, frame symbols, products; n = 1, 2"),
        Check::at_most("Res of expansions below degree -(d+3)", low, 1e-8, "random expansions and products; n = 1, 2"),
        Check::at_most("Res of homogeneous degree-0 projections", proj, 1e-8, format!("{count} idempotent symbols")),
    ])
}

/// Riesz projection of `FS(1) + 0.3σ((1/i)X_1)` onto its negative eigenvalue
/// on the positive fiber.
pub fn perturbed_riesz_projection(cutoff: usize) -> Result<ProjectionOperator> {
    let a = perturbed_folland_stein(1.0, cutoff)?.with_truncation(-4);
    let e = riesz_expansion(&a, c(-0.5), 0.5, 4)?;
    ProjectionOperator::from_expansion(e)
}

/// The ten projections of the realness and duality checks.
pub fn sample_projections(params: &SuiteParams) -> Result<Vec<(String, ProjectionOperator)>> {
    let cut = params.hermite_cutoff;
    let seed = params.seed;
    let shape1 = SymbolShape::new(1, 1, cut);
    let lower = |shape: SymbolShape, k: u64| lower_terms_for_seed(shape, seed.wrapping_add(k), LOWER_AMPLITUDE);
    let opts = FromSymbolOptions::default();
    let mut out = Vec::new();
    for k in 0..4 {
        let s = szego_symbol(k, 1, cut)?;
        out.push((format!("s_{k} with lower terms"), projection_from_symbol(&s, Some(&lower(shape1, k as u64)), opts)?));
    }
    let s0 = szego_symbol(0, 1, cut)?;
    let rot = rotated_symbol(&s0, 1, 0, 1, 0.7)?;
    out.push(("rotated s_0".into(), projection_from_symbol(&rot, Some(&lower(shape1, 11)), opts)?));
    let sum = direct_sum_symbol(&s0, &szego_symbol(1, 1, cut)?)?;
    out.push(("s_0 ⊕ s_1".into(), projection_from_symbol(&sum, Some(&lower(sum.shape, 12)), opts)?));
    let comp = HomogeneousSymbol::unit(shape1).sub(&s0)?;
    out.push(("1 - s_0".into(), projection_from_symbol(&comp, Some(&lower(shape1, 13)), opts)?));
    let s0_2 = szego_symbol(0, 2, 6)?;
    out.push(("s_0, n = 2".into(), projection_from_symbol(&s0_2, Some(&lower(s0_2.shape, 14)), opts)?));
    out.push(("Π₀(∂̄_b;0), n = 2".into(), dbar_kernel_projection(2, 0, 6, 4)?.dbar_kernel));
    out.push(("perturbed Folland-Stein Riesz projection".into(), perturbed_riesz_projection(cut)?));
    Ok(out)
}

/// Realness, adjoint and complement laws of the residue on ten projections.
pub fn projection_realness(params: &SuiteParams) -> Result<Vec<Check>> {
    let projs = sample_projections(params)?;
    let (mut im, mut adj, mut comp, mut idem) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, p) in &projs {
        let r = p.residue();
        im = im.max(r.im.abs());
        adj = adj.max((p.adjoint().residue() - r).norm());
        comp = comp.max((p.complement()?.residue() + r).norm());
        idem = idem.max(p.idempotency_defect);
    }
    let note = format!("{} projections, N = {}", projs.len(), params.hermite_cutoff);
    Ok(vec![
        Check::at_most("|Im Res Π|", im, 1e-8, &note),
        Check::at_most("|Res Π* - Res Π|", adj, 1e-8, &note),
        Check::at_most("|Res(1 - Π) + Res Π|", comp, 1e-8, &note),
        Check::at_most("idempotency defect of the expansions", idem, 1e-8, &note),
    ])
}

/// `ρ_R` over three lower-term seeds, and additivity over a direct sum.
pub fn rho_r_checks(params: &SuiteParams) -> Result<Vec<Check>> {
    let cut = params.hermite_cutoff;
    let seeds = [params.seed, params.seed.wrapping_add(1), params.seed.wrapping_add(2)];
    let p0 = IdempotentPair::new(szego_symbol(0, 1, cut)?, "s_0 on the trivial line bundle")?;
    let p1 = IdempotentPair::new(szego_symbol(1, 1, cut)?, "s_1 on the trivial line bundle")?;
    let sum = p0.direct_sum(&p1)?;
    let r0 = rho_R(&p0, &seeds, LOWER_AMPLITUDE)?;
    let r1 = rho_R(&p1, &seeds, LOWER_AMPLITUDE)?;
    let rs = rho_R(&sum, &seeds, LOWER_AMPLITUDE)?;
    let spread = r0.spread.max(r1.spread).max(rs.spread);
    let additivity = (rs.value - r0.value - r1.value).abs();
    let note = format!("seeds {seeds:?}, N = {cut}");
    Ok(vec![
        Check::at_most("ρ_R seed spread", spread, 1e-6, &note),
        Check::at_most("|ρ_R(π₀ ⊕ π₁) - ρ_R(π₀) - ρ_R(π₁)|", additivity, 1e-6, &note),
    ])
}

/// Transport along a rotating idempotent path and along the Szegő path of a
/// `J` interpolation.
pub fn homotopy_checks(params: &SuiteParams) -> Result<Vec<Check>> {
    let cut = params.hermite_cutoff;
    let shape = SymbolShape::new(1, 1, cut);
    let opts = FromSymbolOptions::default();
    let s0 = szego_symbol(0, 1, cut)?;
    let path = IdempotentSymbolPath::from_fn(33, |t| rotated_symbol(&s0, 1, 0, 1, t * FRAC_PI_2))?;
    let lower0 = lower_terms_for_seed(shape, params.seed, LOWER_AMPLITUDE);
    let lower1 = lower_terms_for_seed(shape, params.seed.wrapping_add(1), LOWER_AMPLITUDE);
    let a = projection_from_symbol(&path.samples[0].1, Some(&lower0), opts)?;
    let b = projection_from_symbol(&path.samples.last().unwrap().1, Some(&lower1), opts)?;
    let rot = transport_involution(&path, &a, &b)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x7);
    let j = standard_j(1);
    let dt = standard_dtheta(1);
    let squeeze = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
    let jp = &squeeze * &j * squeeze.clone().try_inverse().expect("diagonal");
    let jpath = interpolate_j(&j, &jp, &dt, 33, &mut rng)?;
    let jcut = cut.min(24);
    let jshape = SymbolShape::new(1, 1, jcut);
    let samples = jpath
        .parameters
        .par_iter()
        .zip(jpath.samples.par_iter())
        .map(|(&t, jt)| szego_symbol_for_j(0, jt, &dt, jcut).map(|s| (t, s)))
        .collect::<Result<Vec<_>>>()?;
    let count = samples.len();
    let spath = IdempotentSymbolPath::new(samples)?;
    let la = lower_terms_for_seed(jshape, params.seed.wrapping_add(2), LOWER_AMPLITUDE);
    let lb = lower_terms_for_seed(jshape, params.seed.wrapping_add(3), LOWER_AMPLITUDE);
    let ja = projection_from_symbol(&spath.samples[0].1, Some(&la), opts)?;
    let jb = projection_from_symbol(&spath.samples.last().unwrap().1, Some(&lb), opts)?;
    let jrep = transport_involution(&spath, &ja, &jb)?;
    let ends = |r: &crate::projection::TransportReport| {
        let k = r.residues_re.len() - 1;
        Complex64::new(r.residues_re[k] - r.residues_re[0], r.residues_im[k] - r.residues_im[0]).norm()
    };
    let drift = |r: &crate::projection::TransportReport| {
        (0..r.residues_re.len())
            .map(|i| Complex64::new(r.residues_re[i] - r.residues_re[0], r.residues_im[i] - r.residues_im[0]).norm())
            .fold(0.0, f64::max)
    };
    Ok(vec![
        Check::at_most(
            "rotating path: |Res Π_0 - Res Π_1|",
            rot.endpoint_difference,
            1e-6,
            format!("33 samples, Givens rotation of s_0 in levels (0, 1), N = {cut}"),
        ),
        Check::at_most("rotating path: |Res G_1 - Res G_0|", ends(&rot), 1e-6, "transported involutions"),
        Check::at_most(
            "rotating path: max |Res G_t - Res G_0|",
            drift(&rot),
            1e-6,
            format!("along the samples, drift rate {:.2e}", rot.max_drift_rate),
        ),
        Check::at_most(
            "J path: |Res S_0 - Res S_1|",
            jrep.endpoint_difference,
            1e-6,
            format!("{count} samples, J' = D J D⁻¹ with D = diag(2, 1/2), N = {jcut}"),
        ),
        Check::at_most("J path: |Res G_1 - Res G_0|", ends(&jrep), 1e-6, "transported involutions"),
        Check::at_most(
            "J path: max |Res G_t - Res G_0|",
            drift(&jrep),
            1e-6,
            format!("along the samples, drift rate {:.2e}", jrep.max_drift_rate),
        ),
    ])
}

/// Sector operator assembled from a per-sector closure; the abelian sector is zero.
fn sector_operator(model: &NilmanifoldModel, rank: usize, f: impl Fn(i64) -> Result<CMat> + Sync) -> Result<SectorOperator> {
    let per_sector = model
        .sectors()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| {
            if m == 0 {
                let d = model.sector_dim(0, rank);
                Ok(CMat::zeros(d, d))
            } else {
                f(m)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorOperator { per_sector, sector_max: model.sector_max, rank, symbol_tag: None })
}

/// Outcome of the cross-route comparison for one operator.
#[derive(Clone, Debug, Serialize)]
pub struct CrossRoute {
    pub symbolic: f64,
    pub fitted: f64,
    pub fitted_imag: f64,
    pub band: f64,
    /// Comparison scale: `max(|symbolic|, nuclear scale)`.
    pub scale: f64,
}

fn model_for(params: &SuiteParams) -> Result<NilmanifoldModel> {
    build_model(&NilmanifoldConfig {
        period: 2.0 * PI,
        sectors: params.sectors,
        hermite_cutoff: params.hermite_cutoff,
        abelian_grid: 8,
    })
}

/// Nuclear-norm scale `2(2π)^{−(n+1)}(‖p_+‖₁ + ‖p_−‖₁)` of the degree `−(d+2)` component.
fn nuclear_scale(e: &SymbolExpansion) -> f64 {
    match e.shape().and_then(|s| e.component(s.group().critical_degree())) {
        Some(p) => {
            2.0 * (2.0 * PI).powi(-(p.shape.n as i32 + 1))
                * (linalg::nuclear_norm(&p.fiber_plus) + linalg::nuclear_norm(&p.fiber_minus))
        }
        None => 0.0,
    }
}

/// Residue of the perturbed Riesz projection: symbolic, and by a fit of the
/// traces of the exact per-sector Riesz projections of the lifted operator.
pub fn perturbed_projection_cross_route(params: &SuiteParams) -> Result<CrossRoute> {
    let cut = params.hermite_cutoff;
    let p = perturbed_riesz_projection(cut)?;
    let model = model_for(params)?;
    let a = lift(&perturbed_folland_stein(1.0, cut)?, &model)?;
    let proj = sector_operator(&model, 1, |m| {
        let mu = model.mu(m).abs();
        crate::projection::riesz_projection(a.sector(m), c(-0.5 * mu), 0.5 * mu)
    })?;
    let fit = sector_trace_fit(&sector_traces(&proj), model.central_period, 1, 0, &SectorFitConfig::default())?;
    let symbolic = p.residue().re;
    Ok(CrossRoute {
        symbolic,
        fitted: fit.c_re,
        fitted_imag: fit.c_im,
        band: fit.band + BAND_FLOOR,
        scale: symbolic.abs().max(nuclear_scale(&p.expansion)),
    })
}

/// Residue of `(FS(0) + 0.3σ((1/i)X_1))^{−2}`: symbolic, and by a fit of the
/// traces of the exact per-sector inverse squares.
pub fn inverse_square_cross_route(params: &SuiteParams) -> Result<CrossRoute> {
    let cut = params.hermite_cutoff;
    let b = perturbed_folland_stein(0.0, cut)?.with_truncation(-4);
    let binv = inverse_expansion(&b, 3)?.with_truncation(-4);
    let sq = expansion_mul(&binv, &binv)?;
    let model = model_for(params)?;
    let lifted = lift(&perturbed_folland_stein(0.0, cut)?, &model)?;
    let op = sector_operator(&model, 1, |m| {
        let inv = linalg::inverse(lifted.sector(m))?;
        Ok(&inv * &inv)
    })?;
    let fit = sector_trace_fit(&sector_traces(&op), model.central_period, 1, -4, &SectorFitConfig::default())?;
    let symbolic = residue(&sq).re;
    Ok(CrossRoute {
        symbolic,
        fitted: fit.c_re,
        fitted_imag: fit.c_im,
        band: fit.band + BAND_FLOOR,
        scale: symbolic.abs().max(nuclear_scale(&sq)),
    })
}

/// Fitted against symbolic residues within 5% of the comparison scale.
pub fn cross_route_checks(params: &SuiteParams) -> Result<Vec<Check>> {
    let p = perturbed_projection_cross_route(params)?;
    let r = inverse_square_cross_route(params)?;
    let note = |x: &CrossRoute| {
        format!(
            "symbolic {:.6e}, sector fit {:.6e} ± {:.1e}, scale {:.6e}, M = {}, N = {}",
            x.symbolic, x.fitted, x.band, x.scale, params.sectors, params.hermite_cutoff
        )
    };
    Ok(vec![
        Check::at_most(
            "perturbed Riesz projection: |ĉ - c| / scale",
            (p.fitted - p.symbolic).abs() / p.scale,
            0.05,
            note(&p),
        ),
        Check::at_most(
            "inverse square reference: |ĉ - c| / |c|",
            (r.fitted - r.symbolic).abs() / r.symbolic.abs(),
            0.05,
            note(&r),
        ),
    ])
}

/// Kernel of the realization of `s_0` on the quotient and its log fit.
#[derive(Clone, Debug, Serialize)]
pub struct SzegoKernelFit {
    pub fit: LogFit,
    pub symbolic_residue: f64,
    pub sectors: i64,
    pub cutoff: usize,
}

/// Shell radii and unit directions of the kernel fit.
pub fn kernel_offsets() -> Vec<GroupPoint> {
    let dirs = [[0.3, 0.8, 0.8], [-0.25, 1.0, 0.5]];
    let mut out = Vec::new();
    for k in 0..7 {
        let t = 0.07 * 2f64.powf(k as f64 / 2.0);
        for d in &dirs {
            let unit = dilate(1.0 / crate::symbol::anisotropic_norm(d), d).expect("odd dimension");
            out.push(GroupPoint::new(dilate(t, &unit).expect("odd dimension")).expect("odd dimension"));
        }
    }
    out
}

/// Log fit of the kernel of the lifted `s_0` at level `k`.
pub fn szego_kernel_fit(k: usize, params: &SuiteParams) -> Result<SzegoKernelFit> {
    let cut = params.kernel_cutoff;
    let model = build_model(&NilmanifoldConfig {
        period: 2.0 * PI,
        sectors: params.kernel_sectors,
        hermite_cutoff: cut,
        abelian_grid: 8,
    })?;
    let s = szego_symbol(k, 1, cut)?;
    let op = lift(&SymbolExpansion::single(s.clone()), &model)?;
    let offsets = kernel_offsets();
    let values = reconstruct_kernel(&op, &model, &offsets, &KernelOptions::default())?;
    let samples: Vec<KernelSample> =
        offsets.into_iter().zip(values).map(|(offset, value)| KernelSample { offset, value }).collect();
    let spec = HeisenbergGroupSpec::new(1)?;
    let fit = kernel_log_fit(&samples, &FrameMap::identity(spec), &LogFitConfig::default())?;
    Ok(SzegoKernelFit { fit, symbolic_residue: residue(&SymbolExpansion::single(s)).re, sectors: model.sector_max, cutoff: cut })
}

/// Shell decay, null log coefficient and the `c = −2β₀` relation for `s_0`.
pub fn szego_kernel_checks(params: &SuiteParams) -> Result<Vec<Check>> {
    let r = szego_kernel_fit(0, params)?;
    let band = r.fit.band + BAND_FLOOR;
    let note = format!(
        "M = {}, N = {}, {} shells, t in [{:.3}, {:.3}]",
        r.sectors,
        r.cutoff,
        r.fit.shells.len(),
        r.fit.shells.first().map_or(0.0, |s| s.radius),
        r.fit.shells.last().map_or(0.0, |s| s.radius)
    );
    Ok(vec![
        Check::at_most("|slope + 4| / 4", (r.fit.log_slope + 4.0).abs() / 4.0, 0.02, format!("slope {:.6}, {note}", r.fit.log_slope)),
        Check::at_most("|c - Res S_0| (jackknife band)", (r.fit.c() - c(r.symbolic_residue)).norm(), band, format!("c = {:.3e}, {note}", r.fit.c_re)),
        Check::at_most("|c + 2β₀| (jackknife band)", (r.fit.c() + r.fit.beta0() * 2.0).norm(), band, format!("β₀ = {:.3e}", r.fit.beta0_re)),
    ])
}

/// `Y(q)` for strictly pseudoconvex signatures and the `S_{b;1}` gates.
pub fn y_table_checks() -> Result<Vec<Check>> {
    let mut mismatches = 0;
    let mut entries = 0;
    for n in 1..=6usize {
        for q in 0..=n {
            entries += 1;
            if y_condition(q, n, 0, n) != (q != 0 && q != n) {
                mismatches += 1;
            }
        }
    }
    let examples = [
        (y_condition(1, 2, 0, 2), true),
        (y_condition(1, 3, 1, 4), false),
        (y_condition(0, 3, 1, 4), true),
        (y_condition(2, 3, 1, 4), true),
    ];
    let ex_bad = examples.iter().filter(|(a, b)| a != b).count();
    let gate_in = szego_projection_gate(1, 3, 1, 4);
    let gate_out = !szego_projection_gate(1, 1, 0, 1);
    // The constructive route refuses the n = 1 projections exactly where the gate says so.
    let refused = matches!(dbar_kernel_projection(1, 0, 8, 4), Err(Error::YConditionFails { q: 1 }));
    Ok(vec![
        Check::at_most("Y(q) table mismatches, n = 1..6", mismatches as f64, 0.0, format!("{entries} entries")),
        Check::at_most("Y(q) worked examples mismatched", ex_bad as f64, 0.0, "n = 2 (2,0); n = 4 (3,1)"),
        Check::at_most("n = 4, κ = 1 gates S_b;1 in", if gate_in { 0.0 } else { 1.0 }, 0.0, "Y(0) and Y(2) hold"),
        Check::at_most("n = 1 strictly pseudoconvex gates S_b;1 out", if gate_out { 0.0 } else { 1.0 }, 0.0, "Y(0) fails"),
        Check::at_most("∂̄ projection refused at n = 1, q = 0", if refused { 0.0 } else { 1.0 }, 0.0, "YConditionFails(1)"),
    ])
}

/// The Rumin complex on a quotient with its structural report and kernel projections.
pub struct RuminRun {
    pub report: ComplexReport,
    pub projections: RuminProjections,
}

pub fn rumin_run(model: &NilmanifoldModel) -> Result<RuminRun> {
    let ops = rumin_build(model)?;
    Ok(RuminRun { report: complex_report(&ops)?, projections: rumin_projections(&ops)? })
}

/// Exactness, Laplacian invertibility, kernel projections and duality of a computed complex.
pub fn rumin_checks_for(run: &RuminRun, note: &str) -> Vec<Check> {
    let rep = &run.report;
    let mut out = vec![
        Check::at_most("‖D_R1 d_R0‖ (relative)", rep.dd_d0, 1e-12, note),
        Check::at_most("‖d_R1 D_R1‖ (relative)", rep.d1_dd, 1e-12, note),
    ];
    for (name, v) in ["Δ_R0", "Δ_R11", "Δ_R12", "Δ_R2"].iter().zip(rep.min_scaled_singular_values) {
        out.push(Check::above(format!("{name}: min scaled eigenvalue on nonzero sectors"), v, 1e-6, note));
    }
    for p in run.projections.all() {
        out.push(Check::at_most(format!("{}: idempotency defect", p.name), p.idempotency_defect, 1e-9, note));
    }
    for (name, v) in run.projections.duality() {
        match v {
            Some((sum, band)) => {
                out.push(Check::at_most(
                    format!("{name}: |Res Π₀(d*) + Res Π₀(d)| (fit band)"),
                    sum,
                    band + 2.0 * BAND_FLOOR,
                    "sector-trace fits",
                ));
            }
            None => out.push(Check::at_most(format!("{name}: duality"), f64::INFINITY, 0.0, "sector fit failed")),
        }
    }
    out
}

/// Rumin complex: exactness, Laplacian invertibility, kernel projections and duality.
pub fn rumin_checks(params: &SuiteParams) -> Result<Vec<Check>> {
    let run = rumin_run(&model_for(params)?)?;
    Ok(rumin_checks_for(&run, &format!("M = {}, N = {}", params.sectors, params.hermite_cutoff)))
}

/// Residues reported at one resolution, each with its band.
fn reported_residues(params: &SuiteParams) -> Result<Vec<(String, f64, f64)>> {
    let mut out = Vec::new();
    let seeds = [params.seed, params.seed.wrapping_add(1), params.seed.wrapping_add(2)];
    for k in 0..2 {
        let pair = IdempotentPair::new(szego_symbol(k, 1, params.hermite_cutoff)?, "trivial line bundle")?;
        let r = rho_R(&pair, &seeds, LOWER_AMPLITUDE)?;
        out.push((format!("Res S_{k}"), r.value, r.tolerance.max(r.spread)));
    }
    for (name, p) in sample_projections(params)? {
        out.push((format!("Res {name}"), p.residue().re, 1e-8));
    }
    let x = perturbed_projection_cross_route(params)?;
    out.push(("perturbed Riesz projection, sector fit".into(), x.fitted, x.band));
    let model = model_for(params)?;
    let projs = rumin_projections(&rumin_build(&model)?)?;
    for p in projs.all() {
        if let Some(f) = &p.fit {
            out.push((format!("Res {}, sector fit", p.name), f.c_re, f.band + BAND_FLOOR));
        }
    }
    Ok(out)
}

/// Doubling the Hermite cutoff and the sector count moves each reported
/// residue by less than its band.
pub fn cutoff_stability(params: &SuiteParams) -> Result<Vec<Check>> {
    let fine = SuiteParams { hermite_cutoff: 2 * params.hermite_cutoff, sectors: 2 * params.sectors, ..*params };
    let a = reported_residues(params)?;
    let b = reported_residues(&fine)?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("reported residues differ between resolutions".into()));
    }
    Ok(a
        .into_iter()
        .zip(b)
        .map(|((name, x, band), (_, y, band2))| {
            Check::at_most(
                format!("{name}: change under doubling"),
                (x - y).abs(),
                band.max(band2),
                format!("(N, M) = ({}, {}) → ({}, {})", params.hermite_cutoff, params.sectors, fine.hermite_cutoff, fine.sectors),
            )
        })
        .collect())
}

/// Named suites of `hcalc verify`.
pub const SUITES: [&str; 6] = ["algebra", "residue", "projections", "geometry", "rumin", "all"];

/// Runs a named suite; each entry pairs a section title with its checks.
pub fn run_suite(name: &str, params: &SuiteParams) -> Result<Vec<(String, Vec<Check>)>> {
    let mut out: Vec<(String, Vec<Check>)> = Vec::new();
    let mut add = |title: &str, checks: Result<Vec<Check>>| -> Result<()> {
        out.push((title.to_string(), checks?));
        Ok(())
    };
    let all = name == "all";
    match name {
        "algebra" | "residue" | "projections" | "geometry" | "rumin" | "all" => {}
        other => return Err(Error::InvalidArgument(format!("unknown suite '{other}'"))),
    }
    if all || name == "algebra" {
        add("group algebra", group_algebra(params))?;
    }
    if all || name == "residue" {
        add("trace property", trace_property(params))?;
        add("vanishing laws", vanishing_laws(params))?;
        add("cross-route residues", cross_route_checks(params))?;
    }
    if all || name == "projections" {
        add("projection realness", projection_realness(params))?;
        add("rho_R", rho_r_checks(params))?;
        add("homotopy invariance", homotopy_checks(params))?;
    }
    if all || name == "geometry" {
        add("Folland-Stein scan", folland_stein_scan(params))?;
        add("Szegő kernel", szego_kernel_checks(params))?;
        add("Y(q) table", y_table_checks())?;
    }
    if all || name == "rumin" {
        add("Rumin complex", rumin_checks(params))?;
    }
    if all {
        add("cutoff stability", cutoff_stability(params))?;
    }
    Ok(out)
}
