//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure or failed check, 2 usage error,
//! 3 gate failure (`Y(q)` does not hold).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::geometry::{dbar_kernel_projection, szego_symbol};
use crate::group::{szego_projection_gate, y_condition, FrameMap, GroupPoint, HeisenbergGroupSpec};
use crate::nilmanifold::build_model;
use crate::projection::ProjectionOperator;
use crate::quadrature::EquatorRule;
use crate::report::{ComplexValue, Cutoffs, ProjectionReport, Quantity, Report};
use crate::residue::{kernel_log_fit, residue, residue_density, rho_R, szego_L, IdempotentPair, KernelSample};
use crate::serialize::load_expansion;
use crate::suites::{
    perturbed_folland_stein, perturbed_riesz_projection, rumin_checks_for, rumin_run,
    run_suite, szego_kernel_fit, Check, BAND_FLOOR, SUITES,
};
use crate::symbol::{expansion_mul, inverse_expansion, SymbolExpansion};
use crate::{Error, Result};

/// Relative tolerance between the fiber-trace and quadrature residue routes.
pub const CROSS_ROUTE_TOL: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "hcalc", version, about = "Heisenberg symbol calculus and noncommutative residues")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "INT")]
    pub hermite_cutoff: Option<usize>,
    /// Sector count M of the quotient.
    #[arg(long, global = true, value_name = "INT")]
    pub sectors: Option<i64>,
    /// Directory receiving the JSON reports and density CSVs.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Symbolic,
    KernelFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Example {
    /// `(FS(0) + 0.3σ((1/i)X_1))^{-2}` on `H^3`.
    InverseSquare,
    /// Riesz projection of the perturbed Folland–Stein operator.
    PerturbedProjection,
    /// The level-0 Szegő symbol, a single degree-0 component.
    Szego,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a property suite: algebra, residue, projections, geometry, rumin or all.
    Verify { suite: String },
    /// Residue of the level-k Szegő projection and L = -Res/2.
    Szego {
        n: usize,
        k: usize,
        #[arg(long, value_enum, default_value = "symbolic")]
        route: Route,
    },
    /// Kernel projections of dbar_b on (0,q)-forms, gated by Y(q±1).
    Kohn {
        n: usize,
        q: usize,
        /// Positive Levi eigenvalue count; defaults to n.
        #[arg(long)]
        kappa_plus: Option<usize>,
        #[arg(long, default_value_t = 0)]
        kappa_minus: usize,
    },
    /// Rumin complex on the quotient: exactness, idempotency and duality.
    Rumin,
    /// Residue of a stored expansion or a built-in example, with its density CSV.
    Residue {
        /// Expansion manifest written by `serialize::save_expansion`.
        #[arg(long, value_name = "PATH", conflicts_with = "example")]
        symbol: Option<PathBuf>,
        #[arg(long, value_enum)]
        example: Option<Example>,
    },
    /// Kernel log fit of samples `x0, x1, ..., re, im` read from CSV.
    Fit {
        #[arg(long, value_name = "PATH")]
        samples: PathBuf,
    },
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::YConditionFails { .. } => 3,
        Error::InvalidArgument(_)
        | Error::DimensionMismatch(_)
        | Error::TooFewShells { .. }
        | Error::Underdetermined(_)
        | Error::UnsupportedDimension { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Merges the configuration file with the global flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.hermite_cutoff {
        cfg.hermite_cutoff = n;
    }
    if let Some(m) = cli.sectors {
        cfg.sector_m = m;
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn new_report(command: &str, method: &str, cfg: &RunConfig) -> Report {
    let mut r = Report::new(
        command,
        method,
        cfg.seed,
        Cutoffs { hermite_cutoff: cfg.hermite_cutoff, sectors: cfg.sector_m },
    );
    r.tolerance("residue", cfg.tolerances.residue)
        .tolerance("seed_spread", cfg.tolerances.seed_spread)
        .tolerance("idempotency", cfg.tolerances.idempotency)
        .tolerance("exactness", cfg.tolerances.exactness);
    r
}

fn projection_report(p: &ProjectionOperator, method: &str, cfg: &RunConfig) -> ProjectionReport {
    let mut tolerances = BTreeMap::new();
    tolerances.insert("residue".to_string(), cfg.tolerances.residue);
    tolerances.insert("idempotency".to_string(), cfg.tolerances.idempotency);
    ProjectionReport {
        residue: ComplexValue::from(p.residue()),
        idempotency_defect: p.idempotency_defect,
        method: method.to_string(),
        tolerances,
    }
}

fn lower_term_seeds(seed: u64) -> [u64; 3] {
    [seed, seed.wrapping_add(1), seed.wrapping_add(2)]
}

pub fn cmd_verify(suite: &str, cfg: &RunConfig) -> Result<Report> {
    if !SUITES.contains(&suite) {
        return Err(Error::InvalidArgument(format!("unknown suite '{suite}', expected one of {SUITES:?}")));
    }
    let mut r = new_report("verify", suite, cfg);
    for (section, checks) in run_suite(suite, &cfg.suite_params())? {
        r.add_checks(&section, checks);
    }
    r.note(format!("kernel fits use M = {}, N = {}", cfg.szego.kernel_sectors, cfg.szego.kernel_cutoff));
    Ok(r)
}

pub fn cmd_szego(n: usize, k: usize, route: Route, cfg: &RunConfig) -> Result<Report> {
    let method = match route {
        Route::Symbolic => "symbolic: residue of the degree -(d+2) component of projections realizing s_k",
        Route::KernelFit => "kernel-fit: log fit of the kernel of s_k realized on the quotient of H^3",
    };
    let mut r = new_report("szego", method, cfg);
    let s = szego_symbol(k, n, cfg.hermite_cutoff)?;
    let pure = residue(&SymbolExpansion::single(s.clone()));
    let pair = IdempotentPair::new(s, "trivial line bundle")?;
    let rho = rho_R(&pair, &lower_term_seeds(cfg.seed), cfg.szego.lower_amplitude)?;
    let tol = cfg.tolerances.residue;
    r.quantity("pure_homogeneous_residue", Quantity::with_tolerance(pure.re, tol))
        .quantity("seed_spread", Quantity::with_tolerance(rho.spread, cfg.tolerances.seed_spread));
    let spread_check = Check::at_most(
        "seed spread of Res S_k over 3 lower-term seeds",
        rho.spread,
        cfg.tolerances.seed_spread,
        format!("seeds {:?}, amplitude {}", rho.seeds, cfg.szego.lower_amplitude),
    );
    match route {
        Route::Symbolic => {
            let band = tol.max(rho.tolerance);
            r.quantity("residue", Quantity::with_tolerance(rho.value, band))
                .quantity("L", Quantity::with_tolerance(szego_L(rho.value), band / 2.0));
            r.add_checks("szego", vec![spread_check]);
        }
        Route::KernelFit => {
            if n != 1 {
                return Err(Error::UnsupportedDimension { n });
            }
            let params = cfg.suite_params();
            let fit = szego_kernel_fit(k, &params)?;
            let band = fit.fit.band + BAND_FLOOR;
            r.quantity("residue", Quantity::with_band(fit.fit.c_re, band))
                .quantity("residue_imag", Quantity::with_band(fit.fit.c_im, band))
                .quantity("L", Quantity::with_band(szego_L(fit.fit.c_re), band / 2.0))
                .quantity("log_slope", Quantity::with_tolerance(fit.fit.log_slope, 0.08))
                .quantity("beta0", Quantity::with_band(fit.fit.beta0_re, band))
                .quantity("symbolic_residue", Quantity::with_tolerance(fit.symbolic_residue, tol));
            r.cutoffs = Cutoffs { hermite_cutoff: fit.cutoff, sectors: fit.sectors };
            r.add_checks(
                "szego",
                vec![
                    spread_check,
                    Check::at_most(
                        "|c - Res S_k| (jackknife band)",
                        (fit.fit.c_re - fit.symbolic_residue).abs(),
                        band,
                        format!("{} shells", fit.fit.shells.len()),
                    ),
                ],
            );
        }
    }
    r.note("L = -Res/2");
    Ok(r)
}

pub fn cmd_kohn(n: usize, q: usize, kappa_plus: Option<usize>, kappa_minus: usize, cfg: &RunConfig) -> Result<Report> {
    let kp = kappa_plus.unwrap_or(n - kappa_minus.min(n));
    if kp + kappa_minus != n || q > n {
        return Err(Error::InvalidArgument(format!(
            "signature ({kp}, {kappa_minus}) and degree {q} do not fit n = {n}"
        )));
    }
    let mut r = new_report("kohn", "constructive: 1 - dbar* N dbar with the Kohn Laplacian inverted fiberwise", cfg);
    let gate = szego_projection_gate(q, kp, kappa_minus, n);
    for p in [q.checked_sub(1), Some(q), (q < n).then_some(q + 1)].into_iter().flatten() {
        let y = y_condition(p, kp, kappa_minus, n);
        r.quantity(&format!("Y({p})"), Quantity::with_tolerance(if y { 1.0 } else { 0.0 }, 0.0));
    }
    if !gate {
        let failing = if q < n && !y_condition(q + 1, kp, kappa_minus, n) { q + 1 } else { q.saturating_sub(1) };
        return Err(Error::YConditionFails { q: failing });
    }
    if kappa_minus != 0 {
        r.note("gate holds; the constructive projections are built for the strictly pseudoconvex model signature only");
        return Ok(r);
    }
    let d = dbar_kernel_projection(n, q, cfg.hermite_cutoff, 4)?;
    r.projections.insert("ker dbar_b".into(), projection_report(&d.dbar_kernel, "constructive", cfg));
    if let Some(p) = &d.dbar_star_kernel {
        r.projections.insert("ker dbar_b*".into(), projection_report(p, "constructive", cfg));
    }
    if let Some(p) = &d.szego {
        r.projections.insert("S_b;q".into(), projection_report(p, "constructive", cfg));
    }
    let mut checks = Vec::new();
    for (name, p) in &r.projections {
        checks.push(Check::at_most(format!("{name}: idempotency defect"), p.idempotency_defect, cfg.tolerances.idempotency, ""));
    }
    if let Some(defect) = d.szego_relation_defect {
        checks.push(Check::at_most(
            "S_b;q against the Riesz kernel projection of the Kohn Laplacian",
            defect,
            1e-8,
            "both fibers, resolved block",
        ));
    }
    r.add_checks("kohn", checks);
    Ok(r)
}

pub fn cmd_rumin(cfg: &RunConfig) -> Result<Report> {
    let model = build_model(&cfg.model_config())?;
    let run = rumin_run(&model)?;
    let mut r = new_report("rumin", "per-sector Rumin complex; kernel projections by SVD rank; sector-trace fits", cfg);
    for p in run.projections.all() {
        r.quantity(
            &format!("{}: idempotency_defect", p.name),
            Quantity::with_tolerance(p.idempotency_defect, cfg.tolerances.idempotency),
        );
        if let Some(f) = &p.fit {
            r.quantity(&format!("{}: residue", p.name), Quantity::with_band(f.c_re, f.band + BAND_FLOOR));
        }
    }
    let pairs = [
        (&run.projections.d0, &run.projections.d0_star),
        (&run.projections.dd, &run.projections.dd_star),
        (&run.projections.d1, &run.projections.d1_star),
    ];
    for (a, b) in pairs {
        if let (Some(fa), Some(fb)) = (&a.fit, &b.fit) {
            let band = fa.band + fb.band + 2.0 * BAND_FLOOR;
            let opposite = fa.c_re * fb.c_re <= 0.0 || (fa.c_re + fb.c_re).abs() <= band;
            r.note(format!(
                "{} vs {}: residues {:.6e} and {:.6e} are {}",
                a.name,
                b.name,
                fa.c_re,
                fb.c_re,
                if opposite { "opposite within the band" } else { "not opposite" }
            ));
        }
    }
    let note = format!("M = {}, N = {}", cfg.sector_m, cfg.hermite_cutoff);
    r.add_checks("rumin", rumin_checks_for(&run, &note));
    Ok(r)
}

fn builtin_expansion(example: Example, cutoff: usize) -> Result<SymbolExpansion> {
    match example {
        Example::InverseSquare => {
            let b = perturbed_folland_stein(0.0, cutoff)?.with_truncation(-4);
            let binv = inverse_expansion(&b, 3)?.with_truncation(-4);
            expansion_mul(&binv, &binv)
        }
        Example::PerturbedProjection => Ok(perturbed_riesz_projection(cutoff)?.expansion),
        Example::Szego => Ok(SymbolExpansion::single(szego_symbol(0, 1, cutoff)?)),
    }
}

pub fn cmd_residue(symbol: Option<&Path>, example: Option<Example>, cfg: &RunConfig) -> Result<Report> {
    let (expansion, source) = match symbol {
        Some(path) => (load_expansion(path)?, path.display().to_string()),
        None => {
            let ex = example.unwrap_or(Example::InverseSquare);
            let name = ex.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            (builtin_expansion(ex, cfg.hermite_cutoff)?, format!("built-in example {name}"))
        }
    };
    let shape = expansion.shape().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
    let critical = shape.group().critical_degree();
    let mut r = new_report("residue", "symbolic fiber traces; sphere quadrature density", cfg);
    r.note(format!("source: {source}"));
    let symbolic = residue(&expansion);
    let tol = cfg.tolerances.residue;
    r.quantity("residue_symbolic", Quantity::with_tolerance(symbolic.re, tol))
        .quantity("residue_symbolic_imag", Quantity::with_tolerance(symbolic.im, tol));
    if expansion.component(critical).is_none() {
        r.note(format!("no degree {critical} component: the residue is 0"));
        return Ok(r);
    }
    let mut spec = cfg.quadrature_spec();
    if expansion.component(critical).is_some_and(|p| p.abelian.is_none()) {
        spec.equator_rule = EquatorRule::FiberContinuation;
        r.note("the critical component carries no abelian trace: the equator band is evaluated by fiber continuation");
    }
    let density = residue_density(&expansion, &spec)?;
    let total = density.total();
    let band = density.refinement_change.unwrap_or(0.0) * density.scale + tol;
    r.quantity("residue_quadrature", Quantity::with_band(total.re, band))
        .quantity("residue_quadrature_imag", Quantity::with_band(total.im, band));
    std::fs::create_dir_all(&cfg.output_dir)?;
    let csv = cfg.output_dir.join("residue_density.csv");
    density.write_csv(&csv)?;
    r.note("density written to residue_density.csv in the output directory");
    // Relative to the integrand size, as the refinement check is.
    let scale = symbolic.norm().max(density.scale);
    r.add_checks(
        "residue",
        vec![Check::at_most(
            "|quadrature - symbolic|",
            (total - symbolic).norm(),
            CROSS_ROUTE_TOL * scale + band,
            format!(
                "tolerance {CROSS_ROUTE_TOL} relative to the integrand size plus the quadrature band; \
                 the quadrature reads the truncated fibers through their Weyl reconstruction"
            ),
        )],
    );
    Ok(r)
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x0: f64,
    x1: f64,
    x2: f64,
    re: f64,
    im: f64,
}

/// Reads kernel samples with header `x0,x1,x2,re,im`.
pub fn read_samples(path: &Path) -> Result<Vec<KernelSample>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: SampleRow = row?;
        out.push(KernelSample {
            offset: GroupPoint::new(vec![row.x0, row.x1, row.x2])?,
            value: crate::C64::new(row.re, row.im),
        });
    }
    Ok(out)
}

pub fn cmd_fit(samples: &Path, cfg: &RunConfig) -> Result<Report> {
    let data = read_samples(samples)?;
    let fit = kernel_log_fit(&data, &FrameMap::identity(HeisenbergGroupSpec::new(1)?), &cfg.log_fit_config())?;
    let mut r = new_report("fit", fit.method, cfg);
    let band = fit.band + BAND_FLOOR;
    r.quantity("c", Quantity::with_band(fit.c_re, band))
        .quantity("c_imag", Quantity::with_band(fit.c_im, band))
        .quantity("beta0", Quantity::with_band(fit.beta0_re, band))
        .quantity("log_slope", Quantity::with_band(fit.log_slope, 0.08))
        .quantity("shells", Quantity::with_tolerance(fit.shells.len() as f64, 0.0));
    r.note(format!("{} samples; residuals monotone: {}", data.len(), fit.residual_monotone));
    Ok(r)
}

/// Runs a parsed command and returns the report and its verdict.
pub fn execute(cli: &Cli) -> Result<Report> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Verify { suite } => cmd_verify(suite, &cfg),
        Command::Szego { n, k, route } => cmd_szego(*n, *k, *route, &cfg),
        Command::Kohn { n, q, kappa_plus, kappa_minus } => cmd_kohn(*n, *q, *kappa_plus, *kappa_minus, &cfg),
        Command::Rumin => cmd_rumin(&cfg),
        Command::Residue { symbol, example } => cmd_residue(symbol.as_deref(), *example, &cfg),
        Command::Fit { samples } => cmd_fit(samples, &cfg),
    }
}

fn output_dir(cli: &Cli) -> PathBuf {
    match &cli.out {
        Some(d) => d.clone(),
        None => cli
            .config
            .as_deref()
            .and_then(|p| RunConfig::load(p).ok())
            .map(|c| c.output_dir)
            .unwrap_or_else(|| RunConfig::default().output_dir),
    }
}

/// Parses arguments, runs the command, writes the report and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hcalc: {e}");
            return exit_code(&e);
        }
    };
    let written = report.to_json().and_then(|text| {
        println!("{text}");
        report.write(&output_dir(&cli))
    });
    if let Err(e) = written {
        eprintln!("hcalc: {e}");
        return 1;
    }
    if report.passed == Some(false) {
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hcalc").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_override_the_config() {
        let cli = parse(&["--seed", "5", "--hermite-cutoff", "12", "--sectors", "20", "--out", "x", "rumin"]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.hermite_cutoff, cfg.sector_m), (5, 12, 20));
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(exit_code(&Error::YConditionFails { q: 1 }), 3);
        assert_eq!(exit_code(&Error::TooFewShells { found: 3 }), 2);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
        assert_eq!(exit_code(&Error::QuadratureUnstable { coarse: 0.0, fine: 1.0 }), 1);
        assert_eq!(exit_code(&Error::ContourHitsSpectrum { distance: 0.0, sector: None }), 1);
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let e = cmd_verify("unknown", &RunConfig::default()).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn residue_without_critical_component_is_zero() {
        let cfg = RunConfig { hermite_cutoff: 8, ..RunConfig::default() };
        let r = cmd_residue(None, Some(Example::Szego), &cfg).unwrap();
        assert_eq!(r.quantities["residue_symbolic"].value, 0.0);
        assert!(r.quantities["residue_symbolic"].tolerance.is_some());
    }

    #[test]
    fn kohn_gate_failure_maps_to_three() {
        let cfg = RunConfig { hermite_cutoff: 8, ..RunConfig::default() };
        let e = cmd_kohn(1, 0, None, 0, &cfg).unwrap_err();
        assert!(matches!(e, Error::YConditionFails { q: 1 }));
        assert_eq!(exit_code(&e), 3);
        let r = cmd_kohn(4, 1, Some(3), 1, &cfg).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("gate holds")));
    }

    #[test]
    fn symbolic_szego_residue_vanishes_at_level_zero() {
        let cfg = RunConfig { hermite_cutoff: 12, ..RunConfig::default() };
        let r = cmd_szego(1, 0, Route::Symbolic, &cfg).unwrap();
        assert!(r.quantities["residue"].value.abs() <= 1e-8);
        assert!(r.quantities["seed_spread"].value <= 1e-6);
        assert_eq!(r.passed, Some(true));
    }
}
