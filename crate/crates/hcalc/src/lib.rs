//! Heisenberg pseudodifferential symbol calculus.
//!
//! The crate models left-invariant operators on the Heisenberg group
//! `H^{2n+1}` through their group Fourier transforms. A homogeneous symbol of
//! degree `m` is stored as two matrices, the fibers at `xi_0 = +1` and
//! `xi_0 = -1`, acting on a truncated Hermite basis. Composition of symbols is
//! matrix composition, and the noncommutative residue of an expansion is read
//! off its degree `-(d+2)` component.
//!
//! Modules:
//! - [`group`]: group law, dilations, left-invariant frame, Levi forms, `Y(q)`.
//! - [`symbol`]: homogeneous symbols, expansions, products, inversion, scalar evaluation.
//! - [`projection`]: Riesz projections, orthogonalization, projections from symbols, homotopy transport.
//! - [`residue`]: residue densities, sphere quadrature, kernel log fits, `rho_R`.
//! - [`geometry`]: Folland–Stein operators, `dbar_b`, Kohn Laplacians, Szegő symbols, `J` interpolation, Rumin complex.
//! - [`nilmanifold`]: sector-decomposed compact quotient of `H^3`, lifts, kernel reconstruction, grid oracle.
//! - [`report`], [`config`], [`cli`]: reports, run configuration and the command-line front end.

pub mod cli;
pub mod config;
pub mod geometry;
pub mod group;
pub mod hermite;
pub mod linalg;
pub mod nilmanifold;
pub mod projection;
pub mod quadrature;
pub mod report;
pub mod residue;
pub mod serialize;
pub mod suites;
pub mod symbol;

use thiserror::Error;

/// Errors raised by the calculus.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Levi form eigenvalue {eigenvalue:e} lies in the degenerate band")]
    DegenerateLeviForm { eigenvalue: f64 },
    #[error("eigenvalue within {distance:e} of the contour (sector {sector:?})")]
    ContourHitsSpectrum { distance: f64, sector: Option<i64> },
    #[error("fiber at xi_0 = {sign:+} not invertible: min singular value {min_singular_value:e}")]
    NotInvertible { sign: i8, min_singular_value: f64 },
    #[error("point lies in the equator band and the symbol carries no abelian trace")]
    EquatorUnresolved,
    #[error("quadrature refinement changed the value from {coarse:e} to {fine:e}")]
    QuadratureUnstable { coarse: f64, fine: f64 },
    #[error("log fit needs at least 4 shells, found {found}")]
    TooFewShells { found: usize },
    #[error("log fit is underdetermined: {0}")]
    Underdetermined(String),
    #[error("fit residuals are not monotone in shell radius: {0}")]
    NonMonotoneResidual(String),
    #[error("spectral gap {gap:e} around +-1 is too small")]
    GapTooSmall { gap: f64 },
    #[error("path endpoints do not match the projections: defect {defect:e}")]
    EndpointMismatch { defect: f64 },
    #[error("idempotency defect {defect:e} exceeds tolerance")]
    IdempotencyDefect { defect: f64 },
    #[error("ranges differ: max principal angle {max_angle:e}")]
    RangesDiffer { max_angle: f64 },
    #[error("Y({q}) fails for the model signature")]
    YConditionFails { q: usize },
    #[error("unsupported CR dimension n = {n}")]
    UnsupportedDimension { n: usize },
    #[error("sector sum tail {tail:e} is too large relative to {total:e}")]
    TailNotConverged { tail: f64, total: f64 },
    #[error("mesh too coarse: boundary energy fraction {fraction:e}")]
    MeshTooCoarse { fraction: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use num_complex::Complex64 as C64;
