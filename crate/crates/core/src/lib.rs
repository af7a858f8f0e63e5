//! Prime-polynomial counting in intersections of arithmetic progressions and
//! short intervals over F_q[T].
//!
//! The crate builds up, layer by layer:
//!
//! - [`field`]: finite fields F_q with q = p^r up to 2^20, with exact
//!   element arithmetic;
//! - [`polyring`]: polynomials over those fields — division, factorization,
//!   the von Mangoldt function Λ, Möbius, Euler φ, the coefficient-reversal
//!   involution, and budgeted enumeration;
//! - [`unitgroup`]: the unit group (F_q[T]/Q)^× with a full discrete-log
//!   table over an explicit abelian basis;
//! - [`characters`]: Dirichlet characters modulo Q with exact rational
//!   phases, parity/primitivity classification, and census formulas;
//! - [`numerics`]: root finding, Hermitian eigensolving, least squares, and
//!   compensated summation used by the floating-point layers;
//! - [`lfunctions`]: Dirichlet L-polynomials, their completions, Frobenius
//!   spectra on the unit circle, and the explicit formula linking character
//!   sums to traces;
//! - [`variance`]: the counting functions Ψ and ν, the exact mean, three
//!   independent variance routes (direct, mean-centered, spectral), the dual
//!   congruence transfer, main-term reports, and the hybrid equidistribution
//!   scan.
//!
//! Heavy sweeps are data-parallel with deterministic chunked accumulation,
//! so every public computation is byte-reproducible for a fixed input.

pub mod characters;
pub mod error;
pub mod field;
pub mod genlfunc;
pub mod lfunctions;
pub mod numerics;
pub mod polyring;
pub mod unitgroup;
pub mod variance;

pub use error::{Error, Result};

/// Crate version, embedded in serialized reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
