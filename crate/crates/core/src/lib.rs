//! Numerical laboratory for the compactness of resolvents of singular
//! Sturm–Liouville operators `-y'' + q y` on the half-line with complex `q`.
//!
//! The crate is organized by experiment:
//!
//! * [`potential`]: piecewise complex potentials, exact and adaptive integration;
//! * [`conditions`]: window profiles (Molchanov-type conditions), sector
//!   classification and the smooth-sector hypothesis checker;
//! * [`discretize`]: finite-difference matrices of `-y'' + q y` on `[0, X]`;
//! * [`spectra`]: eigenvalues, singular values, resolvents, the Weyl product
//!   inequality and a domain-growth compactness diagnostic;
//! * [`counterexample`]: the purely imaginary Rademacher-step potential and its
//!   witness functions;
//! * [`cauchy`]: order-`n` fundamental systems, the Cauchy (Volterra) operator
//!   and the uniform-residual bump experiment.
//!
//! Everything is generic over the real scalar type through [`Real`]; the
//! `*64` aliases below fix it to `f64`.

// `!(x > 0)` guards deliberately reject NaN; generic literals carry full digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cauchy;
pub mod conditions;
pub mod counterexample;
pub mod discretize;
mod error;
pub mod linalg;
pub mod potential;
pub mod quadrature;
mod scalar;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::{cplx, lit, Real};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Complex64 = Complex<f64>;
pub type Potential64 = potential::Potential<f64>;
pub type OperatorMatrix64 = discretize::OperatorMatrix<f64>;
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;
pub type WindowProfile64 = conditions::WindowProfile<f64>;
pub type SpectralReport64 = spectra::SpectralReport<f64>;
pub type CoefficientSet64 = cauchy::CoefficientSet<f64>;
pub type FundamentalSystem64 = cauchy::FundamentalSystem<f64>;
