//! Numerical and exact kernels for non-commutative Hodge structures of
//! exponential type: the quantum connection of complex projective spaces and
//! its flat sections, Gamma-class rational structures, Stokes filtrations and
//! Betti gluing data, and finite-dimensional Batalin-Vilkovisky degeneration
//! machinery.

pub mod betti;
pub mod bv;
pub mod char_class;
pub mod constants;
pub mod error;
pub mod matrix;
pub mod quantum;
pub mod series;
pub mod stokes;
pub mod transport;
pub mod wire;

pub use error::{Error, Result};
pub use matrix::{matrix_exp_poly, ComplexMatrix, ExpKind};
pub use series::{LaurentSeries, TruncatedSeries, Var};

/// Library-wide default relative tolerance for numerical comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;
