//! Strategic lp-norm linear regression.
//!
//! Agents supply `(x_i, y_i)` training points to a regression that minimizes the
//! sum of p-th powers of absolute residuals plus a convex regularizer (p > 1).
//! Because such a fit is not strategyproof, agents who care about their own
//! fitted value may misreport `y_i`, inducing a game. This crate fits the
//! regression, computes best responses, finds the (unique-outcome) pure Nash
//! equilibria of that game, and measures the resulting price of anarchy.
//!
//! Module map:
//!
//! - [`regression`] — the (p,R) loss, its gradient, the Newton solver, OLS and
//!   the hat matrix;
//! - [`game`] — best responses, best-response dynamics, equilibrium checks and
//!   search, and the induced strategyproof mechanism;
//! - [`facility`] — the one-dimensional closed form: phantom values and
//!   generalized medians;
//! - [`linmap`] — games induced by an arbitrary linear report-to-outcome map;
//! - [`experiments`] — synthetic data, CSV ingestion, PPoA metrics, and
//!   parameter sweeps (`f64` only);
//! - [`linalg`] — the small dense kernels (pivoted QR, Cholesky) the rest is
//!   built on.
//!
//! Core math is generic over the scalar type via [`scalar::Scalar`]
//! (any `num_traits::Float`, in practice `f32` or `f64`); the aliases below fix
//! `f64` for everyday use.

pub mod error;
pub mod experiments;
pub mod facility;
pub mod game;
pub mod linalg;
pub mod linmap;
pub mod regression;
pub mod scalar;

pub use error::{Error, Result};

/// `f64` instantiations of the core types.
pub type Matrix64 = linalg::Matrix<f64>;
pub type Dataset64 = regression::Dataset<f64>;
pub type RegressionConfig64 = regression::RegressionConfig<f64>;
pub type Hyperplane64 = regression::Hyperplane<f64>;
pub type GameInstance64 = game::GameInstance<f64>;
pub type ReportProfile64 = game::ReportProfile<f64>;
pub type EquilibriumResult64 = game::EquilibriumResult<f64>;
pub type FacilityInstance64 = facility::FacilityInstance<f64>;
pub type LinearMapGame64 = linmap::LinearMapGame<f64>;
