//! Simulation and verification toolkit for moderate deviations of empirical
//! autocovariances in near-unit-root AR(1) models.
//!
//! The crate simulates stationary AR(1) paths `X_k = theta X_{k-1} + xi_k`
//! with `theta` close to one, computes empirical autocovariances and the
//! least-squares / Yule-Walker estimators of `theta`, and checks the
//! moderate-deviations band `P(scaled deviation >= r) ~ exp(-b_n^2 I(r))`
//! against closed-form rate functions along admissible growth schedules of
//! `(n, theta_n, b_n, m_n)`.
//!
//! The analytical layer is organized around a martingale-plus-boundary
//! decomposition of the covariance error and an m-dependent approximation of
//! its increments. Every closed-form moment used by the large-deviation
//! bookkeeping is backed by an exhaustive enumeration oracle over finitely
//! supported noise laws, so formula and implementation errors cannot hide
//! behind Monte Carlo noise.

pub mod ar1;
pub mod blocking;
pub mod error;
pub mod estimators;
pub mod mdp;
pub mod montecarlo;
pub mod noise;
pub mod streams;
pub mod umoments;

pub use error::{Error, Result};
