//! Uncertainty attribution for split-conformal prediction intervals.
//!
//! This crate is `no_std` (it needs `alloc`) and holds the numerical parts:
//!
//! - [`coalition`], [`game`], [`harsanyi`], [`allocation`], [`order`],
//!   [`montecarlo`]: cooperative games over feature coalitions, Harsanyi
//!   dividends, exact Shapley / proportional Shapley allocations and the
//!   random-order Monte Carlo and importance-sampling estimators.
//! - [`regressors`]: retrainable mean, dispersion and quantile models that
//!   accept any feature subset, including the empty one.
//! - [`conformal`]: data splitting, conformity scores, the finite-sample
//!   calibration quantile and SMR / LACP / CQR intervals.
//! - [`value`], [`rank`]: interval-derived value functions, normalization,
//!   rank-frequency tables and allocation agreement.
//! - [`synth`]: the Sobol'–Levitan and Friedman-variant generators.
//!
//! Feature indices are 0-based throughout: bit `j` of a [`Coalition`] is
//! feature column `j`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod allocation;
pub mod coalition;
pub mod conformal;
pub mod error;
pub mod game;
pub mod harsanyi;
pub mod matrix;
pub mod montecarlo;
pub mod order;
pub mod rank;
pub mod regressors;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod value;

pub use allocation::{AllocationKind, AllocationVector, Estimator};
pub use coalition::Coalition;
pub use error::{Error, Result};
pub use game::Game;
pub use matrix::Matrix;
pub use order::{Permutation, RandomOrderDistribution};
