//! Distribution-free detection of one-sided sparse heterogeneous mixtures.
//!
//! The observations are modeled as `(1-ε) F(x) + ε G(x-μ)` with `F`
//! continuous and symmetric about zero. The crate provides:
//!
//! - the generalized Gaussian family and mixture samplers ([`distributions`]),
//! - the sign sequence shared by all rank/sign tests ([`sign_sequence`]),
//! - the test statistics — sign, signed-rank, Smirnov, CUSUM sign, tail-run,
//!   longest-run, number-of-runs, t, higher criticism, and the likelihood
//!   ratio ([`statistics`]),
//! - exact and Monte Carlo null calibration ([`calibration`]),
//! - closed-form detection boundaries ([`theory`]),
//! - a deterministic, parallel power-study engine ([`simulation`]).

pub mod calibration;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod rngstream;
pub mod sign_sequence;
pub mod simulation;
pub mod special;
pub mod statistics;
pub mod theory;

pub use error::{Error, Result};
