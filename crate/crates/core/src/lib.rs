//! Colocated MIMO radar simulator with a reinforcement-learning transmit
//! beamformer.
//!
//! The crate is organised along the processing chain of one radar scan:
//!
//! * [`array_signal`]: steering vectors, beampatterns, spatial signatures and
//!   synthetic post-matched-filter snapshots.
//! * [`detector`]: the per-cell GLR statistic, threshold calibration and the
//!   (non)central chi-squared tails used for detection probabilities.
//! * [`beamformer`]: selection of the most likely target bins and the max-min
//!   transmit covariance design together with its factorisation.
//! * [`rl_agent`]: state, reward, epsilon-greedy policy and the SARSA update.
//! * [`sim_engine`]: scenarios, the closed sense/learn/transmit loop and Monte
//!   Carlo aggregation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_signal;
pub mod beamformer;
pub mod detector;
mod error;
pub mod rl_agent;
pub mod sim_engine;
pub mod special;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

/// Dense complex matrix used for weight and covariance matrices.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;
