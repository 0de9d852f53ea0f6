//! Hybrid analog/digital precoding for wideband mmWave MIMO-OFDM.
//!
//! The crate simulates a single-user OFDM link where the transmitter applies
//! a wideband analog RF precoder (shared by all subcarriers) followed by
//! per-subcarrier digital baseband precoders. It provides:
//!
//! - clustered geometric frequency-selective channel generation ([`channel`]),
//! - closed-form fully-connected RF precoding from the transmit-side sample
//!   covariance, with SVD + water-filling baseband design ([`precoder_full`],
//!   [`spectral`]),
//! - block-diagonal RF precoding for fixed antenna subarrays
//!   ([`precoder_subarray`]),
//! - dynamic antenna-to-RF-chain partitioning driven by a cheap surrogate of
//!   the largest covariance eigenvalue, with greedy and exhaustive solvers
//!   ([`partitioner`]),
//! - mutual-information evaluation against fully-digital baselines
//!   ([`evaluator`]) and a Monte-Carlo scenario runner with CSV output
//!   ([`cli`]).

pub mod array;
pub mod channel;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod partitioner;
pub mod precoder_full;
pub mod precoder_subarray;
pub mod spectral;

pub use error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
