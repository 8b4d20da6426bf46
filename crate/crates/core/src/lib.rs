//! Greedy sparsity-aware parameter estimation over simulated ad-hoc networks.
//!
//! The crate provides the batch distributed hard-thresholding pursuit
//! ([`dihat`]), the online greedy diffusion LMS ([`greedi`]), the network
//! machinery both run on ([`network`]), the dense kernels they share
//! ([`linalg`]) and reproducible scenario generation ([`scenario`]).
//!
//! All numerical code is generic over a [`Scalar`]; the aliases at the crate
//! root fix the scalar to `f64`, which is what every experiment uses.

pub mod dihat;
pub mod error;
pub mod greedi;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision dense vector.
pub type Vector = linalg::DenseVector<f64>;
/// Double-precision dense matrix.
pub type Matrix = linalg::DenseMatrix<f64>;
/// Double-precision combination matrix.
pub type Weights = network::CombinationMatrix<f64>;
/// Double-precision DiHaT node state.
pub type DihatState = dihat::DihatNodeState<f64>;
/// Double-precision GreeDi-LMS node state.
pub type GreediState = greedi::GreediNodeState<f64>;
/// Double-precision ground truth.
pub type Truth = scenario::GroundTruth<f64>;
