//! Secrecy capacity region of the aligned degraded MIMO Gaussian broadcast
//! channel with an eavesdropper.
//!
//! The crate evaluates Gaussian secret-superposition rate pairs, maximizes the
//! weighted secrecy sum rate over input covariance splits, recovers Lagrange
//! multipliers, and certifies the enhanced-channel construction built from
//! those multipliers.

pub mod channel;
pub mod enhancement;
pub mod error;
pub mod io;
pub mod matrix;
pub mod rates;
pub mod solver;

pub use channel::{PowerSplit, Sadbc};
pub use enhancement::{DifferenceStatus, EnhancedSadbc};
pub use solver::{KktCertificate, SolveOptions, Solution};

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use rates::RatePair;


/// Natural-log to bits conversion.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
