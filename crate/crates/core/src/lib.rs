//! Multiuser detection for random-access channels whose set of active users
//! is a finite random set.
//!
//! * [`rst`]: state spaces, set densities, belief functions, Möbius inversion
//!   and union convolution.
//! * [`traffic`]: static prior and birth/death transition kernels.
//! * [`channel`]: signature families and the synchronous CDMA observation model.
//! * [`detect`]: Bayesian filter, Viterbi, sliding-window Viterbi, static MAP/ML
//!   and the all-active baseline.
//! * [`analysis`]: pairwise error probabilities, union bounds and the
//!   semi-analytic Monte Carlo bound.
//! * [`harness`]: experiment configuration, simulation and CSV/JSON output.

pub mod analysis;
pub mod channel;
pub mod detect;
pub mod error;
pub mod harness;
pub mod rng;
pub mod rst;
pub mod traffic;

pub use error::{Error, Result};
