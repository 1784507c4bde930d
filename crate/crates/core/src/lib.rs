//! Shallow neural networks that represent polynomials exactly and
//! reproduce localized Taylor approximants, with tools to audit their
//! covering-number bounds and regression rates.
//!
//! The `parallel` feature (on by default) runs grid sweeps, cover audits
//! and regression replicates on rayon; without it everything runs
//! sequentially with identical results.

pub mod activation;
pub mod bls;
pub mod complexity;
pub mod error;
pub mod exact_rep;
pub mod linalg;
pub mod network;
pub mod par;
pub mod poly;
pub mod rational;
pub mod regression;
pub mod rng;
pub mod smooth;
pub mod stats;
pub mod taylor;

pub use error::{Error, Result};
pub use network::{Activation, NetworkFile, ShallowNetwork};
pub use par::Parallelism;
pub use poly::{MultiIndex, Polynomial};
pub use rational::ExactRational;
