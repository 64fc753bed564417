//! Spectral bases extracted from trained physics-informed networks.
//!
//! A small tanh network is trained on a Poisson problem; the features of its
//! last hidden layer are orthonormalised under a quadrature inner product
//! with an SVD, and the resulting hierarchical basis is used in a Nitsche
//! Galerkin method for Poisson, heat and steady nonlinear problems.

pub mod basis;
pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod network;
pub mod nitsche;
pub mod problems;
pub mod quadrature;
pub mod timestep;
pub mod trainer;

pub use error::{Error, Result};
