//! Numerical laboratory for convex variational energies on long cylindrical
//! domains: integrand audits, simplicial finite-element discretization,
//! first-order and direct minimizers, and asymptotic sweeps that measure how
//! minimizers localize as the cylinder grows.

pub mod asymptotics;
pub mod config;
pub mod domain;
pub mod error;
pub mod integrand;
pub mod linalg;
pub mod onedim;
pub mod par;
pub mod report;
pub mod runner;
pub mod solver;

pub use error::{Error, Result};
