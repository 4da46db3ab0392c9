//! Residual-minimization losses, error estimators and sampling diagnostics
//! for linear PDEs.

pub mod autodiff;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod losses;
pub mod models;
pub mod problems;
pub mod quadrature;
pub mod training;

pub use error::{Error, Result};
