//! Finite-population mean estimation with an auxiliary variable.
//!
//! The crate covers ratio, product and exponential-type estimators, a
//! two-parameter family of almost-unbiased combinations, their first-order
//! bias and MSE, the 3x3 weight system that cancels first-order bias, and two
//! ground-truth engines (exhaustive SRSWOR enumeration and seeded Monte
//! Carlo) used to check the approximations.

pub mod catalog;
pub mod error;
pub mod estimators;
pub mod population;
pub mod sum;
pub mod theory;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
