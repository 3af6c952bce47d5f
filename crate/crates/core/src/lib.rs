//! Safety-constrained policy transfer under a torque limit.
//!
//! A diagonal-Gaussian policy is fine-tuned with a KL-constrained policy
//! gradient while a safety controller adapts the symmetric torque limit
//! applied to every joint. The limit is chosen so that the predicted
//! unsafety rate times the limit (the expected damage under a linear damage
//! model) never exceeds a user-set budget.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration files and
//! the command line live in the companion `safelimit` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod env;
mod error;
pub mod gauss;
pub mod learner;
mod linalg;
pub mod policy;
pub mod safety;

pub use error::{Error, Result};
pub use gauss::{GaussParams, TruncatedGauss};
pub use policy::{ActionDist, PolicyParams};
pub use safety::{SafetyConfig, SafetyReport, Variant};
