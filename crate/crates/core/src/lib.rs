//! RIS-aided near-field localization under pixel failures.
//!
//! [`scene`] builds the observation model, [`bounds`] evaluates CRB, MCRB
//! and the misspecified lower bound, [`estimators`] holds the localizer and
//! the joint localization / failure-diagnosis algorithms, and [`harness`]
//! runs seeded Monte-Carlo sweeps.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod scene;

pub use error::{Error, Result};
