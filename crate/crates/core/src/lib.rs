//! Sparse single-index model estimation with a thresholded Wirtinger flow on
//! the variance loss.
//!
//! The estimator is [`twf::estimate`]: thresholded spectral initialization
//! ([`init`]) followed by thresholded gradient steps ([`twf`]). [`model`]
//! simulates data, [`oracle`] holds population closed forms and theory
//! probes, [`experiments`] runs the simulation sweeps, and [`cli`] drives it all
//! from the command line.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod twf;

pub use error::{Error, Result};
