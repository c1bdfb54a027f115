//! Conformalized link prediction.
//!
//! A small GNN link scorer produces edge embeddings, a two-headed quantile
//! regressor turns them into label bands, and split-conformal calibration
//! widens those bands to guarantee marginal coverage. An optional
//! degree-guided edge sampler reshapes the training and calibration links
//! toward a fitted power law before the quantile fit.

pub mod conformal;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod nn;
pub mod powerlaw;
pub mod quantile;
pub mod rng;
pub mod sampler;

pub use error::{ClpError, Result};
