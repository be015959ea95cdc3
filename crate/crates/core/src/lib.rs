//! Shapley compositions: Shapley values for multiclass probabilistic
//! classifiers, computed in the Aitchison geometry of the simplex.
//!
//! Predictions are compositions; feature contributions are compositions too,
//! combined by perturbation and scaled by powering. All Shapley arithmetic is
//! carried out in the isometric log-ratio coordinates of a chosen basis.

pub mod class_geometry;
pub mod cli;
pub mod composition;
pub mod document;
pub mod error;
pub mod ilr;
pub mod model;
pub mod plot;
pub mod report;
pub mod shapley;

pub use composition::Composition;
pub use error::{Error, Result};
