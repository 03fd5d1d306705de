//! Reduced-order combustion chemistry: flamelet data generation, jointly
//! learned constrained linear progress variables with a neural manifold
//! regressor, and the baselines it is compared against.

pub mod baselines;
pub mod chemtab_model;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod flamelet;
pub mod mechanism;
pub mod nn;

pub use error::{Error, Result};
pub use dataset::Dataset;
pub use mechanism::{Mechanism, Reaction, Species};
pub use chemtab_model::ChemTabModel;
