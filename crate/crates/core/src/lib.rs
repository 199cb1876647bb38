//! Navigator-driven dynamic MRI reconstruction with a self-learned
//! denoising-autoencoder manifold prior, alongside the linear subspace
//! baseline, on synthetic free-breathing cardiac phantoms.

pub mod acquisition;
pub mod cli;
pub mod dae;
pub mod io;
mod error;
pub mod numerics;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod priors;
pub mod recon;

pub use error::{Error, Result};
