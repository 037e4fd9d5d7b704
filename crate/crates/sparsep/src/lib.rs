//! File formats, Monte Carlo experiments and the command-line front end
//! for [`sparsep_core`].

pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;

pub use error::{Error, Result};
