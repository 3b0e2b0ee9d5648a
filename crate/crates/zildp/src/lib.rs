//! Files, experiments and the command line for [`zildp_core`].
//!
//! - [`io`]: CSV datasets, support JSON, release bundles and curve CSVs.
//! - [`config`]: experiment configuration.
//! - [`experiments`]: the replication engine and the table / figure runs.
//! - [`cli`]: the `zildp` command.

pub mod cli;
pub mod config;
mod error;
pub mod experiments;
pub mod io;

pub use error::{AppError, Result};
