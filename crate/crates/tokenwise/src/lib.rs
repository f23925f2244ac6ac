//! File formats, parallel experiment runners and the `tokenwise` command
//! line on top of [`tokenwise_core`].

pub mod cli;
mod error;
pub mod formats;
pub mod results;
pub mod runner;

pub use error::{AppError, Result};
