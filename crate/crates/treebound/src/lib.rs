//! File formats, the government-and-binding constraint kit and the command-line
//! driver built on `treebound-core`.

pub mod cli;
pub mod error;
pub mod gb;
pub mod io;

pub use error::{Error, Result};
pub use treebound_core as core;
