//! File formats, reports, parallel execution and the command-line front end
//! for `selcert-core`.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod num;
pub mod wire;

pub use error::{Error, Result};
