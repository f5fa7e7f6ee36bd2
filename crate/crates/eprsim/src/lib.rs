//! Command-line front end for `eprsim-core`, reading TOML scenarios and
//! writing CSV or JSON-lines records.

pub mod config;
pub mod error;
pub mod record;
pub mod run;
pub mod validate;

pub use error::CliError;
