//! File formats, dataset tooling and the `rawsr` command-line front end
//! around [`rawsr_core`].

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod field;
pub mod imageio;
pub mod kernel;
pub mod report;
