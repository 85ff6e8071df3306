//! File formats, pool construction and the command-line front end for
//! `mixaug-core`.
//!
//! * [`nifti`]: NIfTI-1 reading and writing (`.nii`, `.nii.gz`).
//! * [`model_file`], [`field_file`], [`transform_file`]: velocity models,
//!   displacement fields and rigid transforms on disk.
//! * [`config`]: the versioned TOML run configuration.
//! * [`pool`]: builds both synthetic pools and writes the manifest.
//! * [`cli`]: the `mixaug` subcommands.

pub mod cli;
pub mod config;
pub mod digest;
pub mod error;
pub mod field_file;
pub mod model_file;
pub mod nifti;
pub mod pool;
pub mod transform_file;

pub use error::{Error, ExitCode, Result};
