//! Core algorithms for volumetric data augmentation.
//!
//! Two augmentation paths share the volume model in [`volume`]:
//!
//! * spatial: a coordinate network learns a backward velocity field per
//!   source/target pair ([`inr`]); two fields are mixed and integrated into
//!   a sampling map that warps the source image and label ([`mixing`]).
//! * semantic: a real lesion is transplanted into a healthy background after
//!   rigid alignment, intensity matching and distance-field alpha fusion
//!   ([`lesion`]).
//!
//! [`pool`] plans both synthetic pools and draws stratified training batches.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, pool execution and the command-line tool live in
//! the `mixaug` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod inr;
pub mod lesion;
pub mod linalg;
pub mod mixing;
pub mod phantom;
pub mod pool;
pub mod rng;
pub mod volume;

pub use error::{Error, Result};
