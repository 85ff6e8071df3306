//! Coordinate-network velocity fields and their integration.
//!
//! A [`VelocityFieldModel`] maps a spacetime point `(x, t)` through a
//! Fourier feature encoding and a rectifier MLP to a velocity in voxels per
//! unit time. [`integrate`] rolls every grid voxel through `K` explicit Euler
//! steps to obtain the backward sampling map; [`train_registration`] fits the
//! network so that the source warped by that map matches the target.

mod adam;
mod encoding;
mod field;
mod integrate;
mod mlp;
mod model;
mod train;

pub use adam::Adam;
pub use encoding::FourierEncoding;
pub use field::DeformationField;
pub use integrate::{integrate, integrate_with, VelocitySource};
pub use mlp::{Mlp, MlpCache};
pub use model::{ModelArch, VelocityFieldModel};
pub use train::{
    loss_and_gradient, loss_value, sample_collocation, train_registration, Collocation,
    RegistrationConfig, Similarity, TrainingReport,
};
