//! Velocity mixing: blend two trained fields, integrate the blend, and warp
//! a source image/label pair with the resulting sampling map.

mod apply;
mod weights;

pub use apply::{apply_deformation, integrate_mixed, mix_velocity, Mixture};
pub use weights::{sample_mix_weights, BetaSampler, MixWeights};
