//! Lesion transplantation: rigid alignment by mutual information,
//! histogram matching, and distance-weighted fusion.

mod fusion;
mod histogram;
mod inject;
mod mi;
mod register;
mod rigid;
mod sdf;

pub use fusion::{alpha_map, fuse, pve_blur, AlphaMap};
pub use histogram::{match_histogram, HistogramMap};
pub use inject::{inject_lesion, Injection, InjectionConfig};
pub use mi::mutual_information;
pub use register::{register_rigid, RegistrationStatus, RigidRegistration};
pub use rigid::{apply_rigid, apply_rigid_mask, RigidTransform};
pub use sdf::{signed_distance, SignedDistanceField};
