//! Object library: segmentation, association, per-object TSDF fusion and the joint scene TSDF.

pub mod assignment;
mod global;
mod library;
mod object;
mod observation;

pub use global::{fuse_global_tsdf, GlobalTsdf};
pub use library::{associate_observations, Association, ObjectLibrary};
pub use object::{integrate_observation, MapParams, ObjectRecord};
pub use observation::{segment_observations, Observation};
