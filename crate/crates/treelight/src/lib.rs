//! Light interception modelling for trees captured as labelled LiDAR point
//! clouds.
//!
//! The pipeline: weather records are decomposed into direct and diffuse
//! irradiance ([`weather`]), a discretised hemispherical sky is synthesised
//! with a CIE diffuse distribution and a dedicated sun node ([`skydome`]),
//! the labelled point cloud is voxelised per sky node and each node's light
//! is traced down voxel columns ([`cloud`], [`radiance`]), and the resulting
//! ground field is compared against ceptometer measurements ([`ceptometer`],
//! [`metrics`]). A staged grid search and an ablation harness ([`tuner`])
//! cover parameter tuning and sensitivity experiments.

pub mod ceptometer;
pub mod cloud;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod radiance;
pub mod skydome;
pub mod synth;
pub mod weather;

pub use error::{Error, Result};
