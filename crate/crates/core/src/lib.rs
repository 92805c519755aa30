//! Incremental voxel mapping: TSDF fusion from posed range scans, ESDF
//! maintenance by raise/lower wavefronts, marching-cubes meshing, an analytic
//! benchmark world and error-analysis helpers.
//!
//! Maps are stored as voxel-hashed [`Layer`]s: a hash table from block index to
//! fixed-size dense voxel arrays that grows on demand.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod esdf;
pub mod index;
pub mod io;
pub mod layer;
pub mod mesh;
pub mod serialize;
pub mod sim;
pub mod tsdf;

pub use error::{Error, Result};
pub use esdf::{EsdfConfig, EsdfIntegrator, EsdfVoxel, FixedBand, Metric, QueueMode};
pub use index::{BlockIndex, GlobalVoxelIndex, LocalVoxelIndex};
pub use layer::{Block, Layer, LayerKind, SdfVoxel, UpdateConsumer, Voxel};
pub use mesh::{Mesh, MeshIntegrator};
pub use tsdf::{MergeMode, Scan, TsdfConfig, TsdfIntegrator, TsdfVoxel, WeightMode};

/// Rigid sensor-to-world transform.
pub type Pose = nalgebra::Isometry3<f64>;
/// 3D point or vector in meters.
pub type Point3 = nalgebra::Vector3<f64>;
