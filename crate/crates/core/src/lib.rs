//! Voronoi covariance measures of distance-like functions on 3D point clouds.
//!
//! The pipeline builds a weighted site set approximating a robust distance
//! to the cloud, intersects each site's power cell with a polyhedral ball,
//! integrates the covariance of every cell, and convolves the resulting
//! tensor field with a probe kernel to read off normals, principal
//! directions, curvature and sharp features.

pub mod distlike;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod geom;
pub mod io;
pub mod powerdiagram;
pub mod spatial;
pub mod synth;
pub mod vcm;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geom::{Mat3, SymTensor3, Vec3};
