//! Fast direct solver for variable-coefficient elliptic equations on
//! high-order quadrilateral surface meshes.

pub mod apps;
pub mod cli;
pub mod error;
pub mod hierarchy;
pub mod leaf;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod surface_ops;

pub use error::{Error, Result};
pub use scalar::{Scalar, ScalarKind};
