//! Synthesis of structurally rigid aggregates of user-supplied 3D elements.
//!
//! The library places, orients and (optionally) bends instances of input
//! meshes inside a target domain so that the assembly supports a prescribed
//! loading scenario. Rigidity is maximized by minimizing compliance on a
//! regular density grid; element parameters are the design variables and the
//! compliance gradient is chained through the density rasterization back to
//! them.
//!
//! Pipeline, per optimizer iteration:
//!
//! ```text
//! parameters Θ → world samples P → cell densities ρ → compliance C
//! ```
//!
//! Modules follow the pipeline: [`scene`] describes the problem, [`element`]
//! maps parameters to sample positions, [`density`] rasterizes samples into
//! grid densities, [`fem`] solves the elastic equilibrium, [`sensitivity`]
//! chains the gradient back to the parameters, and [`opt`] drives the
//! constrained optimization with continuation and connectivity improvement.

pub mod density;
pub mod element;
pub mod error;
pub mod fem;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod opt;
pub mod scene;
pub mod sensitivity;

pub use error::{Error, Result};

/// 3-vector of f64, used for positions, forces and rotation parameters.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix of f64.
pub type Mat3 = nalgebra::Matrix3<f64>;
