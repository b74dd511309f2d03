//! Inversion of restricted Radon transforms: tangent lines to the unit sphere,
//! lines equidistant from two points, and point-pencil families of k-planes.

pub mod cli;
pub mod container;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod interp;
pub mod invert_equidistant;
pub mod invert_pencil;
pub mod invert_tangent;
pub mod mellin;
pub mod phantoms;
pub mod quad;
pub mod rotations;
pub mod selftest;
pub mod specfun;

pub use error::{Error, Result};
