//! Boundary element eigensolver for Schrödinger operators with δ and δ'
//! interactions on closed surfaces and screens in three dimensions.

pub mod analytic;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod mesh_io;
pub mod nlevp;
pub mod operators;
pub mod quadrature;

pub use error::{Error, Result};
