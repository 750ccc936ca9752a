//! Numerical laboratory for self-similar solutions of mean curvature flow in
//! arbitrary codimension.

pub mod al;
pub mod catalog;
pub mod classify;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod immersion;
pub mod jet;
pub mod quadrature;
pub mod sampling;
pub mod shrinker;
pub mod suite;

pub use error::{LabError, Result};
