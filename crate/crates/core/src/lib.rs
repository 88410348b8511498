//! Sprays with prescribed geodesic curvature on conformally flat surfaces:
//! integration, exponential and log maps, Jacobi fields, the nonnegative
//! curvature condition, Minkowski averages with Brunn–Minkowski checks, and
//! Randers metrization.

pub mod bm;
pub mod catalog;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field;
pub mod jacobi;
pub mod metrize;
pub mod ode;
pub mod sets;
pub mod spray;
pub mod surface;

pub use error::{Error, Result};
