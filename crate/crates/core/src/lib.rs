//! Stability, mode, tolerance and output-power modelling for
//! telescope-enhanced spatially distributed laser cavities.
//!
//! Lengths are in millimetres throughout, except air absorption which is
//! quoted per metre.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
mod dd;
pub mod error;
pub mod gaussian;
pub mod output;
pub mod power;
pub mod raymatrix;
pub mod stability;
pub mod tolerance;

pub use cavity::{CavityGeometry, Param, Plane};
pub use error::{Error, Result};
pub use raymatrix::RayMatrix;
