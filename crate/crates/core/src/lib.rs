//! Spectral geometry of compact flat surfaces with conical singularities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conekernel;
pub mod linalg;
pub mod quadrature;
pub mod specialfn;
pub mod spectral;
pub mod surface;
pub mod torusmetrics;
