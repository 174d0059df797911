//! Numerical laboratory for Reeb and Anosov model flows.
//!
//! The crate covers recurrence-set volumes, Bowen entropy and distorted
//! metrics, irrationality exponents, model spectral distributions,
//! Tauberian smoothing and eta-invariant evaluation from eigenvalue lists.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod contact_geometry;
pub mod diophantine;
pub mod entropy;
pub mod eta;
pub mod flows;
pub mod numeric;
pub mod presets;
pub mod recurrence;
pub mod spectral_model;
pub mod tauberian;

pub use flows::{Flow, FlowPoint};
