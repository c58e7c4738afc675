//! Numerical laboratory for (possibly non-reversible) Finsler metrics on
//! surfaces: fiberwise convex geometry and Legendre duality, a metric catalog
//! over planar and two-chart spherical atlases, Hamiltonian geodesic flow
//! with Zoll and reversibility diagnostics, Holmes–Thompson volumes with
//! Brunn–Minkowski comparisons, and a decomposition pipeline that splits a
//! metric into a reversible part plus an exact one-form.

pub mod error;
pub mod flow;
pub mod metrics;
pub mod norms;
pub(crate) mod util;
pub mod volume;

pub use error::{Error, Result};
