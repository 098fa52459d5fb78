//! Topological quantum optics in two-dimensional emitter arrays.
//!
//! A honeycomb array of V-type emitters coupled through the free-space
//! dyadic Green's function. The crate computes infinite-lattice Bloch bands,
//! Chern numbers, periodic-stripe edge spectra, driven no-jump dynamics of
//! finite patches, and the effect of position fluctuations.

extern crate blas_src;

pub mod bloch;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod greens;
pub mod lattice;
pub mod linalg;
pub mod params;
pub mod special;
pub mod stripes;
pub mod topology;
pub mod transport;

pub use error::{Error, Result};
pub use params::{PhysicalParams, RegularizationParams};
