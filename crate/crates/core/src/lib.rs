//! Graph-spectral toolkit for triangle meshes.
//!
//! The crate covers the full pipeline used to study mesh detail in the
//! frequency domain:
//!
//! - [`mesh`]: indexed triangle meshes, OBJ I/O, topology checks, fixtures.
//! - [`spectral`]: combinatorial Laplacian, dense and Krylov eigensolvers,
//!   graph Fourier transform, band decomposition and spectrum profiles.
//! - [`subdiv`]: Loop subdivision as an explicit sparse operator, parameter
//!   transfer and a linear-blend-skinned parametric model.
//! - [`metrics`]: vertex/joint errors, Chamfer distances, the frequency
//!   decomposition loss with its gradient, MSNR, surface snapping and
//!   masked smoothing.
//! - [`experiments`]: octave bands, band-limited noise and the sweep and
//!   export harnesses built on the above.

pub mod error;
pub mod experiments;
pub mod mesh;
pub mod metrics;
pub mod sparse;
pub mod spectral;
pub mod subdiv;
pub mod util;

pub use error::{Error, ErrorClass, Result};
pub use mesh::{MeshGraph, TriangleMesh, ValidationReport};
pub use spectral::{Band, LaplacianMatrix, SpectralBasis, SpectralCoefficients};

/// Version string embedded in every machine-readable output.
pub const TOOL_VERSION: &str = concat!("meshspectra ", env!("CARGO_PKG_VERSION"));
