//! Fractional diffusion maps.
//!
//! Estimates heat semigroups, eigenfunctions and eigenvalues of the classical
//! and fractional Laplacian on a manifold that is only known through a point
//! cloud sampled from it. Two kernel families are supported:
//!
//! - local (exponential) kernels `exp(-(d/sqrt(eps))^alpha)` applied to ambient
//!   Euclidean distances, used for `beta >= 2`;
//! - nonlocal (polynomial) kernels `(1 + d/sqrt(eps))^-(dim + beta)` applied to
//!   geodesic distances estimated by all-pairs shortest paths, used for
//!   `0 < beta < 2`.
//!
//! The pipeline lives in [`spectral::run_fdm`]. [`manifolds`] provides the
//! sample sets and analytic ground truth, [`validation`] the evaluation
//! machinery and [`ridge`] kernel ridge regression on top of the heat-kernel
//! estimate.
//!
//! Data-parallel loops (per-source Dijkstra, kernel assembly, normalization) run on
//! rayon when the `parallel` feature is enabled (the default); see [`par`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geodesics;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod manifolds;
pub mod par;
pub mod ridge;
pub mod rng;
pub mod spectral;
pub mod validation;

pub use error::{FdmError, Result};
pub use geodesics::{DistanceKind, DistanceMatrix, SparseGraph};
pub use kernels::{DistanceMode, FdmConfig, KernelFamily, KernelMatrix};
pub use manifolds::{ManifoldTag, PointCloud};
pub use par::Execution;
pub use spectral::{run_fdm, KernelStack, SpectralResult};
