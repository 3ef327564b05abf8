//! Riemannian geometry of symmetric positive definite (SPD) matrices, and
//! the machinery to use it: covariance descriptors for multivariate time
//! series and images, intrinsic means, tangent-space embeddings, principal
//! geodesic analysis, and simple deterministic classifiers.
//!
//! SPD matrices form an open cone, not a vector space: averaging them entry
//! by entry inflates determinants and extrapolation leaves the cone. This
//! crate works with the affine-invariant metric instead, under which the
//! cone is a complete manifold with closed-form geodesics:
//!
//! * [`spd`] — validated `SymMatrix` / `SpdMatrix` types and deterministic
//!   spectral primitives (`eig_sym`, `matrix_exp`, `matrix_log`,
//!   `matrix_power`).
//! * [`airm`] — affine-invariant distance, geodesics, exponential and
//!   logarithm maps at a base point.
//! * [`mean`] — Karcher (intrinsic) mean with safeguarded fixed-point
//!   iteration, log-Euclidean and Euclidean means, determinant-swelling
//!   diagnostics.
//! * [`tangent`] — isometric half-vectorization, tangent datasets, and
//!   principal geodesic analysis.
//! * [`classify`] — seeded stratified splits, ridge and linear SVM
//!   one-vs-rest classifiers, confusion matrices.
//! * [`ts`] / [`image`] — covariance descriptor pipelines for labeled
//!   multivariate runs and grayscale textures.
//! * [`synthetic`] — seeded generators for SPD matrices, VAR(1) runs and
//!   labeled benchmarks.
//! * [`io`] — text artifact formats (matrix CSV at full precision,
//!   manifests, model files).
//!
//! Determinism is a design constraint throughout: fixed summation orders,
//! an explicit PRNG ([`rng`]), and a deterministic eigenvector sign
//! convention make every seeded computation reproducible bit for bit.

pub mod airm;
pub mod classify;
pub mod error;
pub mod image;
pub mod io;
pub mod mean;
pub mod rng;
pub mod spd;
pub mod synthetic;
pub mod tangent;
pub mod ts;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
pub use spd::{
    eig_sym, frob_inner, frob_norm, matrix_exp, matrix_log, matrix_power, EigDecomp, SpdMatrix,
    SymMatrix, DEFAULT_FLOOR_RATIO, DEFAULT_SYM_TOL,
};
pub use airm::{airm_distance, exp_map, geodesic, log_map, BasePoint};
pub use mean::{euclidean_mean, karcher_mean, log_euclidean_mean, MeanConfig, MeanResult};

// Downstream crates should use the same linear algebra types.
pub use nalgebra;
