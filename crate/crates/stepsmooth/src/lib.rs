//! Decomposition of sampled signals into a smooth component living in a
//! reproducing kernel Hilbert space plus a piecewise-constant step component.
//!
//! The crate is organized around the stages of that problem:
//!
//! - [`geometry`]: kernels, kernel-induced metrics and Gram matrices;
//! - [`topology`]: neighbor graphs, connectivity radii and label distances
//!   of a sample, the quantities that control when the two components are
//!   identifiable;
//! - [`identifiability`]: recovery-condition checks, level deviation bounds
//!   and a brute-force feasibility oracle that certifies cluster recovery on
//!   small instances;
//! - [`altmin`]: the alternating estimator (kernel ridge regression
//!   interleaved with k-means) together with cross-validated regularization
//!   selection and out-of-sample prediction;
//! - [`spectral`]: eigendecompositions, spectral survival functions, tail
//!   exponents and filtered-norm bounds describing how ridge regression
//!   filters the step component;
//! - [`harness`]: data generators, evaluation metrics and the experiment
//!   drivers behind the `stepsmooth` command-line interface.

pub mod altmin;
pub mod geometry;
pub mod harness;
pub mod identifiability;
pub mod spectral;
pub mod topology;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel domain violation: {0}")]
    KernelDomain(String),

    #[error("the {0} kernel has no pointwise evaluation")]
    NoPointwiseKernel(&'static str),

    #[error("kernel is not positive semidefinite: {0}")]
    InvalidKernel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid cluster partition: {0}")]
    InvalidPartition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("labeling enumeration would visit {states:.3e} states, above the guard of {limit:.0e}")]
    EnumerationGuard { states: f64, limit: f64 },

    #[error("entry {index} is not strictly positive (value {value})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
