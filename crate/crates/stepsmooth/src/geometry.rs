//! Kernel definitions, kernel-induced metrics and Gram matrix construction.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A kernel family together with its parameters.
///
/// `Min` is the Brownian-motion kernel `min(x, x')` on scalar inputs in
/// `[0, 1]`. `Gaussian` is `exp(-gamma ||x - x'||^2)` on real vectors of any
/// fixed dimension. `SobolevSpectrum` carries no pointwise kernel at all: it
/// only emits the eigenvalue sequence `lambda_i = i^(-2 alpha)` consumed by
/// the spectral module.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Min,
    Gaussian { gamma: f64 },
    SobolevSpectrum { alpha: f64 },
}

#[derive(Serialize, Deserialize)]
struct KernelSpecJson {
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if gamma > 0.0 {
            Ok(KernelSpec::Gaussian { gamma })
        } else {
            Err(Error::InvalidInput(format!("gaussian bandwidth must be positive, got {gamma}")))
        }
    }

    pub fn sobolev_spectrum(alpha: f64) -> Result<Self> {
        if alpha > 0.0 {
            Ok(KernelSpec::SobolevSpectrum { alpha })
        } else {
            Err(Error::InvalidInput(format!("spectrum exponent must be positive, got {alpha}")))
        }
    }

    /// Whether the kernel can be evaluated at point pairs.
    pub fn is_pointwise(&self) -> bool {
        !matches!(self, KernelSpec::SobolevSpectrum { .. })
    }

    /// Serialize to the wire format `{"family": ..., "gamma"?: ..., "alpha"?: ...}`.
    pub fn to_json(&self) -> String {
        let shadow = match self {
            KernelSpec::Min => KernelSpecJson { family: "min".into(), gamma: None, alpha: None },
            KernelSpec::Gaussian { gamma } => {
                KernelSpecJson { family: "gaussian".into(), gamma: Some(*gamma), alpha: None }
            }
            KernelSpec::SobolevSpectrum { alpha } => KernelSpecJson {
                family: "sobolev-spectrum".into(),
                gamma: None,
                alpha: Some(*alpha),
            },
        };
        serde_json::to_string(&shadow).expect("kernel spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let shadow: KernelSpecJson = serde_json::from_str(text)?;
        match shadow.family.as_str() {
            "min" => Ok(KernelSpec::Min),
            "gaussian" => {
                let gamma = shadow
                    .gamma
                    .ok_or_else(|| Error::InvalidInput("gaussian kernel requires \"gamma\"".into()))?;
                KernelSpec::gaussian(gamma)
            }
            "sobolev-spectrum" => {
                let alpha = shadow.alpha.ok_or_else(|| {
                    Error::InvalidInput("sobolev-spectrum kernel requires \"alpha\"".into())
                })?;
                KernelSpec::sobolev_spectrum(alpha)
            }
            other => Err(Error::InvalidInput(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// A finite point cloud; all points share the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidInput("point cloud must contain at least one point".into()));
        }
        Ok(PointCloud { points })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let points = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        PointCloud::new(points)
    }

    /// The design used throughout the simulations: `x_i = i/n` for `i = 1..n`.
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("point cloud must contain at least one point".into()));
        }
        let values: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        PointCloud::from_scalars(&values)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i).to_slice().expect("points are stored row-contiguous")
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    /// Scalar coordinates, available when `dim() == 1`.
    pub fn scalars(&self) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected scalar points, got dimension {}",
                self.dim()
            )));
        }
        Ok(self.points.column(0).to_vec())
    }
}

/// The scaled kernel matrix with entries `K(x_i, x_j) / n`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    entries: Array2<f64>,
}

impl KernelMatrix {
    /// Wrap an externally built matrix, enforcing exact symmetry.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "kernel matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                if entries[[i, j]] != entries[[j, i]] {
                    return Err(Error::InvalidInput(format!(
                        "kernel matrix is asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(KernelMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// The unscaled Gram matrix `[K(x_i, x_j)]`, i.e. `n` times the entries.
    ///
    /// Spectral quantities (eigenvalue laws, `tau = sqrt(lambda_n)` schedules)
    /// are stated for this matrix.
    pub fn unscaled(&self) -> Array2<f64> {
        &self.entries * self.n() as f64
    }
}

/// Evaluate the kernel at a pair of points.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "points have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    match spec {
        KernelSpec::Min => {
            if x.len() != 1 {
                return Err(Error::KernelDomain(format!(
                    "min kernel is defined on scalar inputs, got dimension {}",
                    x.len()
                )));
            }
            for &v in [x[0], y[0]].iter() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::KernelDomain(format!(
                        "min kernel input {v} lies outside [0, 1]"
                    )));
                }
            }
            Ok(x[0].min(y[0]))
        }
        KernelSpec::Gaussian { gamma } => {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-gamma * sq).exp())
        }
        KernelSpec::SobolevSpectrum { .. } => Err(Error::NoPointwiseKernel("sobolev-spectrum")),
    }
}

/// The kernel metric `sqrt(K(x,x) - 2 K(x,x') + K(x',x'))`.
///
/// Tiny negative radicands in `[-1e-12, 0)` are rounding artifacts and clamp
/// to zero; anything below that signals a non-positive-semidefinite kernel.
pub fn kernel_metric(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    // grouped so the result is exactly symmetric in the arguments
    let radicand =
        (eval_kernel(spec, x, x)? + eval_kernel(spec, y, y)?) - 2.0 * eval_kernel(spec, x, y)?;
    if radicand < -1e-12 {
        return Err(Error::InvalidKernel(format!(
            "kernel metric radicand {radicand} is negative beyond tolerance"
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// The scaled Gram matrix with entries `K(x_i, x_j) / n`.
///
/// Only the upper triangle is evaluated; the lower is mirrored so the result
/// is exactly symmetric.
pub fn gram_matrix(spec: &KernelSpec, cloud: &PointCloud) -> Result<KernelMatrix> {
    let n = cloud.len();
    let scale = 1.0 / n as f64;
    let mut entries = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let value = eval_kernel(spec, cloud.point(i), cloud.point(j))? * scale;
            entries[[i, j]] = value;
            entries[[j, i]] = value;
        }
    }
    Ok(KernelMatrix { entries })
}

/// Distance notion for pairwise distance matrices.
#[derive(Debug, Clone)]
pub enum Metric {
    Euclidean,
    Kernel(KernelSpec),
}

/// Symmetric pairwise distance matrix with zero diagonal.
pub fn pairwise_distances(cloud: &PointCloud, metric: &Metric) -> Result<Array2<f64>> {
    let n = cloud.len();
    let mut dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = match metric {
                Metric::Euclidean => cloud
                    .point(i)
                    .iter()
                    .zip(cloud.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
                Metric::Kernel(spec) => kernel_metric(spec, cloud.point(i), cloud.point(j))?,
            };
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    Ok(dist)
}
