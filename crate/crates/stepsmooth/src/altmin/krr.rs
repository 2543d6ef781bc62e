//! Kernel ridge regression solvers.
//!
//! The public [`krr_step`] solves `(K + tau I) a = residual` through a dense
//! symmetric positive-definite factorization. Fits over the min kernel on
//! distinct positive scalar points additionally get an O(n) path: the inverse
//! of the unscaled min-kernel Gram matrix is tridiagonal (the precision
//! matrix of a Brownian path), so `(K + tau I) a = r` rewrites as the
//! tridiagonal system `(I + tau K^{-1}) a = K^{-1} r` and the fitted values
//! follow from `K a = r - tau a`.

use ndarray::prelude::*;
use ndarray_linalg::{CholeskyFactorized, FactorizeC, SolveC, UPLO};

use crate::geometry::{gram_matrix, KernelMatrix, KernelSpec, PointCloud};
use crate::{Error, Result};

/// Output of one ridge update.
#[derive(Debug, Clone)]
pub struct KrrStep {
    /// Dual coefficients `(K + tau I)^{-1} residual / sqrt(n)`.
    pub alpha: Array1<f64>,
    /// Fitted values `K (K + tau I)^{-1} residual`.
    pub fitted: Array1<f64>,
}

/// Solve the ridge system for a given scaled kernel matrix.
pub fn krr_step(k: &KernelMatrix, residual: ArrayView1<'_, f64>, tau: f64) -> Result<KrrStep> {
    if tau <= 0.0 {
        return Err(Error::InvalidInput(format!("regularization must be positive, got {tau}")));
    }
    let n = k.n();
    if residual.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual has length {}, kernel matrix is {n}x{n}",
            residual.len()
        )));
    }
    let shifted = k.entries() + &(Array2::<f64>::eye(n) * tau);
    let factor: CholeskyFactorized<_> = shifted.factorizec(UPLO::Lower).map_err(|e| {
        // Gershgorin bound on the condition number for the error report
        let row_sums: Vec<f64> =
            (0..n).map(|i| k.entries().row(i).iter().map(|v| v.abs()).sum::<f64>()).collect();
        let upper = row_sums.iter().cloned().fold(0.0f64, f64::max) + tau;
        Error::InvalidInput(format!(
            "ridge system factorization failed ({e}); condition estimate <= {:.3e}",
            upper / tau
        ))
    })?;
    let a = factor.solvec(&residual.to_owned())?;
    let fitted = k.entries().dot(&a);
    let alpha = &a / (n as f64).sqrt();
    Ok(KrrStep { alpha, fitted })
}

/// One application of a prepared ridge solver.
pub(crate) struct SolveOut {
    pub fitted: Array1<f64>,
    /// Squared Hilbert norm of the fitted function, `alpha' K alpha`
    /// (the reproducing property gives `||f||^2 = a' K a / n` for the dual
    /// solution `a`, which is what the ridge objective penalizes).
    pub hnorm2: f64,
}

/// A ridge solver prepared once per `(points, kernel, tau)` and reused
/// across AltMin iterations.
pub(crate) enum Solver {
    Dense(DenseSolver),
    MinTridiag(MinTridiagSolver),
}

impl Solver {
    /// Pick the fastest valid backend for the given geometry.
    pub fn for_cloud(spec: &KernelSpec, cloud: &PointCloud, tau: f64) -> Result<Solver> {
        if tau <= 0.0 {
            return Err(Error::InvalidInput(format!("regularization must be positive, got {tau}")));
        }
        if matches!(spec, KernelSpec::Min) && cloud.dim() == 1 {
            if let Some(solver) = MinTridiagSolver::try_new(cloud, tau)? {
                return Ok(Solver::MinTridiag(solver));
            }
        }
        Solver::dense_from(&gram_matrix(spec, cloud)?, tau)
    }

    /// Dense backend over an already built kernel matrix.
    pub fn dense_from(k: &KernelMatrix, tau: f64) -> Result<Solver> {
        if tau <= 0.0 {
            return Err(Error::InvalidInput(format!("regularization must be positive, got {tau}")));
        }
        let n = k.n();
        let shifted = k.entries() + &(Array2::<f64>::eye(n) * tau);
        let factor = shifted.factorizec(UPLO::Lower)?;
        Ok(Solver::Dense(DenseSolver { k: k.entries().clone(), factor, tau }))
    }

    pub fn tau(&self) -> f64 {
        match self {
            Solver::Dense(s) => s.tau,
            Solver::MinTridiag(s) => s.tau,
        }
    }

    /// Fitted values and Hilbert norm for a residual vector.
    pub fn apply(&self, residual: &Array1<f64>) -> SolveOut {
        match self {
            Solver::Dense(s) => {
                let a = s.factor.solvec(residual).expect("factorized system solves");
                let fitted = s.k.dot(&a);
                let hnorm2 = (a.dot(&fitted) / a.len() as f64).max(0.0);
                SolveOut { fitted, hnorm2 }
            }
            Solver::MinTridiag(s) => s.apply(residual),
        }
    }

    /// Dual solution `a = (K + tau I)^{-1} residual`.
    pub fn dual(&self, residual: &Array1<f64>) -> Array1<f64> {
        match self {
            Solver::Dense(s) => s.factor.solvec(residual).expect("factorized system solves"),
            Solver::MinTridiag(s) => s.dual(residual),
        }
    }
}

pub(crate) struct DenseSolver {
    k: Array2<f64>,
    factor: CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    tau: f64,
}

/// O(n) ridge solver for the min kernel on distinct positive scalar points.
pub(crate) struct MinTridiagSolver {
    tau: f64,
    /// permutation: sorted position -> original index (identity skipped)
    perm: Option<Vec<usize>>,
    /// tridiagonal T = n * C^{-1} where C is the unscaled min Gram matrix
    t_diag: Vec<f64>,
    t_off: Vec<f64>,
    /// Thomas factorization of B = I + tau T: eliminated diagonal and multipliers
    b_diag: Vec<f64>,
    b_mult: Vec<f64>,
    b_off: Vec<f64>,
}

impl MinTridiagSolver {
    /// Returns `None` when the geometry does not support the fast path
    /// (duplicate points or a point at zero).
    fn try_new(cloud: &PointCloud, tau: f64) -> Result<Option<Self>> {
        let xs = cloud.scalars()?;
        let n = xs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        if sorted[0] <= 0.0 {
            return Ok(None);
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Ok(None);
        }
        let nf = n as f64;
        let mut t_diag = vec![0.0f64; n];
        let mut t_off = vec![0.0f64; n.saturating_sub(1)];
        for i in 0..n {
            let gap_prev = if i == 0 { sorted[0] } else { sorted[i] - sorted[i - 1] };
            let mut d = 1.0 / gap_prev;
            if i + 1 < n {
                let gap_next = sorted[i + 1] - sorted[i];
                d += 1.0 / gap_next;
                t_off[i] = -nf / gap_next;
            }
            t_diag[i] = nf * d;
        }
        // factor B = I + tau T; B is strictly diagonally dominant, so the
        // eliminations need no pivoting
        let mut b_diag: Vec<f64> = t_diag.iter().map(|&d| 1.0 + tau * d).collect();
        let b_off: Vec<f64> = t_off.iter().map(|&o| tau * o).collect();
        let mut b_mult = vec![0.0f64; n.saturating_sub(1)];
        for i in 1..n {
            let m = b_off[i - 1] / b_diag[i - 1];
            b_mult[i - 1] = m;
            b_diag[i] -= m * b_off[i - 1];
        }
        let identity = order.iter().enumerate().all(|(pos, &i)| pos == i);
        Ok(Some(MinTridiagSolver {
            tau,
            perm: (!identity).then_some(order),
            t_diag,
            t_off,
            b_diag,
            b_mult,
            b_off,
        }))
    }

    fn to_sorted(&self, v: &Array1<f64>) -> Vec<f64> {
        match &self.perm {
            None => v.to_vec(),
            Some(p) => p.iter().map(|&i| v[i]).collect(),
        }
    }

    fn from_sorted(&self, v: Vec<f64>) -> Array1<f64> {
        match &self.perm {
            None => Array1::from_vec(v),
            Some(p) => {
                let mut out = vec![0.0f64; v.len()];
                for (pos, &i) in p.iter().enumerate() {
                    out[i] = v[pos];
                }
                Array1::from_vec(out)
            }
        }
    }

    fn dual_sorted(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        // w = T r
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let mut s = self.t_diag[i] * r[i];
            if i > 0 {
                s += self.t_off[i - 1] * r[i - 1];
            }
            if i + 1 < n {
                s += self.t_off[i] * r[i + 1];
            }
            w[i] = s;
        }
        // solve B a = w with the stored factorization
        for i in 1..n {
            let carry = self.b_mult[i - 1] * w[i - 1];
            w[i] -= carry;
        }
        let mut a = vec![0.0f64; n];
        a[n - 1] = w[n - 1] / self.b_diag[n - 1];
        for i in (0..n - 1).rev() {
            a[i] = (w[i] - self.b_off[i] * a[i + 1]) / self.b_diag[i];
        }
        a
    }

    fn apply(&self, residual: &Array1<f64>) -> SolveOut {
        let r = self.to_sorted(residual);
        let a = self.dual_sorted(&r);
        let fitted: Vec<f64> = a.iter().zip(&r).map(|(&ai, &ri)| ri - self.tau * ai).collect();
        let hnorm2 =
            (a.iter().zip(&fitted).map(|(&ai, &fi)| ai * fi).sum::<f64>() / r.len() as f64).max(0.0);
        SolveOut { fitted: self.from_sorted(fitted), hnorm2 }
    }

    fn dual(&self, residual: &Array1<f64>) -> Array1<f64> {
        let r = self.to_sorted(residual);
        self.from_sorted(self.dual_sorted(&r))
    }
}
