//! The alternating estimator: kernel ridge regression on the smooth
//! component interleaved with k-means on the step component.

mod kmeans;
mod krr;

pub use kmeans::{kmeans_1d_exact, kmeans_lloyd, kmeans_lloyd_with, Kmeans1d, KmeansVec};
pub use krr::{krr_step, KrrStep};

use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{eval_kernel, gram_matrix, KernelSpec, PointCloud};
use crate::{Error, Result};
use krr::Solver;

/// Ground-truth components attached to simulated data.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Smooth component sampled at the design points.
    pub f: Array1<f64>,
    /// True levels, M x p.
    pub mu: Array2<f64>,
    /// True zero-based labels.
    pub z: Vec<usize>,
    pub sigma2: f64,
}

/// Sample locations plus observed values; `y` is n x p with p = 1 in scalar
/// mode.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: PointCloud,
    pub y: Array2<f64>,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: PointCloud, y: Array2<f64>, truth: Option<GroundTruth>) -> Result<Self> {
        if y.nrows() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} points",
                y.nrows(),
                x.len()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidInput("need at least one observation channel".into()));
        }
        Ok(Dataset { x, y, truth })
    }

    pub fn scalar(x: PointCloud, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        let y = Array2::from_shape_vec((n, 1), y).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Dataset::new(x, y, None)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Number of observation channels.
    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn y_scalar(&self) -> Result<ArrayView1<'_, f64>> {
        if self.p() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected scalar observations, got {} channels",
                self.p()
            )));
        }
        Ok(self.y.column(0))
    }
}

/// Knobs of the alternation loop.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative objective decrease below which the loop stops.
    pub tol: f64,
    /// Drives the Lloyd restarts in multi-sequence mode; scalar fits are
    /// deterministic regardless.
    pub seed: u64,
    /// Optional warm start `(mu, z)` replacing the k-means initialization.
    pub initial: Option<(Array2<f64>, Vec<usize>)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 200, tol: 1e-8, seed: 0, initial: None }
    }
}

/// A fitted decomposition. `fitted_f` and `mu` are reported after the
/// zero-mean adjustment; `shift` records the constant moved from the smooth
/// part into the levels, which out-of-sample prediction must subtract.
#[derive(Debug, Clone)]
pub struct DecompositionFit {
    pub alpha: Array1<f64>,
    pub fitted_f: Array1<f64>,
    /// Levels, M x p.
    pub mu: Array2<f64>,
    pub z: Vec<usize>,
    pub tau: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub shift: f64,
}

impl DecompositionFit {
    pub fn m(&self) -> usize {
        self.mu.nrows()
    }

    pub fn mu_scalar(&self) -> Result<Vec<f64>> {
        if self.mu.ncols() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "levels have {} channels",
                self.mu.ncols()
            )));
        }
        Ok(self.mu.column(0).to_vec())
    }
}

/// Move the empirical mean of the fitted smooth values into the levels, the
/// canonical resolution of the scalar-shift ambiguity between the two
/// components. Leaves the objective unchanged.
pub fn zero_mean_adjust(mut fit: DecompositionFit) -> DecompositionFit {
    let n = fit.fitted_f.len();
    if n == 0 {
        return fit;
    }
    let c = fit.fitted_f.sum() / n as f64;
    fit.fitted_f.mapv_inplace(|v| v - c);
    fit.mu.mapv_inplace(|v| v + c);
    fit.shift += c;
    fit
}

/// Fit the scalar decomposition by alternating the level update (exact
/// one-dimensional k-means on `y - fitted_f`) with the ridge update (KRR on
/// `y - mu_z`), starting from `fitted_f = 0` so the first level step runs on
/// the raw observations. Stops once the relative objective decrease falls
/// below `tol` or after `max_iter` iterations; non-convergence returns the
/// best iterate with `converged = false`.
pub fn altmin_fit(
    data: &Dataset,
    spec: &KernelSpec,
    m: usize,
    tau: f64,
    opts: &FitOptions,
) -> Result<DecompositionFit> {
    let y = data.y_scalar()?.to_owned();
    let solver = Solver::for_cloud(spec, &data.x, tau)?;
    run_fit(&y.insert_axis(Axis(1)), solver, m, opts, true)
}

/// Multi-sequence variant: a single scalar smooth component shared across
/// `p >= 2` channels with channel-specific levels. The ridge step fits the
/// channel average of `y - mu_z`, the level step runs Lloyd's algorithm on
/// the n x p residual matrix (warm-started from the previous levels so the
/// objective stays monotone). Multiplicative data must be log-transformed
/// first.
pub fn altmin_fit_multiseq(
    data: &Dataset,
    spec: &KernelSpec,
    m: usize,
    tau: f64,
    opts: &FitOptions,
) -> Result<DecompositionFit> {
    if data.p() < 2 {
        return Err(Error::InvalidInput(
            "multi-sequence fit needs at least two channels; use altmin_fit for scalars".into(),
        ));
    }
    let solver = Solver::for_cloud(spec, &data.x, tau)?;
    run_fit(&data.y, solver, m, opts, false)
}

fn run_fit(
    y: &Array2<f64>,
    solver: Solver,
    m: usize,
    opts: &FitOptions,
    scalar: bool,
) -> Result<DecompositionFit> {
    let n = y.nrows();
    let p = y.ncols();
    let tau = solver.tau();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("cannot fit {m} levels to {n} points")));
    }
    if let Some((mu0, z0)) = &opts.initial {
        if mu0.nrows() != m || mu0.ncols() != p || z0.len() != n {
            return Err(Error::DimensionMismatch("warm start has wrong shape".into()));
        }
        if z0.iter().any(|&z| z >= m) {
            return Err(Error::InvalidInput("warm start label out of range".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut fitted = Array1::<f64>::zeros(n);
    let mut mu = Array2::<f64>::zeros((m, p));
    let mut z = vec![0usize; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut last_residual = Array1::<f64>::zeros(n);
    let mut warm = opts.initial.clone();

    for iter in 0..opts.max_iter {
        // level step
        if let Some((mu0, z0)) = warm.take() {
            mu = mu0;
            z = z0;
        } else if scalar {
            let input: Vec<f64> = (0..n).map(|i| y[[i, 0]] - fitted[i]).collect();
            let km = kmeans_1d_exact(&input, m)?;
            mu = Array2::from_shape_vec((m, 1), km.mu).expect("m rows");
            z = km.z;
        } else {
            let residual = y - &fitted.view().insert_axis(Axis(1));
            let prev = (iter > 0).then_some(mu.view());
            let km = kmeans_lloyd_with(residual.view(), m, &mut rng, prev)?;
            mu = km.mu;
            z = km.z;
        }

        // ridge step on the channel average of y - mu_z
        let mut r = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for c in 0..p {
                acc += y[[i, c]] - mu[[z[i], c]];
            }
            r[i] = acc / p as f64;
        }
        let out = solver.apply(&r);
        fitted = out.fitted;

        let mut datafit = 0.0;
        for i in 0..n {
            for c in 0..p {
                let e = y[[i, c]] - mu[[z[i], c]] - fitted[i];
                datafit += e * e;
            }
        }
        datafit /= (n * p) as f64;
        let obj = datafit + tau * out.hnorm2;
        let done = iter > 0 && {
            let prev = trace[trace.len() - 1];
            prev - obj <= opts.tol * prev.abs().max(f64::MIN_POSITIVE)
        };
        trace.push(obj);
        last_residual = r;
        if done {
            converged = true;
            break;
        }
    }

    // canonical cluster order: increasing first-channel mean
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| mu[[a, 0]].total_cmp(&mu[[b, 0]]));
    let mut rank = vec![0usize; m];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
    }
    let mu_sorted = Array2::from_shape_fn((m, p), |(k, c)| mu[[order[k], c]]);
    let z_sorted: Vec<usize> = z.iter().map(|&k| rank[k]).collect();

    let alpha = solver.dual(&last_residual) / (n as f64).sqrt();
    let fit = DecompositionFit {
        alpha,
        fitted_f: fitted,
        mu: mu_sorted,
        z: z_sorted,
        tau,
        objective_trace: trace,
        converged,
        shift: 0.0,
    };
    Ok(zero_mean_adjust(fit))
}

/// Out-of-sample value of the fitted smooth component at `x_new`:
/// the kernel expansion of the dual coefficients minus the stored zero-mean
/// shift. Agrees with `fitted_f` at the training points.
pub fn predict_f(
    fit: &DecompositionFit,
    spec: &KernelSpec,
    x_train: &PointCloud,
    x_new: &[f64],
) -> Result<f64> {
    let n = x_train.len();
    if fit.alpha.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} dual coefficients for {n} training points",
            fit.alpha.len()
        )));
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += fit.alpha[i] * eval_kernel(spec, x_train.point(i), x_new)?;
    }
    Ok(acc / (n as f64).sqrt() - fit.shift)
}

/// Elementwise natural log of strictly positive values; the additive model
/// for multiplicative data.
pub fn log_transform(y: &Array2<f64>) -> Result<Array2<f64>> {
    for (idx, &v) in y.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::NonPositiveEntry { index: idx, value: v });
        }
    }
    Ok(y.mapv(f64::ln))
}

/// Inverse of [`log_transform`].
pub fn inverse_log_transform(y: &Array2<f64>) -> Array2<f64> {
    y.mapv(f64::exp)
}

/// Pick the regularization from a grid by an 80/20 random holdout: fit on
/// the training split, score the mean squared prediction error of the
/// smooth prediction plus the nearest fitted level on the holdout, and
/// return the best grid point, breaking ties toward more regularization.
pub fn select_tau(
    data: &Dataset,
    spec: &KernelSpec,
    m: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("tau grid is empty".into()));
    }
    if grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidInput("tau grid entries must be positive".into()));
    }
    let mut grid_sorted = grid.to_vec();
    grid_sorted.sort_by(f64::total_cmp);
    if grid_sorted.len() == 1 {
        return Ok(grid_sorted[0]);
    }

    let n = data.n();
    let p = data.p();
    let n_hold = ((0.2 * n as f64).round() as usize).max(1);
    if n - n_hold < m.max(1) {
        return Err(Error::InvalidInput(format!(
            "cannot hold out {n_hold} of {n} points and still fit {m} levels"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut holdout = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();

    let x_train = PointCloud::new(data.x.points().select(Axis(0), &train))
        .expect("train split is nonempty");
    let y_train = data.y.select(Axis(0), &train);
    let train_data = Dataset::new(x_train, y_train, None)?;

    let mut best_tau = grid_sorted[0];
    let mut best_score = f64::INFINITY;
    for (gi, &tau) in grid_sorted.iter().enumerate() {
        let opts = FitOptions { seed: seed.wrapping_add(gi as u64), ..FitOptions::default() };
        let fit = if p == 1 {
            altmin_fit(&train_data, spec, m, tau, &opts)?
        } else {
            altmin_fit_multiseq(&train_data, spec, m, tau, &opts)?
        };
        let mut score = 0.0;
        for &i in &holdout {
            let pred = predict_f(&fit, spec, &train_data.x, data.x.point(i))?;
            // nearest fitted level for the residual
            let mut best_k = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..m {
                let mut d = 0.0;
                for c in 0..p {
                    let e = data.y[[i, c]] - pred - fit.mu[[k, c]];
                    d += e * e;
                }
                if d < best_d {
                    best_d = d;
                    best_k = k;
                }
            }
            for c in 0..p {
                let e = data.y[[i, c]] - pred - fit.mu[[best_k, c]];
                score += e * e;
            }
        }
        score /= (holdout.len() * p) as f64;
        // ascending grid plus non-strict comparison break ties toward larger tau
        if score <= best_score {
            best_score = score;
            best_tau = tau;
        }
    }
    Ok(best_tau)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn sin_component(x: f64, beta: f64) -> f64 {
        0.75 * (2.0 * std::f64::consts::PI * beta * x).sin()
    }

    /// Noiseless two-level instance on the equispaced design.
    fn toy_instance(n: usize, beta: f64, seed: u64) -> (Dataset, Vec<usize>, Vec<f64>) {
        let x = PointCloud::equispaced(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = vec![-0.5, 0.5];
        let z: Vec<usize> = loop {
            let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            if z.contains(&0) && z.contains(&1) {
                break z;
            }
        };
        let y: Vec<f64> = (0..n)
            .map(|i| sin_component((i + 1) as f64 / n as f64, beta) + mu[z[i]])
            .collect();
        let data = Dataset::scalar(x, y).unwrap();
        (data, z, mu)
    }

    fn accuracy(a: &[usize], b: &[usize]) -> f64 {
        crate::identifiability::canonical_labeling(a)
            .iter()
            .zip(crate::identifiability::canonical_labeling(b))
            .filter(|(x, y)| **x == y.clone())
            .count() as f64
            / a.len() as f64
    }

    #[test]
    fn truth_initialization_is_a_fixed_point() {
        let (data, z_star, mu) = toy_instance(200, 1.0, 3);
        let init_mu = Array2::from_shape_vec((2, 1), mu.clone()).unwrap();
        let opts = FitOptions {
            initial: Some((init_mu, z_star.clone())),
            ..FitOptions::default()
        };
        let fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-7, &opts).unwrap();
        // labels never leave the truth and the objective is stationary
        assert_eq!(fit.z, z_star);
        let first = fit.objective_trace[0];
        let last = *fit.objective_trace.last().unwrap();
        assert!(last <= first);
        assert!(first - last <= 1e-3 * first);
        assert!(last < 1e-5, "noiseless objective should sit at the noise floor, got {last}");
    }

    #[test]
    fn recovers_noiseless_two_level_instance() {
        let (data, z_star, _) = toy_instance(400, 1.0, 7);
        let fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-3, &FitOptions::default()).unwrap();
        assert_eq!(accuracy(&fit.z, &z_star), 1.0);
    }

    #[test]
    fn constant_observations_single_level() {
        let x = PointCloud::equispaced(20).unwrap();
        let data = Dataset::scalar(x, vec![2.5; 20]).unwrap();
        let fit = altmin_fit(&data, &KernelSpec::Min, 1, 1e-4, &FitOptions::default()).unwrap();
        for &f in fit.fitted_f.iter() {
            assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(fit.mu[[0, 0]], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for trial in 0..10 {
            let n = rng.random_range(20..80);
            let x = PointCloud::equispaced(n).unwrap();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let data = Dataset::scalar(x, y).unwrap();
            let tau = 10f64.powf(rng.random_range(-8.0..0.0));
            let m = rng.random_range(1..=3);
            let fit = altmin_fit(&data, &KernelSpec::Min, m, tau, &FitOptions::default()).unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "trial {trial}: trace increased {w:?}");
            }
        }
    }

    #[test]
    fn shift_equivariance() {
        let (data, _, _) = toy_instance(150, 2.0, 11);
        let fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-5, &FitOptions::default()).unwrap();
        let shifted_y: Vec<f64> = data.y.column(0).iter().map(|v| v + 4.0).collect();
        let shifted = Dataset::scalar(data.x.clone(), shifted_y).unwrap();
        let fit2 = altmin_fit(&shifted, &KernelSpec::Min, 2, 1e-5, &FitOptions::default()).unwrap();
        assert_eq!(fit.z, fit2.z);
        for i in 0..data.n() {
            assert_abs_diff_eq!(fit.fitted_f[i], fit2.fitted_f[i], epsilon = 1e-8);
        }
        for k in 0..2 {
            assert_abs_diff_eq!(fit.mu[[k, 0]] + 4.0, fit2.mu[[k, 0]], epsilon = 1e-8);
        }
    }

    #[test]
    fn initialization_permutation_is_absorbed() {
        let (data, z_star, mu) = toy_instance(100, 1.0, 21);
        let forward = Array2::from_shape_vec((2, 1), mu.clone()).unwrap();
        let swapped = Array2::from_shape_vec((2, 1), vec![mu[1], mu[0]]).unwrap();
        let z_swapped: Vec<usize> = z_star.iter().map(|&z| 1 - z).collect();
        let a = altmin_fit(
            &data,
            &KernelSpec::Min,
            2,
            1e-6,
            &FitOptions { initial: Some((forward, z_star.clone())), ..FitOptions::default() },
        )
        .unwrap();
        let b = altmin_fit(
            &data,
            &KernelSpec::Min,
            2,
            1e-6,
            &FitOptions { initial: Some((swapped, z_swapped)), ..FitOptions::default() },
        )
        .unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.mu, b.mu);
    }

    #[test]
    fn zero_mean_examples() {
        let fit = DecompositionFit {
            alpha: array![0.0, 0.0],
            fitted_f: array![0.1, 0.5],
            mu: array![[0.0], [1.0]],
            z: vec![0, 1],
            tau: 0.1,
            objective_trace: vec![1.0],
            converged: true,
            shift: 0.0,
        };
        let adjusted = zero_mean_adjust(fit);
        assert_abs_diff_eq!(adjusted.fitted_f[0], -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted.fitted_f[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted.mu[[0, 0]], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted.mu[[1, 0]], 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted.shift, 0.3, epsilon = 1e-15);

        // already zero-mean: identity up to rounding
        let again = zero_mean_adjust(adjusted.clone());
        for (a, b) in again.fitted_f.iter().zip(adjusted.fitted_f.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        for (a, b) in again.mu.iter().zip(adjusted.mu.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn fits_are_empirically_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let n = rng.random_range(10..60);
            let x = PointCloud::equispaced(n).unwrap();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let data = Dataset::scalar(x, y).unwrap();
            let fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-4, &FitOptions::default()).unwrap();
            let mean = fit.fitted_f.sum() / n as f64;
            assert!(mean.abs() <= 1e-12);
        }
    }

    #[test]
    fn prediction_agrees_with_fitted_values() {
        let (data, _, _) = toy_instance(120, 1.0, 5);
        let fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-6, &FitOptions::default()).unwrap();
        for j in [0usize, 37, 119] {
            let pred = predict_f(&fit, &KernelSpec::Min, &data.x, data.x.point(j)).unwrap();
            assert_abs_diff_eq!(pred, fit.fitted_f[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn prediction_with_zero_coefficients_returns_negative_shift() {
        let fit = DecompositionFit {
            alpha: array![0.0, 0.0, 0.0],
            fitted_f: array![0.0, 0.0, 0.0],
            mu: array![[1.0]],
            z: vec![0, 0, 0],
            tau: 0.5,
            objective_trace: vec![],
            converged: true,
            shift: 0.7,
        };
        let x = PointCloud::from_scalars(&[0.1, 0.2, 0.3]).unwrap();
        let pred = predict_f(&fit, &KernelSpec::Min, &x, &[0.5]).unwrap();
        assert_abs_diff_eq!(pred, -0.7, epsilon = 1e-15);
    }

    #[test]
    fn prediction_at_origin_sees_only_the_shift() {
        // min(x, 0) = 0, so the expansion vanishes at zero
        let fit = DecompositionFit {
            alpha: array![2.0],
            fitted_f: array![0.0],
            mu: array![[0.0]],
            z: vec![0],
            tau: 1.0,
            objective_trace: vec![],
            converged: true,
            shift: 0.25,
        };
        let x = PointCloud::from_scalars(&[0.8]).unwrap();
        let pred = predict_f(&fit, &KernelSpec::Min, &x, &[0.0]).unwrap();
        assert_abs_diff_eq!(pred, -0.25, epsilon = 1e-15);
    }

    #[test]
    fn multiseq_identical_channels_match_scalar_fit() {
        let (data, _, _) = toy_instance(60, 1.0, 9);
        let y1 = data.y.column(0).to_owned();
        let y2 = ndarray::stack![Axis(1), y1, y1];
        let multi = Dataset::new(data.x.clone(), y2, None).unwrap();
        let scalar_fit = altmin_fit(&data, &KernelSpec::Min, 2, 1e-5, &FitOptions::default()).unwrap();
        let multi_fit =
            altmin_fit_multiseq(&multi, &KernelSpec::Min, 2, 1e-5, &FitOptions::default()).unwrap();
        assert_eq!(scalar_fit.z, multi_fit.z);
        for k in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(multi_fit.mu[[k, c]], scalar_fit.mu[[k, 0]], epsilon = 1e-9);
            }
        }
        for i in 0..data.n() {
            assert_abs_diff_eq!(multi_fit.fitted_f[i], scalar_fit.fitted_f[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn multiseq_zero_signal_single_level_gives_column_means() {
        let n = 30;
        let x = PointCloud::equispaced(n).unwrap();
        let y = Array2::from_shape_fn((n, 2), |(_, c)| if c == 0 { 1.5 } else { -2.0 });
        let data = Dataset::new(x, y, None).unwrap();
        let fit =
            altmin_fit_multiseq(&data, &KernelSpec::Min, 1, 1e-4, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.mu[[0, 0]], 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.mu[[0, 1]], -2.0, epsilon = 1e-10);
    }

    #[test]
    fn multiseq_objective_trace_is_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..5 {
            let n = rng.random_range(20..50);
            let x = PointCloud::equispaced(n).unwrap();
            let y = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
            let data = Dataset::new(x, y, None).unwrap();
            let fit =
                altmin_fit_multiseq(&data, &KernelSpec::Min, 2, 1e-4, &FitOptions::default())
                    .unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "trace increased: {w:?}");
            }
        }
    }

    #[test]
    fn log_transform_round_trip() {
        let y = array![[1.0, std::f64::consts::E], [2.0, 4.0]];
        let logged = log_transform(&y).unwrap();
        assert_abs_diff_eq!(logged[[0, 0]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(logged[[0, 1]], 1.0, epsilon = 1e-15);
        let back = inverse_log_transform(&logged);
        for (a, b) in back.iter().zip(y.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // log of a product is the sum of logs
        let f = 1.7f64;
        let mu = 3.1f64;
        let prod = array![[f * mu]];
        let logged = log_transform(&prod).unwrap();
        assert_abs_diff_eq!(logged[[0, 0]], f.ln() + mu.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_transform_rejects_nonpositive_with_index() {
        let y = array![[1.0, 2.0], [0.0, 3.0]];
        match log_transform(&y) {
            Err(Error::NonPositiveEntry { index, value }) => {
                assert_eq!(index, 2);
                assert_eq!(value, 0.0);
            }
            other => panic!("expected NonPositiveEntry, got {other:?}"),
        }
    }

    #[test]
    fn select_tau_single_element_grid() {
        let (data, _, _) = toy_instance(30, 1.0, 2);
        let tau = select_tau(&data, &KernelSpec::Min, 2, &[0.037], 5).unwrap();
        assert_eq!(tau, 0.037);
    }

    #[test]
    fn select_tau_prefers_heavy_regularization_on_pure_noise() {
        // no signal at all: anything but heavy shrinkage chases noise
        let n = 80;
        let anchor = (1.0f64 / (4.0 * n as f64)).sqrt();
        let grid: Vec<f64> = (0..5).map(|k| anchor * 10f64.powi(k - 4)).collect();
        let mut largest = 0usize;
        for seed in 0..10u64 {
            let x = PointCloud::equispaced(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let y: Vec<f64> =
                (0..n).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
            let data = Dataset::scalar(x, y).unwrap();
            let tau = select_tau(&data, &KernelSpec::Min, 1, &grid, seed).unwrap();
            if tau == grid[4] {
                largest += 1;
            }
        }
        assert!(largest >= 6, "largest tau selected only {largest}/10 times");
    }

    #[test]
    fn select_tau_tracks_the_oracle() {
        // noisy instance; the selected tau must be near-oracle in truth error
        let n = 200;
        let x = PointCloud::equispaced(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mu = [-0.5, 0.5];
        let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let sigma = 0.05f64.sqrt();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let noise: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                sin_component((i + 1) as f64 / n as f64, 1.0) + mu[z[i]] + sigma * noise
            })
            .collect();
        let truth: Vec<f64> = (0..n)
            .map(|i| sin_component((i + 1) as f64 / n as f64, 1.0) + mu[z[i]])
            .collect();
        let data = Dataset::scalar(x, y).unwrap();
        let grid = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
        let chosen = select_tau(&data, &KernelSpec::Min, 2, &grid, 4).unwrap();

        let oracle_score = |tau: f64| {
            let fit = altmin_fit(&data, &KernelSpec::Min, 2, tau, &FitOptions::default()).unwrap();
            let mut mse = 0.0;
            for i in 0..n {
                let e = fit.fitted_f[i] + fit.mu[[fit.z[i], 0]] - truth[i];
                mse += e * e;
            }
            mse / n as f64
        };
        let chosen_score = oracle_score(chosen);
        let best_score = grid.iter().map(|&t| oracle_score(t)).fold(f64::INFINITY, f64::min);
        assert!(
            chosen_score <= 1.1 * best_score + 1e-12,
            "chosen {chosen:e} scores {chosen_score:.3e}, oracle best {best_score:.3e}"
        );
    }
}
