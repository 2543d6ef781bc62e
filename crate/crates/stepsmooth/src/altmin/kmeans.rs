//! Exact one-dimensional k-means and Lloyd's algorithm for vector levels.

use ndarray::prelude::*;
use rand::Rng;

use crate::{Error, Result};

/// Result of a k-means run. `mu` holds the cluster means (ascending in the
/// scalar case, by construction), `z` the zero-based assignment, `sse` the
/// within-cluster sum of squares.
#[derive(Debug, Clone)]
pub struct Kmeans1d {
    pub mu: Vec<f64>,
    pub z: Vec<usize>,
    pub sse: f64,
}

/// Globally optimal one-dimensional M-means.
///
/// Optimal 1-D clusters are intervals of the sorted values, so the problem
/// is a segmentation DP. Each layer is filled with divide-and-conquer over
/// the monotone split positions (the interval cost satisfies the concave
/// quadrangle inequality), giving O(M n log n) instead of the quadratic scan.
/// Returned cluster indices are in increasing order of mean.
pub fn kmeans_1d_exact(values: &[f64], m: usize) -> Result<Kmeans1d> {
    let n = values.len();
    if m == 0 {
        return Err(Error::InvalidInput("class count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!("cannot split {n} values into {m} clusters")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    // prefix sums for interval costs
    let mut s1 = vec![0.0f64; n + 1];
    let mut s2 = vec![0.0f64; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    // within-segment sum of squares for sorted[a..=b]
    let cost = |a: usize, b: usize| -> f64 {
        let len = (b + 1 - a) as f64;
        let s = s1[b + 1] - s1[a];
        let q = s2[b + 1] - s2[a];
        (q - s * s / len).max(0.0)
    };

    let mut prev: Vec<f64> = (0..n).map(|j| cost(0, j)).collect();
    let mut splits: Vec<Vec<usize>> = Vec::with_capacity(m);
    splits.push(vec![0; n]);
    for layer in 1..m {
        let mut cur = vec![f64::INFINITY; n];
        let mut split = vec![0usize; n];
        fill_layer(&prev, &cost, layer, n - 1, &mut cur, &mut split);
        prev = cur;
        splits.push(split);
    }
    let sse = prev[n - 1];

    // backtrack segment boundaries
    let mut z_sorted = vec![0usize; n];
    let mut mu = vec![0.0f64; m];
    let mut hi = n - 1;
    for layer in (0..m).rev() {
        let lo = if layer == 0 { 0 } else { splits[layer][hi] };
        let len = (hi + 1 - lo) as f64;
        mu[layer] = (s1[hi + 1] - s1[lo]) / len;
        for slot in z_sorted.iter_mut().take(hi + 1).skip(lo) {
            *slot = layer;
        }
        if layer > 0 {
            hi = lo - 1;
        }
    }
    let mut z = vec![0usize; n];
    for (rank, &orig) in order.iter().enumerate() {
        z[orig] = z_sorted[rank];
    }
    Ok(Kmeans1d { mu, z, sse })
}

/// Fill `cur[j] = min_{t in [layer, j]} prev[t-1] + cost(t, j)` for
/// `j in layer..=jmax`, recording the minimizing `t` (ties to the smallest).
/// Relies on the split argmin being nondecreasing in `j`.
fn fill_layer(
    prev: &[f64],
    cost: &impl Fn(usize, usize) -> f64,
    layer: usize,
    jmax: usize,
    cur: &mut [f64],
    split: &mut [usize],
) {
    fn rec(
        prev: &[f64],
        cost: &impl Fn(usize, usize) -> f64,
        jlo: usize,
        jhi: usize,
        tlo: usize,
        thi: usize,
        cur: &mut [f64],
        split: &mut [usize],
    ) {
        if jlo > jhi {
            return;
        }
        let jm = jlo + (jhi - jlo) / 2;
        let mut best_t = tlo;
        let mut best = f64::INFINITY;
        for t in tlo..=thi.min(jm) {
            let v = prev[t - 1] + cost(t, jm);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        cur[jm] = best;
        split[jm] = best_t;
        if jm > jlo {
            rec(prev, cost, jlo, jm - 1, tlo, best_t, cur, split);
        }
        if jm < jhi {
            rec(prev, cost, jm + 1, jhi, best_t, thi, cur, split);
        }
    }
    rec(prev, cost, layer, jmax, layer, jmax, cur, split);
}

/// Result of Lloyd's algorithm on vector-valued data.
#[derive(Debug, Clone)]
pub struct KmeansVec {
    /// M x p matrix of cluster centers.
    pub mu: Array2<f64>,
    pub z: Vec<usize>,
    pub sse: f64,
}

/// Lloyd's algorithm with k-means++ initialization, ten restarts, and an
/// optional warm start evaluated as an extra candidate. Deterministic given
/// the generator state. An emptied cluster is reseeded at the point farthest
/// from its assigned center.
pub fn kmeans_lloyd_with<R: Rng>(
    points: ArrayView2<'_, f64>,
    m: usize,
    rng: &mut R,
    warm: Option<ArrayView2<'_, f64>>,
) -> Result<KmeansVec> {
    let n = points.nrows();
    if m == 0 {
        return Err(Error::InvalidInput("class count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!("cannot split {n} points into {m} clusters")));
    }
    let mut best: Option<KmeansVec> = None;
    let mut consider = |candidate: KmeansVec| {
        if best.as_ref().is_none_or(|b| candidate.sse < b.sse) {
            best = Some(candidate);
        }
    };
    if let Some(centers) = warm {
        consider(lloyd(points, centers.to_owned()));
    }
    for _ in 0..10 {
        let centers = kmeanspp_init(points, m, rng);
        consider(lloyd(points, centers));
    }
    Ok(best.expect("at least one restart ran"))
}

/// Seeded entry point matching the operation contract.
pub fn kmeans_lloyd(points: ArrayView2<'_, f64>, m: usize, seed: u64) -> Result<KmeansVec> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    kmeans_lloyd_with(points, m, &mut rng, None)
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeanspp_init<R: Rng>(points: ArrayView2<'_, f64>, m: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let p = points.ncols();
    let mut centers = Array2::<f64>::zeros((m, p));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centers.row(0))).collect();
    for k in 1..m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(k).assign(&points.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(points.row(i), centers.row(k)));
        }
    }
    centers
}

fn lloyd(points: ArrayView2<'_, f64>, mut centers: Array2<f64>) -> KmeansVec {
    let n = points.nrows();
    let p = points.ncols();
    let m = centers.nrows();
    let mut z = vec![usize::MAX; n];
    for _ in 0..100 {
        // assignment step; ties go to the lowest index
        let mut new_z = vec![0usize; n];
        let mut dist = vec![0.0f64; n];
        for i in 0..n {
            let mut best_k = 0usize;
            let mut best = f64::INFINITY;
            for k in 0..m {
                let d = sq_dist(points.row(i), centers.row(k));
                if d < best {
                    best = d;
                    best_k = k;
                }
            }
            new_z[i] = best_k;
            dist[i] = best;
        }
        // reseed any emptied cluster at the farthest point
        loop {
            let mut counts = vec![0usize; m];
            for &k in &new_z {
                counts[k] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let far = (0..n)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                .expect("nonempty data");
            centers.row_mut(empty).assign(&points.row(far));
            new_z[far] = empty;
            dist[far] = 0.0;
        }
        let stable = new_z == z;
        z = new_z;
        if stable {
            break;
        }
        // update step
        let mut sums = Array2::<f64>::zeros((m, p));
        let mut counts = vec![0usize; m];
        for i in 0..n {
            let k = z[i];
            counts[k] += 1;
            let mut row = sums.row_mut(k);
            row += &points.row(i);
        }
        for k in 0..m {
            let c = counts[k].max(1) as f64;
            let mut row = sums.row_mut(k);
            row /= c;
        }
        centers = sums;
    }
    let sse: f64 = (0..n).map(|i| sq_dist(points.row(i), centers.row(z[i]))).sum();
    KmeansVec { mu: centers, z, sse }
}
