//! Neighbor graphs, connectivity radii, cluster distances and label distances.

use ndarray::prelude::*;

use crate::{Error, Result};

/// The graph on `[n]` connecting every pair at distance `<= rho`.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    n: usize,
    rho: f64,
    edges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Edges as unordered pairs `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        for &(i, j) in &self.edges {
            uf.union(i, j);
        }
        uf.component_count() == 1
    }
}

/// A partition of `[n]` into `M` nonempty clusters; every label is attained.
#[derive(Debug, Clone)]
pub struct ClusterPartition {
    clusters: Vec<Vec<usize>>,
    n: usize,
}

impl ClusterPartition {
    /// Build from zero-based labels; all of `0..m` must be attained.
    pub fn from_labels(labels: &[usize], m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPartition("class count must be at least 1".into()));
        }
        let mut clusters = vec![Vec::new(); m];
        for (i, &z) in labels.iter().enumerate() {
            if z >= m {
                return Err(Error::InvalidPartition(format!(
                    "label {z} at index {i} is outside 0..{m}"
                )));
            }
            clusters[z].push(i);
        }
        if let Some(k) = clusters.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidPartition(format!("cluster {k} is empty")));
        }
        Ok(ClusterPartition { clusters, n: labels.len() })
    }

    pub fn class_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cluster(&self, k: usize) -> &[usize] {
        &self.clusters[k]
    }
}

fn validate_dist(dist: &Array2<f64>) -> Result<()> {
    let n = dist.nrows();
    if n != dist.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix must be square, got {}x{}",
            n,
            dist.ncols()
        )));
    }
    for i in 0..n {
        if dist[[i, i]] != 0.0 {
            return Err(Error::InvalidInput(format!("distance matrix has nonzero diagonal at {i}")));
        }
        for j in (i + 1)..n {
            if dist[[i, j]] != dist[[j, i]] {
                return Err(Error::InvalidInput(format!("distance matrix asymmetric at ({i}, {j})")));
            }
            if dist[[i, j]] < 0.0 {
                return Err(Error::InvalidInput(format!("negative distance at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Threshold graph: edge `(i, j)` present iff `dist(i, j) <= rho`.
pub fn neighbor_graph(dist: &Array2<f64>, rho: f64) -> Result<NeighborGraph> {
    validate_dist(dist)?;
    if rho < 0.0 {
        return Err(Error::InvalidInput(format!("radius must be nonnegative, got {rho}")));
    }
    let n = dist.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist[[i, j]] <= rho {
                edges.push((i, j));
            }
        }
    }
    Ok(NeighborGraph { n, rho, edges })
}

/// An edge of a minimum spanning tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Minimum spanning tree of the complete graph given by a dense distance
/// matrix, via Prim's algorithm in O(n^2). Ties break toward the smaller
/// vertex index; the bottleneck value is tie-invariant.
pub fn minimum_spanning_tree(dist: &Array2<f64>) -> Vec<MstEdge> {
    let n = dist.nrows();
    if n <= 1 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = dist[[0, j]];
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (pick == usize::MAX || best[j] < best[pick]) {
                pick = j;
            }
        }
        let (a, b) = (parent[pick].min(pick), parent[pick].max(pick));
        edges.push(MstEdge { i: a, j: b, weight: best[pick] });
        in_tree[pick] = true;
        for j in 0..n {
            if !in_tree[j] && dist[[pick, j]] < best[j] {
                best[j] = dist[[pick, j]];
                parent[j] = pick;
            }
        }
    }
    edges
}

/// The connectivity radius: the smallest `rho` for which the neighbor graph
/// is connected. Equals the largest edge weight of a minimum spanning tree
/// (zero for a single point), and is attained because edges use `<=`.
pub fn connectivity_radius(dist: &Array2<f64>) -> Result<f64> {
    validate_dist(dist)?;
    let bottleneck = minimum_spanning_tree(dist)
        .iter()
        .map(|e| e.weight)
        .fold(0.0f64, f64::max);
    Ok(bottleneck)
}

/// Matrix of single-linkage distances between clusters:
/// entry `(k, l)` is the minimum of `dist(i, j)` over `i` in cluster `k`,
/// `j` in cluster `l`; the diagonal is zero.
pub fn cluster_distances(dist: &Array2<f64>, part: &ClusterPartition) -> Result<Array2<f64>> {
    validate_dist(dist)?;
    if part.n() != dist.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} points but distance matrix has {}",
            part.n(),
            dist.nrows()
        )));
    }
    let m = part.class_count();
    let mut out = Array2::<f64>::zeros((m, m));
    for k in 0..m {
        for l in (k + 1)..m {
            let mut min = f64::INFINITY;
            for &i in part.cluster(k) {
                for &j in part.cluster(l) {
                    let d = dist[[i, j]];
                    if d < min {
                        min = d;
                    }
                }
            }
            out[[k, l]] = min;
            out[[l, k]] = min;
        }
    }
    Ok(out)
}

/// The label distance: the smallest tolerance at which the cluster-level
/// neighbor graph is connected, i.e. the MST bottleneck of the cluster
/// distance matrix. Zero when there is a single cluster.
pub fn label_distance(dist: &Array2<f64>, part: &ClusterPartition) -> Result<f64> {
    let cluster_dist = cluster_distances(dist, part)?;
    Ok(minimum_spanning_tree(&cluster_dist)
        .iter()
        .map(|e| e.weight)
        .fold(0.0f64, f64::max))
}

/// Array-based disjoint set with union by size and path halving.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n], components: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub fn component_count(&self) -> usize {
        self.components
    }
}
