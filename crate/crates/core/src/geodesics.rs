//! Pairwise distances, the threshold neighbour graph, and geodesic
//! estimation by all-pairs shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayViewMut1};

use crate::error::{FdmError, Result};
use crate::kernels::{DistanceMode, FdmConfig};
use crate::manifolds::{unit_sphere_distance, ManifoldTag, PointCloud};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Euclidean,
    Graph,
    AnalyticGeodesic,
}

/// Dense symmetric matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub kind: DistanceKind,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Wraps a matrix after checking squareness, exact symmetry, zero
    /// diagonal and nonnegative entries.
    pub fn from_values(values: Array2<f64>, kind: DistanceKind) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(FdmError::invalid("distance matrix must be square"));
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(FdmError::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = values[[i, j]];
                if v != values[[j, i]] {
                    return Err(FdmError::invalid(format!("asymmetric entry ({i}, {j})")));
                }
                if !(v >= 0.0) {
                    return Err(FdmError::invalid(format!("negative or NaN entry ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { values, kind })
    }
}

/// Builds a symmetric matrix from `f(i, j)` evaluated for `j < i` only.
fn symmetric_from<F>(exec: Execution, n: usize, f: F) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let mut m = Array2::zeros((n, n));
    par::for_each_row(exec, &mut m, |i, mut row| {
        for j in 0..i {
            row[j] = f(i, j);
        }
    });
    for i in 0..n {
        for j in (i + 1)..n {
            m[[i, j]] = m[[j, i]];
        }
    }
    m
}

pub fn pairwise_euclidean(cloud: &PointCloud) -> Result<DistanceMatrix> {
    pairwise_euclidean_with(cloud, Execution::default())
}

/// `A_ij = |x_i - x_j|`.
pub fn pairwise_euclidean_with(cloud: &PointCloud, exec: Execution) -> Result<DistanceMatrix> {
    let n = cloud.len();
    if n < 2 {
        return Err(FdmError::invalid(format!("need at least 2 points, got {n}")));
    }
    let x = &cloud.ambient;
    let values = symmetric_from(exec, n, |i, j| {
        x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    });
    Ok(DistanceMatrix { values, kind: DistanceKind::Euclidean })
}

/// Weighted undirected graph with per-node neighbour lists sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl SparseGraph {
    /// Builds a graph from an edge list; duplicate edges keep the shortest weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(FdmError::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(FdmError::invalid(format!("self-loop at {a}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(FdmError::invalid(format!("edge ({a}, {b}) has weight {w}")));
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            list.dedup_by_key(|e| e.0);
        }
        Ok(SparseGraph { adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Connected components, labelled in order of their smallest node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Component sizes, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let labels = self.components();
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for l in labels {
            sizes[l] += 1;
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    fn disconnected_error(&self) -> Option<FdmError> {
        let sizes = self.component_sizes();
        if sizes.len() <= 1 {
            return None;
        }
        Some(FdmError::Disconnected {
            components: sizes.len(),
            largest: sizes[0],
            second: sizes[1],
            suggested_threshold: None,
        })
    }
}

/// Edges `(i, j)` for every pair with `0 < A_ij < threshold`.
pub fn epsilon_graph(dist: &DistanceMatrix, threshold: f64) -> Result<SparseGraph> {
    if dist.kind != DistanceKind::Euclidean {
        return Err(FdmError::KindMismatch(format!(
            "the neighbour graph is built from Euclidean distances, got {:?}",
            dist.kind
        )));
    }
    if !(threshold > 0.0) {
        return Err(FdmError::invalid(format!("graph threshold must be positive, got {threshold}")));
    }
    let n = dist.len();
    let adjacency = (0..n)
        .map(|i| {
            dist.values
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &a)| j != i && a > 0.0 && a < threshold)
                .map(|(j, &a)| (j, a))
                .collect()
        })
        .collect();
    Ok(SparseGraph { adjacency })
}

/// Largest edge of a minimum spanning tree of the complete Euclidean graph
/// (Prim, O(N^2)). A neighbour threshold strictly above it yields a connected
/// graph; at or below it the graph is disconnected.
pub fn connecting_threshold(dist: &DistanceMatrix) -> f64 {
    let n = dist.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut longest: f64 = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        longest = longest.max(best[u]);
        for v in 0..n {
            let w = dist.values[[u, v]];
            if !in_tree[v] && w < best[v] {
                best[v] = w;
            }
        }
    }
    longest
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra with a binary heap, writing into `out`.
fn dijkstra_into(graph: &SparseGraph, source: usize, mut out: ArrayViewMut1<'_, f64>) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let mut heap = BinaryHeap::with_capacity(graph.node_count());
    heap.push(HeapItem { dist: 0.0, node: source });
    while let Some(HeapItem { dist, node }) = heap.pop() {
        if dist > out[node] {
            continue;
        }
        for &(next, w) in graph.neighbors(node) {
            let cand = dist + w;
            if cand < out[next] {
                out[next] = cand;
                heap.push(HeapItem { dist: cand, node: next });
            }
        }
    }
}

pub fn single_source_shortest_paths(graph: &SparseGraph, source: usize) -> Vec<f64> {
    let mut out = ndarray::Array1::zeros(graph.node_count());
    dijkstra_into(graph, source, out.view_mut());
    out.to_vec()
}

pub fn all_pairs_shortest_paths(graph: &SparseGraph) -> Result<DistanceMatrix> {
    all_pairs_shortest_paths_with(graph, Execution::default())
}

/// Dijkstra from every source. The two directions of each pair are merged
/// with `min` so the result is exactly symmetric regardless of summation
/// order.
pub fn all_pairs_shortest_paths_with(graph: &SparseGraph, exec: Execution) -> Result<DistanceMatrix> {
    if let Some(err) = graph.disconnected_error() {
        return Err(err);
    }
    let n = graph.node_count();
    let mut values = Array2::zeros((n, n));
    par::for_each_row(exec, &mut values, |i, row| dijkstra_into(graph, i, row));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = values[[i, j]].min(values[[j, i]]);
            values[[i, j]] = d;
            values[[j, i]] = d;
        }
    }
    Ok(DistanceMatrix { values, kind: DistanceKind::Graph })
}

/// Great-circle distances between all pairs of a sphere cloud.
pub fn sphere_geodesic_matrix(cloud: &PointCloud, exec: Execution) -> Result<DistanceMatrix> {
    if cloud.tag != ManifoldTag::Sphere {
        return Err(FdmError::invalid(format!(
            "analytic sphere geodesics need a sphere cloud, got {}",
            cloud.tag.name()
        )));
    }
    let x = &cloud.ambient;
    let values = symmetric_from(exec, cloud.len(), |i, j| {
        unit_sphere_distance(x.row(i).as_slice().expect("row"), x.row(j).as_slice().expect("row"))
    });
    Ok(DistanceMatrix { values, kind: DistanceKind::AnalyticGeodesic })
}

/// Geodesic distances by the strategy selected in `config.distance_mode`.
/// `euclidean` may be supplied to avoid recomputing it.
pub fn geodesic_estimate(
    cloud: &PointCloud,
    config: &FdmConfig,
    euclidean: Option<&DistanceMatrix>,
) -> Result<DistanceMatrix> {
    let exec = config.execution;
    match config.distance_mode {
        DistanceMode::AnalyticSphere => sphere_geodesic_matrix(cloud, exec),
        DistanceMode::RawEuclidean => match euclidean {
            Some(d) => Ok(d.clone()),
            None => pairwise_euclidean_with(cloud, exec),
        },
        DistanceMode::GraphDijkstra => {
            let owned;
            let a = match euclidean {
                Some(d) => d,
                None => {
                    owned = pairwise_euclidean_with(cloud, exec)?;
                    &owned
                }
            };
            graph_geodesics(a, config.graph_threshold(), exec)
        }
    }
}

/// Threshold graph followed by all-pairs shortest paths. A disconnected
/// graph is reported with the smallest threshold that would connect it.
pub fn graph_geodesics(euclidean: &DistanceMatrix, threshold: f64, exec: Execution) -> Result<DistanceMatrix> {
    let graph = epsilon_graph(euclidean, threshold)?;
    match all_pairs_shortest_paths_with(&graph, exec) {
        Err(FdmError::Disconnected { components, largest, second, .. }) => Err(FdmError::Disconnected {
            components,
            largest,
            second,
            suggested_threshold: Some(connecting_threshold(euclidean)),
        }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{circle_geodesic, circle_uniform_grid, sphere_icosphere_grid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cloud(points: &[[f64; 2]]) -> PointCloud {
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        PointCloud::external(Array2::from_shape_vec((points.len(), 2), flat).unwrap())
    }

    #[test]
    fn three_four_five() {
        let d = pairwise_euclidean(&cloud(&[[0.0, 0.0], [3.0, 4.0]])).unwrap();
        assert_eq!(d.values[[0, 1]], 5.0);
        assert_eq!(d.values[[1, 0]], 5.0);
        assert_eq!(d.values[[0, 0]], 0.0);
        assert!(pairwise_euclidean(&cloud(&[[0.0, 0.0]])).is_err());
    }

    #[test]
    fn euclidean_matches_double_loop() {
        let pts = [[0.3, -1.2], [2.0, 0.5], [-0.7, 0.1], [1.1, 1.1], [0.0, 0.0], [-2.5, 3.0]];
        let d = pairwise_euclidean_with(&cloud(&pts), Execution::Sequential).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                assert_abs_diff_eq!(d.values[[i, j]], want, epsilon = 1e-14);
            }
        }
        DistanceMatrix::from_values(d.values.clone(), d.kind).unwrap();
    }

    #[test]
    fn threshold_extremes() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]];
        let d = pairwise_euclidean(&cloud(&pts)).unwrap();
        assert_eq!(epsilon_graph(&d, 0.5).unwrap().edge_count(), 0);
        assert_eq!(epsilon_graph(&d, 100.0).unwrap().edge_count(), 6);
        // strict inequality
        assert_eq!(epsilon_graph(&d, 1.0).unwrap().edge_count(), 0);
        assert!(epsilon_graph(&d, 0.0).is_err());
        assert!(epsilon_graph(&d, -1.0).is_err());
    }

    #[test]
    fn circle_grid_neighbour_count() {
        let c = circle_uniform_grid(100).unwrap();
        let d = pairwise_euclidean(&c).unwrap();
        let threshold = 3.0 * 2.0 * PI / 100.0;
        let g = epsilon_graph(&d, threshold).unwrap();
        // k steps apart have chord 2 sin(k pi / N), strictly below the arc k 2 pi / N,
        // so the three-step chord also falls under the threshold.
        let per_side = (1..50).filter(|&k| 2.0 * (k as f64 * PI / 100.0).sin() < threshold).count();
        assert_eq!(per_side, 3);
        for i in 0..100 {
            assert_eq!(g.degree(i), 2 * per_side, "node {i}");
        }
        // just below the three-step chord leaves two per side
        let g = epsilon_graph(&d, 2.0 * (3.0 * PI / 100.0).sin() * (1.0 - 1e-9)).unwrap();
        assert!((0..100).all(|i| g.degree(i) == 4));
    }

    #[test]
    fn path_graph() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let d = all_pairs_shortest_paths(&g).unwrap();
        assert_eq!(d.values[[0, 2]], 2.0);
        assert_eq!(d.kind, DistanceKind::Graph);
    }

    #[test]
    fn square_underestimates_arc() {
        let c = circle_uniform_grid(4).unwrap();
        let d = pairwise_euclidean(&c).unwrap();
        let g = epsilon_graph(&d, 1.5).unwrap();
        let dg = all_pairs_shortest_paths(&g).unwrap();
        // points 0 and 2 are antipodal
        assert_abs_diff_eq!(dg.values[[0, 2]], 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert!(dg.values[[0, 2]] < PI);
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.1, 0.0], [5.2, 0.0]];
        let d = pairwise_euclidean(&cloud(&pts)).unwrap();
        let err = graph_geodesics(&d, 0.5, Execution::Sequential).unwrap_err();
        match err {
            FdmError::Disconnected { components, largest, second, suggested_threshold } => {
                assert_eq!((components, largest, second), (2, 3, 2));
                assert_abs_diff_eq!(suggested_threshold.unwrap(), 4.9, epsilon = 1e-12);
            }
            e => panic!("unexpected {e}"),
        }
        let ok = graph_geodesics(&d, 4.9 + 1e-9, Execution::Sequential).unwrap();
        assert_abs_diff_eq!(ok.values[[0, 4]], 5.2, epsilon = 1e-12);
    }

    #[test]
    fn sphere_bypass_finds_antipodes() {
        let c = sphere_icosphere_grid(2).unwrap();
        let d = sphere_geodesic_matrix(&c, Execution::default()).unwrap();
        let mut antipodal = 0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                let s: f64 = (0..3).map(|k| c.ambient[[i, k]] + c.ambient[[j, k]]).map(|v| v.abs()).sum();
                if s < 1e-9 {
                    assert_abs_diff_eq!(d.values[[i, j]], PI, epsilon = 1e-7);
                    antipodal += 1;
                }
            }
        }
        assert_eq!(antipodal, c.len());
        let circle = circle_uniform_grid(10).unwrap();
        assert!(sphere_geodesic_matrix(&circle, Execution::default()).is_err());
    }

    #[test]
    fn dispatch_raw_euclidean() {
        let c = circle_uniform_grid(20).unwrap();
        let cfg = FdmConfig::new(1.0, 0.01).with_distance_mode(DistanceMode::RawEuclidean);
        let a = geodesic_estimate(&c, &cfg, None).unwrap();
        assert_eq!(a, pairwise_euclidean(&c).unwrap());
        let cfg = cfg.with_distance_mode(DistanceMode::AnalyticSphere);
        assert!(geodesic_estimate(&c, &cfg, None).is_err());
    }

    #[test]
    fn graph_geodesic_close_to_arc_length() {
        let c = circle_uniform_grid(500).unwrap();
        let eps = 2f64.powi(-12);
        let cfg = FdmConfig::new(1.0, eps);
        let dg = geodesic_estimate(&c, &cfg, None).unwrap();
        let th = c.chart_column(0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..500 {
            for j in 0..500 {
                if i != j {
                    let arc = circle_geodesic(th[i], th[j]);
                    worst = worst.max((dg.values[[i, j]] - arc).abs() / arc);
                }
            }
        }
        assert!(worst < 0.01, "{worst}");
    }
}
