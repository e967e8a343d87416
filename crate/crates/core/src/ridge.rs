//! Kernel ridge regression with the heat-kernel estimate `H` as the design
//! matrix, half/half cross-validation over `(eps, delta)`, and the indicator
//! experiment on the circle.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{FdmError, Result};
use crate::geodesics::{geodesic_estimate, pairwise_euclidean_with, DistanceMatrix};
use crate::kernels::{gaussian_kde_cross, FdmConfig};
use crate::linalg::{solve_tridiagonal, Cholesky, Tridiagonalization};
use crate::manifolds::{circle_geodesic, circle_random, PointCloud};
use crate::par::{self, Execution};
use crate::rng::{splitmix64, CounterRng};
use crate::spectral::{build_stack, KernelStack};

/// Solves `(K^T K + delta I) c = K^T y` by Cholesky factorization.
pub fn krr_fit(k: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, delta: f64) -> Result<Array1<f64>> {
    let (rows, cols) = k.dim();
    if rows != y.len() {
        return Err(FdmError::invalid(format!("kernel has {rows} rows but y has {} entries", y.len())));
    }
    if rows != cols {
        return Err(FdmError::invalid(format!("kernel must be square, got {rows} x {cols}")));
    }
    if !(delta >= 0.0) {
        return Err(FdmError::invalid(format!("ridge weight {delta} must be nonnegative")));
    }
    let mut a = k.t().dot(&k);
    for i in 0..cols {
        a[[i, i]] += delta;
    }
    let b = k.t().dot(&y);
    Cholesky::new(a.view())?.solve(b.view())
}

/// Ridge solutions for many `delta` at the cost of one tridiagonalization:
/// with `K^T K = Q T Q^T`, `c = Q (T + delta I)^-1 Q^T K^T y`.
#[derive(Debug, Clone)]
pub struct RidgePath {
    tri: Tridiagonalization,
    rhs: Vec<f64>,
}

impl RidgePath {
    pub fn new(k: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, exec: Execution) -> Result<Self> {
        let (rows, cols) = k.dim();
        if rows != y.len() || rows != cols {
            return Err(FdmError::invalid(format!(
                "kernel is {rows} x {cols}, observations have length {}",
                y.len()
            )));
        }
        let gram = k.t().dot(&k);
        let tri = Tridiagonalization::new(gram.view(), exec);
        let mut rhs = k.t().dot(&y).to_vec();
        tri.apply_qt(&mut rhs);
        Ok(RidgePath { tri, rhs })
    }

    pub fn solve(&self, delta: f64) -> Result<Array1<f64>> {
        if !(delta >= 0.0) {
            return Err(FdmError::invalid(format!("ridge weight {delta} must be nonnegative")));
        }
        let mut c = solve_tridiagonal(&self.tri.diag, &self.tri.off, delta, &self.rhs)?;
        self.tri.apply_q(&mut c);
        Ok(Array1::from(c))
    }
}

fn cross_euclidean(a: &PointCloud, b: &PointCloud, exec: Execution) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    par::for_each_row(exec, &mut out, |i, mut row| {
        let p = a.point(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = p.iter().zip(b.point(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        }
    });
    out
}

/// Row-stochastic extension of `H` to new points: kernel values against the
/// training points, divided by the density at both ends (the query density
/// estimated from the training sample), then normalized by row sums.
///
/// On the nonlocal branch the geodesic from a query `x` to training point `j`
/// is `min_i |x - x_i| + d_G(i, j)` over training neighbours `i` closer than
/// the graph threshold.
pub fn extension_matrix(
    cross: &Array2<f64>,
    stack: &KernelStack,
    train_geodesic: Option<&DistanceMatrix>,
    config: &FdmConfig,
) -> Result<Array2<f64>> {
    let (m, n) = cross.dim();
    if n != stack.len() {
        return Err(FdmError::invalid("cross distances do not match the training set"));
    }
    let family = stack.kernel.family;
    let scale = 1.0 / config.epsilon.sqrt();
    let threshold = config.graph_threshold();
    let q_query = gaussian_kde_cross(cross, config.kde_bandwidth(), config.dim);
    let q_train = &stack.d;
    let rows: Vec<Option<Vec<f64>>> = par::map_range(config.execution, m, |a| {
        let dist_row = cross.row(a);
        let geo: Vec<f64> = match train_geodesic {
            None => dist_row.to_vec(),
            Some(g) => {
                let nbrs: Vec<usize> = (0..n).filter(|&i| dist_row[i] < threshold).collect();
                if nbrs.is_empty() {
                    return None;
                }
                (0..n)
                    .map(|j| nbrs.iter().map(|&i| dist_row[i] + g.values[[i, j]]).fold(f64::INFINITY, f64::min))
                    .collect()
            }
        };
        let mut row: Vec<f64> =
            geo.iter().zip(q_train).map(|(d, qb)| family.profile(d * scale) / (q_query[a] * qb)).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        Some(row)
    });
    let mut ext = Array2::zeros((m, n));
    for (a, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| {
            FdmError::Domain(format!("held-out point {a} has no training neighbour closer than {threshold}"))
        })?;
        ext.row_mut(a).assign(&Array1::from(row));
    }
    Ok(ext)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub epsilon: f64,
    pub delta: f64,
    /// Mean squared held-out error; `None` for invalid cells.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub epsilon: f64,
    pub delta: f64,
    pub error: f64,
    pub table: Vec<CvCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub seed: u64,
    /// Graph threshold `max(floor, sqrt(eps))` on the nonlocal branch. Without
    /// a floor the base configuration's threshold rule is used.
    pub graph_threshold_floor: Option<f64>,
}

/// `count` values from `10^lo` to `10^hi`, logarithmically spaced.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..count).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64)).collect(),
    }
}

pub const DEFAULT_THRESHOLD_FLOOR: f64 = 0.1;

impl CvOptions {
    /// 16 bandwidths in `[1e-3, 1]`, 19 ridge weights in `[1e-20, 1e-2]`.
    pub fn standard(seed: u64) -> Self {
        CvOptions {
            epsilons: logspace(-3.0, 0.0, 16),
            deltas: logspace(-20.0, -2.0, 19),
            seed,
            graph_threshold_floor: Some(DEFAULT_THRESHOLD_FLOOR),
        }
    }

    fn config_for(&self, base: &FdmConfig, eps: f64) -> FdmConfig {
        let mut c = base.clone().with_epsilon(eps);
        if let Some(floor) = self.graph_threshold_floor {
            c.graph_threshold = Some(floor.max(eps.sqrt()));
        }
        c
    }
}

/// Seeded half/half split; the first part receives the extra point.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let perm = CounterRng::new(seed).permutation(n);
    let cut = n.div_ceil(2);
    let mut train = perm[..cut].to_vec();
    let mut test = perm[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Half/half cross-validation over the `(eps, delta)` grid.
pub fn cross_validate(cloud: &PointCloud, y: &Array1<f64>, base: &FdmConfig, options: &CvOptions) -> Result<CvResult> {
    if options.epsilons.is_empty() || options.deltas.is_empty() {
        return Err(FdmError::invalid("cross-validation grids must be nonempty"));
    }
    if y.len() != cloud.len() {
        return Err(FdmError::invalid(format!("{} observations for {} points", y.len(), cloud.len())));
    }
    if cloud.len() < 4 {
        return Err(FdmError::invalid("cross-validation needs at least four points"));
    }
    base.validate()?;
    let exec = base.execution;
    let (train_idx, test_idx) = split_halves(cloud.len(), options.seed);
    let train = cloud.select(&train_idx);
    let test = cloud.select(&test_idx);
    let y_train: Array1<f64> = train_idx.iter().map(|&i| y[i]).collect();
    let y_test: Array1<f64> = test_idx.iter().map(|&i| y[i]).collect();
    let euclidean = pairwise_euclidean_with(&train, exec)?;
    let cross = cross_euclidean(&test, &train, exec);

    let mut geodesics: HashMap<u64, Option<DistanceMatrix>> = HashMap::new();
    let mut table = Vec::with_capacity(options.epsilons.len() * options.deltas.len());
    for &eps in &options.epsilons {
        let config = options.config_for(base, eps);
        let errors = cv_column(&config, &train, &euclidean, &cross, &y_train, &y_test, &options.deltas, &mut geodesics);
        let errors = errors.unwrap_or_else(|e| {
            log::debug!("cross-validation cell eps = {eps:e} skipped: {e}");
            vec![None; options.deltas.len()]
        });
        for (&delta, error) in options.deltas.iter().zip(errors) {
            table.push(CvCell { epsilon: eps, delta, error });
        }
    }
    let best = table
        .iter()
        .filter_map(|c| c.error.map(|e| (c, e)))
        .fold(None::<(&CvCell, f64)>, |acc, (c, e)| match acc {
            Some((_, be)) if be <= e => acc,
            _ => Some((c, e)),
        });
    let (cell, error) = best.ok_or_else(|| FdmError::SpectralFailure("every cross-validation cell failed".into()))?;
    Ok(CvResult { epsilon: cell.epsilon, delta: cell.delta, error, table: table.clone() })
}

#[allow(clippy::too_many_arguments)]
fn cv_column(
    config: &FdmConfig,
    train: &PointCloud,
    euclidean: &DistanceMatrix,
    cross: &Array2<f64>,
    y_train: &Array1<f64>,
    y_test: &Array1<f64>,
    deltas: &[f64],
    geodesics: &mut HashMap<u64, Option<DistanceMatrix>>,
) -> Result<Vec<Option<f64>>> {
    let geo = if config.is_local() {
        None
    } else {
        let entry = geodesics
            .entry(config.graph_threshold().to_bits())
            .or_insert_with(|| geodesic_estimate(train, config, Some(euclidean)).ok());
        match entry {
            Some(g) => Some(&*g),
            None => return Err(FdmError::invalid("training graph is disconnected")),
        }
    };
    let stack = build_stack(config, euclidean, geo)?;
    let ext = extension_matrix(cross, &stack, geo, config)?;
    let path = RidgePath::new(stack.h.view(), y_train.view(), config.execution)?;
    Ok(deltas
        .iter()
        .map(|&delta| {
            path.solve(delta).ok().and_then(|c| {
                let pred = ext.dot(&c);
                let err = (&pred - y_test).mapv(|v| v * v).mean()?;
                err.is_finite().then_some(err)
            })
        })
        .collect())
}

/// Noise-free regression `y_hat = H c` with `c` fitted to `f_true`.
pub fn expected_regression(cloud: &PointCloud, f_true: &Array1<f64>, config: &FdmConfig, delta: f64) -> Result<Array1<f64>> {
    if f_true.len() != cloud.len() {
        return Err(FdmError::invalid(format!("{} values for {} points", f_true.len(), cloud.len())));
    }
    let exec = config.execution;
    let euclidean = pairwise_euclidean_with(cloud, exec)?;
    let geo = if config.is_local() { None } else { Some(geodesic_estimate(cloud, config, Some(&euclidean))?) };
    let stack = build_stack(config, &euclidean, geo.as_ref())?;
    let c = RidgePath::new(stack.h.view(), f_true.view(), exec)?.solve(delta)?;
    Ok(stack.h.dot(&c))
}

/// `1` on `[0, pi]` (angles taken modulo `2 pi`), `0` elsewhere.
pub fn indicator(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t <= PI || t >= 2.0 * PI - 1e-12 {
        1.0
    } else {
        0.0
    }
}

/// `max(max y - 1, -min y)` over samples within geodesic distance
/// `half_width` of `center`; zero when nothing exceeds `[0, 1]`.
pub fn overshoot(theta: &[f64], y_hat: &[f64], center: f64, half_width: f64) -> f64 {
    theta
        .iter()
        .zip(y_hat)
        .filter(|(t, _)| circle_geodesic(**t, center) <= half_width)
        .map(|(_, y)| (y - 1.0).max(-y))
        .fold(0.0f64, f64::max)
}

pub const OVERSHOOT_HALF_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOutcome {
    pub beta: f64,
    pub cv: CvResult,
    pub y_hat: Vec<f64>,
    pub overshoot_zero: f64,
    pub overshoot_pi: f64,
    /// RMS of `y_hat - f_true`.
    pub l2_error: f64,
}

impl FamilyOutcome {
    pub fn family_name(&self) -> &'static str {
        if self.beta >= 2.0 {
            "exponential"
        } else {
            "polynomial"
        }
    }

    pub fn max_overshoot(&self) -> f64 {
        self.overshoot_zero.max(self.overshoot_pi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub f_true: Vec<f64>,
    pub y: Vec<f64>,
    pub families: Vec<FamilyOutcome>,
}

/// Noisy indicator on a seeded random circle, tuned and evaluated for the
/// exponential (`beta = 2`) and polynomial (`beta = 1`) kernels.
pub fn indicator_experiment(n: usize, sigma: f64, seed: u64, options: &CvOptions, exec: Execution) -> Result<IndicatorReport> {
    if !(sigma >= 0.0) {
        return Err(FdmError::invalid(format!("noise level {sigma} must be nonnegative")));
    }
    let cloud = circle_random(n, seed)?;
    let theta = cloud.chart_column(0).expect("circle chart").to_vec();
    let f_true: Array1<f64> = theta.iter().map(|&t| indicator(t)).collect();
    let mut noise = CounterRng::new(splitmix64(seed ^ 0x6e6f_6973_6500));
    let y: Array1<f64> = f_true.mapv(|f| f + sigma * noise.next_gaussian());
    let mut families = Vec::new();
    for beta in [2.0, 1.0] {
        let base = FdmConfig::new(beta, 1.0).with_dim(1).with_execution(exec);
        let cv = cross_validate(&cloud, &y, &base, options)?;
        let config = options.config_for(&base, cv.epsilon);
        let y_hat = expected_regression(&cloud, &f_true, &config, cv.delta)?.to_vec();
        let l2_error = (y_hat.iter().zip(&f_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
        families.push(FamilyOutcome {
            beta,
            overshoot_zero: overshoot(&theta, &y_hat, 0.0, OVERSHOOT_HALF_WIDTH),
            overshoot_pi: overshoot(&theta, &y_hat, PI, OVERSHOOT_HALF_WIDTH),
            cv,
            y_hat,
            l2_error,
        });
    }
    Ok(IndicatorReport { n, sigma, seed, theta, f_true: f_true.to_vec(), y: y.to_vec(), families })
}
