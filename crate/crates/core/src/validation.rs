//! Eigenspace-aligned RMSE, power-law fits of eigenvalue growth, bandwidth
//! sweeps and the regional/spectral comparison on the unit interval.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{FdmError, Result};
use crate::geodesics::{geodesic_estimate, pairwise_euclidean_with, DistanceMatrix};
use crate::kernels::FdmConfig;
use crate::linalg::Cholesky;
use crate::manifolds::{
    interval_grid, regional_frac_laplacian_half, spectral_frac_laplacian_interval, AnalyticTruth, PointCloud,
};
use crate::spectral::{run_fdm_precomputed, KernelStack, SpectralResult};

/// Grouping tolerance for repeated true eigenvalues.
pub const DEFAULT_GROUP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenspaceGroup {
    pub indices: Vec<usize>,
    /// Least-squares map from estimated to true eigenfunctions, once aligned.
    pub alignment: Option<Array2<f64>>,
}

impl EigenspaceGroup {
    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }
}

/// Consecutive values closer than `tol` share a group.
pub fn group_eigenspaces(true_lambdas: &[f64], tol: f64) -> Vec<EigenspaceGroup> {
    let mut groups: Vec<EigenspaceGroup> = Vec::new();
    for (i, &v) in true_lambdas.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (v - true_lambdas[i - 1]).abs() <= tol => g.indices.push(i),
            _ => groups.push(EigenspaceGroup { indices: vec![i], alignment: None }),
        }
    }
    groups
}

/// Least-squares `M = argmin ||E M - T||_F` and the columnwise RMSE of the
/// residual `E M - T`.
pub fn align_and_rmse(estimated: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<f64>)> {
    let (n, k) = estimated.dim();
    if truth.dim() != (n, k) || k == 0 {
        return Err(FdmError::invalid(format!(
            "estimated block is {n} x {k}, truth block is {:?}",
            truth.dim()
        )));
    }
    let gram = estimated.t().dot(&estimated);
    let scale = (0..k).map(|i| gram[[i, i]]).fold(0.0f64, f64::max);
    let chol = Cholesky::new(gram.view()).map_err(|_| degenerate(k))?;
    let pivots = chol.factor().diag().mapv(|v| v * v);
    if pivots.iter().any(|&p| p <= 1e-12 * scale) {
        return Err(degenerate(k));
    }
    let rhs = estimated.t().dot(&truth);
    let mut m = Array2::zeros((k, k));
    for c in 0..k {
        let col = chol.solve(rhs.column(c))?;
        m.column_mut(c).assign(&col);
    }
    let resid = estimated.dot(&m) - truth;
    let rmse = resid.map_axis(Axis(0), |c| (c.mapv(|v| v * v).sum() / n as f64).sqrt()).to_vec();
    Ok((m, rmse))
}

fn degenerate(k: usize) -> FdmError {
    FdmError::DegenerateEigenspace(format!("the {k} estimated eigenfunctions are linearly dependent"))
}

/// Aligned RMSE of every eigenfunction whose eigenspace lies completely
/// within the first `phi.ncols()` columns. Returns the groups (with their
/// alignment matrices) and one RMSE per covered index.
pub fn eigenfunction_rmse(
    phi: ArrayView2<'_, f64>,
    truth_basis: ArrayView2<'_, f64>,
    true_lambdas: &[f64],
    tol: f64,
) -> Result<(Vec<EigenspaceGroup>, Vec<f64>)> {
    let k = phi.ncols();
    if truth_basis.ncols() < k || true_lambdas.len() < k || truth_basis.nrows() != phi.nrows() {
        return Err(FdmError::invalid("truth basis does not cover the estimated eigenfunctions"));
    }
    let mut groups = group_eigenspaces(&true_lambdas[..k], tol);
    // drop a trailing group that continues past the estimated block
    if true_lambdas.len() > k && (true_lambdas[k] - true_lambdas[k - 1]).abs() <= tol {
        groups.pop();
    }
    let mut rmse = Vec::new();
    for g in groups.iter_mut() {
        let est = phi.select(Axis(1), &g.indices);
        let tru = truth_basis.select(Axis(1), &g.indices);
        let (m, r) = align_and_rmse(est.view(), tru.view())?;
        g.alignment = Some(m);
        rmse.extend(r);
    }
    Ok((groups, rmse))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log lambda[j]` on `log j` for `j` in `lo..=hi`.
pub fn power_law_fit(lambdas: &[f64], lo: usize, hi: usize) -> Result<PowerLawFit> {
    if lo == 0 || hi <= lo || hi >= lambdas.len() {
        return Err(FdmError::invalid(format!(
            "fit range {lo}..={hi} must satisfy 1 <= lo < hi < {}",
            lambdas.len()
        )));
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for j in lo..=hi {
        let l = lambdas[j];
        if !(l > 0.0) {
            return Err(FdmError::invalid(format!("lambda[{j}] = {l} is not positive")));
        }
        xs.push((j as f64).ln());
        ys.push(l.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerLawFit { slope, intercept: my - slope * mx, r2 })
}

/// Circle spectra come in pairs `lambda[2j-1] ~ lambda[2j]`; returns
/// `[lambda[0], mean of pair 1, mean of pair 2, ...]` so that index `j`
/// carries `j^beta`.
pub fn pair_collapse(lambdas: &[f64]) -> Vec<f64> {
    let mut out = vec![lambdas.first().copied().unwrap_or(0.0)];
    for j in 1..=(lambdas.len().saturating_sub(1) / 2) {
        out.push(0.5 * (lambdas[2 * j - 1] + lambdas[2 * j]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub per_eigenfunction_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub power_law: Option<PowerLawFit>,
}

impl ValidationReport {
    pub fn from_rmse(rmse: Vec<f64>, power_law: Option<PowerLawFit>) -> Self {
        let mean_rmse = if rmse.is_empty() { f64::NAN } else { rmse.iter().sum::<f64>() / rmse.len() as f64 };
        ValidationReport { per_eigenfunction_rmse: rmse, mean_rmse, power_law }
    }

    pub fn count_below(&self, threshold: f64) -> usize {
        self.per_eigenfunction_rmse.iter().filter(|&&r| r < threshold).count()
    }
}

/// RMSE against the analytic eigenfunctions plus an optional power-law fit
/// of the estimated eigenvalues (already reindexed by the caller's rule).
pub fn validate_result(
    result: &SpectralResult,
    cloud: &PointCloud,
    truth: &dyn AnalyticTruth,
    beta: f64,
) -> Result<ValidationReport> {
    let k = result.phi.ncols();
    // one extra truth value to detect a group cut at the block edge
    let lambdas = truth.eigenvalues(k + 1, beta);
    let basis = truth.basis(cloud, k)?;
    let (_, rmse) = eigenfunction_rmse(result.phi.view(), basis.view(), &lambdas, DEFAULT_GROUP_TOL)?;
    Ok(ValidationReport::from_rmse(rmse, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `Err` carries the message of a failed run (e.g. a disconnected graph).
    pub outcome: std::result::Result<ValidationReport, String>,
}

impl SweepRow {
    pub fn mean_rmse(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.mean_rmse)
    }

    pub fn count_below(&self, threshold: f64) -> Option<usize> {
        self.outcome.as_ref().ok().map(|r| r.count_below(threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    /// Graph threshold becomes `max(floor, sqrt(eps))` when set; otherwise the
    /// base configuration's rule applies at every bandwidth.
    pub graph_threshold_floor: Option<f64>,
}

/// Runs the pipeline and the RMSE validation once per bandwidth.
pub fn bandwidth_sweep(
    cloud: &PointCloud,
    base: &FdmConfig,
    epsilons: &[f64],
    truth: &dyn AnalyticTruth,
    options: SweepOptions,
) -> Result<Vec<SweepRow>> {
    bandwidth_sweep_inspect(cloud, base, epsilons, truth, options, &mut |_, _, _| {})
}

/// [`bandwidth_sweep`] that also hands every successful run to `inspect`.
pub fn bandwidth_sweep_inspect(
    cloud: &PointCloud,
    base: &FdmConfig,
    epsilons: &[f64],
    truth: &dyn AnalyticTruth,
    options: SweepOptions,
    inspect: &mut dyn FnMut(&FdmConfig, &KernelStack, &SpectralResult),
) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(FdmError::invalid("empty bandwidth grid"));
    }
    let exec = base.execution;
    let euclidean = pairwise_euclidean_with(cloud, exec)?;
    let configs: Vec<FdmConfig> = epsilons
        .iter()
        .map(|&eps| {
            let mut c = base.clone().with_epsilon(eps);
            if let Some(floor) = options.graph_threshold_floor {
                c.graph_threshold = Some(floor.max(eps.sqrt()));
            }
            c
        })
        .collect();

    // geodesics depend only on the threshold; compute each distinct one once
    let mut geodesics: HashMap<u64, std::result::Result<DistanceMatrix, String>> = HashMap::new();
    if !base.is_local() {
        for c in &configs {
            geodesics
                .entry(c.graph_threshold().to_bits())
                .or_insert_with(|| geodesic_estimate(cloud, c, Some(&euclidean)).map_err(|e| e.to_string()));
        }
    }

    // each run holds several N x N matrices; run the grid sequentially and
    // leave the parallelism to the row loops inside the pipeline
    let rows = configs
        .iter()
        .map(|c| {
            let geo = match geodesics.get(&c.graph_threshold().to_bits()) {
                Some(Ok(g)) => Some(g),
                Some(Err(e)) => {
                    return SweepRow { epsilon: c.epsilon, outcome: Err(e.clone()) };
                }
                None => None,
            };
            let outcome = run_fdm_precomputed(c, &euclidean, geo)
                .and_then(|(stack, r)| {
                    inspect(c, &stack, &r);
                    validate_result(&r, cloud, truth, c.beta)
                })
                .map_err(|e| e.to_string());
            SweepRow { epsilon: c.epsilon, outcome }
        })
        .collect();
    Ok(rows)
}

/// Index of the first row maximizing `count_below(threshold)`.
pub fn best_row(rows: &[SweepRow], threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(c) = r.count_below(threshold) {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// `max / min` of `count_below(threshold)` over the rows whose bandwidth lies
/// within a factor `sqrt(10)` of `center` (one decade in total). Failed rows
/// and zero counts make the ratio infinite.
pub fn decade_ratio(rows: &[SweepRow], center: f64, threshold: f64) -> f64 {
    let half = 10f64.sqrt() * (1.0 + 1e-9);
    let counts: Vec<Option<usize>> = rows
        .iter()
        .filter(|r| r.epsilon >= center / half && r.epsilon <= center * half)
        .map(|r| r.count_below(threshold))
        .collect();
    if counts.iter().any(|c| c.is_none_or(|c| c == 0)) {
        return f64::INFINITY;
    }
    let cs: Vec<f64> = counts.into_iter().map(|c| c.unwrap() as f64).collect();
    cs.iter().cloned().fold(f64::MIN, f64::max) / cs.iter().cloned().fold(f64::MAX, f64::min)
}

/// Three curves on the interior of the interval grid, each scaled so that its
/// minimum is exactly `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalComparison {
    pub x: Vec<f64>,
    pub fdm: Vec<f64>,
    pub regional: Vec<f64>,
    pub spectral: Vec<f64>,
}

/// Number of cosine modes in the spectral reference.
pub const SPECTRAL_TERMS: usize = 2000;

impl IntervalComparison {
    /// Root-mean-square distance between two curves restricted to `[lo, hi]`.
    pub fn l2_distance(&self, a: &[f64], b: &[f64], lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for ((x, u), v) in self.x.iter().zip(a).zip(b) {
            if *x >= lo && *x <= hi {
                acc += (u - v).powi(2);
                count += 1;
            }
        }
        (acc / count.max(1) as f64).sqrt()
    }

    pub fn fdm_to_regional(&self, lo: f64, hi: f64) -> f64 {
        self.l2_distance(&self.fdm, &self.regional, lo, hi)
    }

    pub fn fdm_to_spectral(&self, lo: f64, hi: f64) -> f64 {
        self.l2_distance(&self.fdm, &self.spectral, lo, hi)
    }
}

/// Rescales `v` so that `min v = -1`. The minimum must be negative.
pub fn normalize_min(v: &mut [f64]) -> Result<()> {
    let m = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(m < 0.0) {
        return Err(FdmError::Domain(format!("curve minimum {m} is not negative")));
    }
    for x in v.iter_mut() {
        *x /= -m;
    }
    Ok(())
}

/// Generator estimate `(f - H f)/t` for `f(x) = x^2` on the `n`-point interval
/// grid next to the regional and spectral `s = 1/2` references.
pub fn interval_comparison(n: usize, config: &FdmConfig) -> Result<IntervalComparison> {
    if (config.beta - 1.0).abs() > 0.0 {
        return Err(FdmError::invalid(format!("interval comparison needs beta = 1, got {}", config.beta)));
    }
    let cloud = interval_grid(n)?;
    let exec = config.execution;
    let euclidean = pairwise_euclidean_with(&cloud, exec)?;
    let geo = geodesic_estimate(&cloud, config, Some(&euclidean))?;
    let stack = crate::spectral::build_stack(config, &euclidean, Some(&geo))?;
    let xs: Vec<f64> = cloud.ambient.column(0).to_vec();
    let f = Array1::from(xs.iter().map(|x| x * x).collect::<Vec<_>>());
    let gen = stack.generator_apply(&f, config)?;

    let interior: Vec<usize> = (1..n - 1).collect();
    let x: Vec<f64> = interior.iter().map(|&i| xs[i]).collect();
    let mut fdm: Vec<f64> = interior.iter().map(|&i| gen[i]).collect();
    let mut regional = x.iter().map(|&v| regional_frac_laplacian_half(v)).collect::<Result<Vec<_>>>()?;
    let mut spectral = spectral_frac_laplacian_interval(&x, 0.5, SPECTRAL_TERMS)?;
    normalize_min(&mut fdm)?;
    normalize_min(&mut regional)?;
    normalize_min(&mut spectral)?;
    Ok(IntervalComparison { x, fdm, regional, spectral })
}
