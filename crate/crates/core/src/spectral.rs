//! Normalizations, the symmetric eigenproblem and post-processing into
//! generator eigenvalues and eigenfunction estimates.

use ndarray::{Array1, Array2, Axis};

use crate::error::{FdmError, Result};
use crate::geodesics::{geodesic_estimate, pairwise_euclidean_with, DistanceMatrix};
use crate::kernels::{gaussian_kde, local_kernel, nonlocal_kernel, EigenMethod, FdmConfig, KernelMatrix};
use crate::linalg::symmetric_top;
use crate::manifolds::PointCloud;
use crate::par::{self, Execution};

/// Every intermediate matrix of the pipeline.
#[derive(Debug, Clone)]
pub struct KernelStack {
    pub kernel: KernelMatrix,
    /// Right normalizer, the density estimate.
    pub d: Array1<f64>,
    pub k_tilde: Array2<f64>,
    /// Row sums of `k_tilde`.
    pub d_tilde: Array1<f64>,
    /// Row-stochastic Markov matrix.
    pub h: Array2<f64>,
    /// Symmetric conjugate of `h`.
    pub k_hat: Array2<f64>,
}

impl KernelStack {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Discrete generator `(f - H f) / (c t)` applied to `f`.
    pub fn generator_apply(&self, f: &Array1<f64>, config: &FdmConfig) -> Result<Array1<f64>> {
        if f.len() != self.len() {
            return Err(FdmError::invalid(format!("function has {} values, expected {}", f.len(), self.len())));
        }
        let scale = config.generator_constant() * config.time();
        Ok((f - &self.h.dot(f)) / scale)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Semigroup eigenvalues, descending, in (0, 1].
    pub eta: Vec<f64>,
    /// `-log(eta) / (c t)`, ascending.
    pub lambda: Vec<f64>,
    /// `-log(eta) / (c eps)`.
    pub lambda_hat: Vec<f64>,
    /// Orthonormal eigenvectors of `K_hat`, one per column.
    pub psi: Array2<f64>,
    /// Eigenfunction estimates at the samples, unit RMS columns.
    pub phi: Array2<f64>,
    pub t: f64,
    pub epsilon: f64,
    /// Generator constant `c` used in the eigenvalue conversion.
    pub generator_constant: f64,
}

/// `K_tilde_ij = K_ij / (q_i q_j)`.
pub fn right_normalize(kernel: &KernelMatrix, q: &Array1<f64>, exec: Execution) -> Result<Array2<f64>> {
    let n = kernel.values.nrows();
    if q.len() != n {
        return Err(FdmError::invalid(format!("density has {} entries, kernel is {n} x {n}", q.len())));
    }
    if let Some(i) = q.iter().position(|v| !(*v > 0.0)) {
        return Err(FdmError::invalid(format!("density estimate {} at {i} is not positive", q[i])));
    }
    let mut out = kernel.values.clone();
    par::for_each_row(exec, &mut out, |i, mut row| {
        let qi = q[i];
        for (v, qj) in row.iter_mut().zip(q) {
            *v /= qi * qj;
        }
    });
    Ok(out)
}

/// Returns `(H, K_hat, D_tilde)`.
pub fn left_normalize(k_tilde: &Array2<f64>, exec: Execution) -> Result<(Array2<f64>, Array2<f64>, Array1<f64>)> {
    let d_tilde: Array1<f64> = Array1::from(par::map_range(exec, k_tilde.nrows(), |i| k_tilde.row(i).sum()));
    if let Some(i) = d_tilde.iter().position(|v| !(*v > 0.0)) {
        return Err(FdmError::invalid(format!("row {i} of the normalized kernel sums to {}", d_tilde[i])));
    }
    let mut h = k_tilde.clone();
    par::for_each_row(exec, &mut h, |i, mut row| {
        let di = d_tilde[i];
        row.mapv_inplace(|v| v / di);
    });
    let root: Array1<f64> = d_tilde.mapv(f64::sqrt);
    let mut k_hat = k_tilde.clone();
    par::for_each_row(exec, &mut k_hat, |i, mut row| {
        let ri = root[i];
        for (v, rj) in row.iter_mut().zip(&root) {
            *v /= ri * rj;
        }
    });
    let n = k_hat.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (k_hat[[i, j]] + k_hat[[j, i]]);
            k_hat[[i, j]] = m;
            k_hat[[j, i]] = m;
        }
    }
    Ok((h, k_hat, d_tilde))
}

/// Largest `count` eigenpairs of `K_hat`.
pub fn eig_top(k_hat: &Array2<f64>, count: usize, method: EigenMethod, exec: Execution) -> Result<(Vec<f64>, Array2<f64>)> {
    symmetric_top(k_hat.view(), count, method, exec)
}

/// Largest `count` eigenpairs of `K_hat` with the leading pair fixed in
/// closed form: `K_hat sqrt(D~) = sqrt(D~)` holds exactly, so `eta_0 = 1`
/// and the rest come from `K_hat` with that direction deflated. When
/// several eigenvalues agree with 1 to roundoff (tiny bandwidths) no solver
/// can separate the constant mode; the projection keeps it exact.
pub fn deflated_top(
    stack: &KernelStack,
    count: usize,
    method: EigenMethod,
    exec: Execution,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = stack.len();
    let mut u = stack.d_tilde.mapv(f64::sqrt);
    let norm = u.dot(&u).sqrt();
    u /= norm;
    if count <= 1 {
        return Ok((vec![1.0; count], u.insert_axis(Axis(1)).slice_move(ndarray::s![.., ..count])));
    }
    // P K P - 2 u u^T with P = I - u u^T. The spectrum of K_hat lies in
    // [-1, 1]; moving u to -2 rather than 0 keeps it out of any cluster of
    // near-zero eigenvalues that the top block may reach into.
    let v = stack.k_hat.dot(&u);
    let uv = u.dot(&v) - 2.0;
    let mut projected = stack.k_hat.clone();
    par::for_each_row(exec, &mut projected, |i, mut row| {
        for j in 0..n {
            row[j] += -u[i] * v[j] - v[i] * u[j] + uv * u[i] * u[j];
        }
    });
    let (rest_eta, rest_psi) = eig_top(&projected, count - 1, method, exec)?;
    let mut eta = Vec::with_capacity(count);
    eta.push(1.0);
    eta.extend(rest_eta);
    let mut psi = Array2::zeros((n, count));
    psi.column_mut(0).assign(&u);
    psi.slice_mut(ndarray::s![.., 1..]).assign(&rest_psi);
    Ok((eta, psi))
}

/// Time scales for converting `eta` into generator eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale {
    pub t: f64,
    pub epsilon: f64,
    pub generator_constant: f64,
}

impl TimeScale {
    pub fn from_config(config: &FdmConfig) -> Self {
        TimeScale { t: config.time(), epsilon: config.epsilon, generator_constant: config.generator_constant() }
    }
}

pub fn postprocess(eta: &[f64], psi: &Array2<f64>, d_tilde: &Array1<f64>, scale: TimeScale) -> Result<SpectralResult> {
    if psi.ncols() != eta.len() || psi.nrows() != d_tilde.len() {
        return Err(FdmError::invalid("eigenvector block does not match eigenvalues or normalizer"));
    }
    let mut eta_c = Vec::with_capacity(eta.len());
    for (i, &e) in eta.iter().enumerate() {
        if !(e > 0.0) {
            return Err(FdmError::SpectralFailure(format!(
                "eigenvalue {i} of the symmetric kernel is {e:e}; the bandwidth is too small for this many eigenpairs"
            )));
        }
        eta_c.push(e.min(1.0));
    }
    let c = scale.generator_constant;
    let rate = |e: &f64, time: f64| if *e >= 1.0 { 0.0 } else { -e.ln() / (c * time) };
    let lambda: Vec<f64> = eta_c.iter().map(|e| rate(e, scale.t)).collect();
    let lambda_hat: Vec<f64> = eta_c.iter().map(|e| rate(e, scale.epsilon)).collect();

    let inv_root = d_tilde.mapv(|v| 1.0 / v.sqrt());
    let mut phi = psi * &inv_root.insert_axis(Axis(1));
    for mut col in phi.columns_mut() {
        let rms = (col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64).sqrt();
        if rms > 0.0 {
            col.mapv_inplace(|v| v / rms);
        }
        let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-10 * peak) {
            if *first < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
    }
    let mut psi = psi.clone();
    for (mut pc, fc) in psi.columns_mut().into_iter().zip(phi.columns()) {
        let s: f64 = pc.iter().zip(fc).map(|(a, b)| a * b).sum();
        if s < 0.0 {
            pc.mapv_inplace(|v| -v);
        }
    }
    Ok(SpectralResult {
        eta: eta_c,
        lambda,
        lambda_hat,
        psi,
        phi,
        t: scale.t,
        epsilon: scale.epsilon,
        generator_constant: c,
    })
}

/// Kernel, density and both normalizations from precomputed distances.
/// `geodesic` is required on the nonlocal branch.
pub fn build_stack(config: &FdmConfig, euclidean: &DistanceMatrix, geodesic: Option<&DistanceMatrix>) -> Result<KernelStack> {
    config.validate()?;
    let exec = config.execution;
    let kernel = if config.is_local() {
        local_kernel(euclidean, config)?
    } else {
        let g = geodesic.ok_or_else(|| FdmError::invalid("the nonlocal branch needs geodesic distances"))?;
        nonlocal_kernel(g, config)?
    };
    let d = gaussian_kde(euclidean, config)?;
    let k_tilde = right_normalize(&kernel, &d, exec)?;
    let (h, k_hat, d_tilde) = left_normalize(&k_tilde, exec)?;
    Ok(KernelStack { kernel, d, k_tilde, d_tilde, h, k_hat })
}

/// Eigen-decomposition and post-processing of an assembled stack.
pub fn spectrum(stack: &KernelStack, config: &FdmConfig) -> Result<SpectralResult> {
    let count = config.num_eigs + 1;
    if count > stack.len() {
        return Err(FdmError::invalid(format!(
            "{} eigenpairs requested from {} points",
            count,
            stack.len()
        )));
    }
    let (eta, psi) = deflated_top(stack, count, config.eigen_method, config.execution)?;
    postprocess(&eta, &psi, &stack.d_tilde, TimeScale::from_config(config))
}

/// Full pipeline on precomputed distances.
pub fn run_fdm_precomputed(
    config: &FdmConfig,
    euclidean: &DistanceMatrix,
    geodesic: Option<&DistanceMatrix>,
) -> Result<(KernelStack, SpectralResult)> {
    let stack = build_stack(config, euclidean, geodesic)?;
    let result = spectrum(&stack, config)?;
    Ok((stack, result))
}

/// Distances, kernel, density, normalizations, eigenpairs.
pub fn run_fdm(cloud: &PointCloud, config: &FdmConfig) -> Result<(KernelStack, SpectralResult)> {
    config.validate()?;
    if cloud.len() < 2 {
        return Err(FdmError::invalid("need at least two points"));
    }
    if config.num_eigs + 1 > cloud.len() {
        return Err(FdmError::invalid(format!(
            "{} eigenpairs requested from {} points",
            config.num_eigs + 1,
            cloud.len()
        )));
    }
    let euclidean = pairwise_euclidean_with(cloud, config.execution)?;
    let geodesic = if config.is_local() { None } else { Some(geodesic_estimate(cloud, config, Some(&euclidean))?) };
    log::debug!(
        "running {} branch, N = {}, eps = {:e}",
        if config.is_local() { "local" } else { "nonlocal" },
        cloud.len(),
        config.epsilon
    );
    run_fdm_precomputed(config, &euclidean, geodesic.as_ref())
}
