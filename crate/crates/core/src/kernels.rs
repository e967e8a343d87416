//! Pipeline configuration, the local and nonlocal kernel families, and the
//! Gaussian density estimate used for the right normalization.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use statrs::function::gamma::gamma;

use crate::error::{FdmError, Result};
use crate::geodesics::{DistanceKind, DistanceMatrix};
use crate::manifolds::frac_laplacian_constant;
use crate::par::{self, Execution};

/// How geodesic distances are obtained on the nonlocal branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Threshold graph plus Dijkstra from every node.
    #[default]
    GraphDijkstra,
    /// `acos(x . y)`; only valid for clouds on the unit sphere.
    AnalyticSphere,
    /// Ambient distances. Rejected by the nonlocal kernel.
    RawEuclidean,
}

/// Which dense/iterative eigensolver backs the top-eigenpair search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense up to [`DENSE_EIGEN_LIMIT`] points, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub const DENSE_EIGEN_LIMIT: usize = 4096;

/// Conversion between semigroup eigenvalues and generator eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GeneratorScale {
    /// Divide by the kernel family's generator constant (see
    /// [`KernelFamily::generator_constant`]) so that the estimates target the
    /// Laplacian and fractional Laplacian with their standard normalizations.
    #[default]
    Kernel,
    /// `lambda = -log(eta) / t` with no further constant.
    Unit,
    Custom(f64),
}

/// Inputs of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmConfig {
    /// Fractional order `beta = 2s` in (0, 3].
    pub beta: f64,
    /// Bandwidth, in units of distance squared.
    pub epsilon: f64,
    /// Intrinsic dimension of the manifold.
    pub dim: usize,
    /// Number of nontrivial eigenpairs; `num_eigs + 1` are computed.
    pub num_eigs: usize,
    pub distance_mode: DistanceMode,
    /// Neighbour-graph threshold; `sqrt(epsilon)` when unset.
    pub graph_threshold: Option<f64>,
    /// Density-estimate bandwidth; `epsilon` when unset.
    pub kde_bandwidth: Option<f64>,
    pub generator_scale: GeneratorScale,
    pub eigen_method: EigenMethod,
    pub execution: Execution,
}

impl FdmConfig {
    pub fn new(beta: f64, epsilon: f64) -> Self {
        FdmConfig {
            beta,
            epsilon,
            dim: 1,
            num_eigs: 10,
            distance_mode: DistanceMode::GraphDijkstra,
            graph_threshold: None,
            kde_bandwidth: None,
            generator_scale: GeneratorScale::Kernel,
            eigen_method: EigenMethod::Auto,
            execution: Execution::default(),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_num_eigs(mut self, num_eigs: usize) -> Self {
        self.num_eigs = num_eigs;
        self
    }

    pub fn with_distance_mode(mut self, mode: DistanceMode) -> Self {
        self.distance_mode = mode;
        self
    }

    pub fn with_graph_threshold(mut self, threshold: f64) -> Self {
        self.graph_threshold = Some(threshold);
        self
    }

    pub fn with_kde_bandwidth(mut self, bandwidth: f64) -> Self {
        self.kde_bandwidth = Some(bandwidth);
        self
    }

    pub fn with_generator_scale(mut self, scale: GeneratorScale) -> Self {
        self.generator_scale = scale;
        self
    }

    pub fn with_eigen_method(mut self, method: EigenMethod) -> Self {
        self.eigen_method = method;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.execution = exec;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 3.0) {
            return Err(FdmError::invalid(format!("beta = {} must lie in (0, 3]", self.beta)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(FdmError::invalid(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if self.dim == 0 {
            return Err(FdmError::invalid("intrinsic dimension must be positive"));
        }
        if self.num_eigs == 0 {
            return Err(FdmError::invalid("need at least one eigenpair"));
        }
        for (name, v) in [("graph threshold", self.graph_threshold), ("KDE bandwidth", self.kde_bandwidth)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(FdmError::invalid(format!("{name} = {v} must be positive")));
                }
            }
        }
        if let GeneratorScale::Custom(c) = self.generator_scale {
            if !(c > 0.0) || !c.is_finite() {
                return Err(FdmError::invalid(format!("generator scale {c} must be positive")));
            }
        }
        if self.beta > self.dim as f64 + 1.0 {
            log::warn!(
                "beta = {} exceeds dim + 1 = {}; no heat kernel of this order exists",
                self.beta,
                self.dim + 1
            );
        }
        Ok(())
    }

    /// `beta >= 2` selects exponential kernels on Euclidean distances.
    pub fn is_local(&self) -> bool {
        self.beta >= 2.0
    }

    /// `t = epsilon^(beta / 2)`.
    pub fn time(&self) -> f64 {
        self.epsilon.powf(self.beta / 2.0)
    }

    /// `alpha = beta / (beta - 1)` on the local branch.
    pub fn alpha(&self) -> Option<f64> {
        self.is_local().then(|| self.beta / (self.beta - 1.0))
    }

    pub fn graph_threshold(&self) -> f64 {
        self.graph_threshold.unwrap_or_else(|| self.epsilon.sqrt())
    }

    pub fn kde_bandwidth(&self) -> f64 {
        self.kde_bandwidth.unwrap_or(self.epsilon)
    }

    pub fn family(&self) -> KernelFamily {
        match self.alpha() {
            Some(alpha) => KernelFamily::Local { alpha, dim: self.dim },
            None => KernelFamily::Nonlocal { dim: self.dim, beta: self.beta },
        }
    }

    /// Constant dividing `-log(eta) / t` in the eigenvalue estimates.
    pub fn generator_constant(&self) -> f64 {
        match self.generator_scale {
            GeneratorScale::Kernel => self.family().generator_constant(),
            GeneratorScale::Unit => 1.0,
            GeneratorScale::Custom(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-(d / sqrt(eps))^alpha)`.
    Local { alpha: f64, dim: usize },
    /// `(1 + d / sqrt(eps))^-(dim + beta)`.
    Nonlocal { dim: usize, beta: f64 },
}

impl KernelFamily {
    /// Profile as a function of the scaled distance `s = d / sqrt(eps)`.
    #[inline]
    pub fn profile(&self, s: f64) -> f64 {
        match *self {
            KernelFamily::Local { alpha, .. } => (-s.powf(alpha)).exp(),
            KernelFamily::Nonlocal { dim, beta } => (1.0 + s).powf(-(dim as f64 + beta)),
        }
    }

    /// Coefficient `c` in `(I - H) / t -> c * L` for small bandwidth, where `L`
    /// is the Laplacian (local) or the fractional Laplacian with the integral
    /// constant `c_{d,beta/2}` (nonlocal).
    ///
    /// Local: `m2 / (2 m0)` with the moments of `exp(-|z|^alpha)` in `R^d`,
    /// i.e. `Gamma((d + 2)/alpha) / (2 d Gamma(d/alpha))` (1/4 for the Gaussian).
    ///
    /// Nonlocal: the profile has tail `s^-(d + beta)` and mass
    /// `m0 = |S^(d-1)| Gamma(d) Gamma(beta) / Gamma(d + beta)`, so the normalized
    /// kernel has jump intensity `1 / m0`; dividing by `c_{d,beta/2}` gives
    /// `1 / (m0 c_{d,beta/2})`.
    pub fn generator_constant(&self) -> f64 {
        match *self {
            KernelFamily::Local { alpha, dim } => {
                let d = dim as f64;
                gamma((d + 2.0) / alpha) / (2.0 * d * gamma(d / alpha))
            }
            KernelFamily::Nonlocal { dim, beta } => {
                let d = dim as f64;
                let sphere_area = 2.0 * PI.powf(d / 2.0) / gamma(d / 2.0);
                let m0 = sphere_area * gamma(d) * gamma(beta) / gamma(d + beta);
                1.0 / (m0 * frac_laplacian_constant(dim, beta / 2.0))
            }
        }
    }
}

/// Symmetric kernel matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Array2<f64>,
    pub family: KernelFamily,
}

fn apply_profile(dist: &DistanceMatrix, family: KernelFamily, epsilon: f64, exec: Execution) -> Array2<f64> {
    let scale = 1.0 / epsilon.sqrt();
    let mut out = Array2::zeros(dist.values.raw_dim());
    par::for_each_row(exec, &mut out, |i, mut row| {
        for (o, &d) in row.iter_mut().zip(dist.values.row(i)) {
            *o = family.profile(d * scale);
        }
    });
    out
}

/// `K_ij = exp(-(A_ij / sqrt(eps))^alpha)` with `alpha = beta / (beta - 1)`.
pub fn local_kernel(dist: &DistanceMatrix, config: &FdmConfig) -> Result<KernelMatrix> {
    let Some(alpha) = config.alpha() else {
        return Err(FdmError::BranchMismatch(format!(
            "local kernels need beta >= 2, got {}",
            config.beta
        )));
    };
    if dist.kind != DistanceKind::Euclidean {
        return Err(FdmError::KindMismatch(format!(
            "local kernels use Euclidean distances, got {:?}",
            dist.kind
        )));
    }
    let family = KernelFamily::Local { alpha, dim: config.dim };
    Ok(KernelMatrix { values: apply_profile(dist, family, config.epsilon, config.execution), family })
}

/// `K_ij = (1 + d_ij / sqrt(eps))^-(dim + beta)` on geodesic estimates.
pub fn nonlocal_kernel(dist: &DistanceMatrix, config: &FdmConfig) -> Result<KernelMatrix> {
    if config.is_local() {
        return Err(FdmError::BranchMismatch(format!(
            "nonlocal kernels need beta < 2, got {}",
            config.beta
        )));
    }
    if !(config.beta > 0.0) {
        return Err(FdmError::invalid(format!("beta = {} must be positive", config.beta)));
    }
    if dist.kind == DistanceKind::Euclidean {
        return Err(FdmError::KindMismatch(
            "nonlocal kernels need geodesic (graph or analytic) distances, not Euclidean ones".into(),
        ));
    }
    let family = KernelFamily::Nonlocal { dim: config.dim, beta: config.beta };
    Ok(KernelMatrix { values: apply_profile(dist, family, config.epsilon, config.execution), family })
}

/// `q_i = (2 pi tau)^(-d/2) / N * sum_j exp(-A_ij^2 / (2 tau))`, self term
/// included, with `tau` the KDE bandwidth.
pub fn gaussian_kde(dist: &DistanceMatrix, config: &FdmConfig) -> Result<Array1<f64>> {
    if dist.kind != DistanceKind::Euclidean {
        return Err(FdmError::KindMismatch(format!(
            "the density estimate uses Euclidean distances, got {:?}",
            dist.kind
        )));
    }
    let tau = config.kde_bandwidth();
    let norm = (2.0 * PI * tau).powf(-(config.dim as f64) / 2.0) / dist.len() as f64;
    let sums = par::map_range(config.execution, dist.len(), |i| {
        dist.values.row(i).iter().map(|a| (-a * a / (2.0 * tau)).exp()).sum::<f64>()
    });
    Ok(Array1::from(sums) * norm)
}

/// Density estimate at `m` query points from their distances (`m x N`) to
/// the `N` reference samples.
pub fn gaussian_kde_cross(cross: &Array2<f64>, tau: f64, dim: usize) -> Array1<f64> {
    let norm = (2.0 * PI * tau).powf(-(dim as f64) / 2.0) / cross.ncols() as f64;
    cross.map_axis(ndarray::Axis(1), |row| row.iter().map(|a| (-a * a / (2.0 * tau)).exp()).sum::<f64>() * norm)
}
