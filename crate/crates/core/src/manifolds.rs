//! Sample sets on the circle, the sphere and the unit interval, with the
//! analytic ground truth used to validate the estimates.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use statrs::function::gamma::gamma;

use crate::error::{FdmError, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldTag {
    Circle,
    Sphere,
    Interval,
    External,
}

impl ManifoldTag {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldTag::Circle => "circle",
            ManifoldTag::Sphere => "sphere",
            ManifoldTag::Interval => "interval",
            ManifoldTag::External => "external",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [ManifoldTag::Circle, ManifoldTag::Sphere, ManifoldTag::Interval, ManifoldTag::External]
            .into_iter()
            .find(|t| t.name() == name)
    }
}

/// Ambient coordinates of `N` samples, one per row, with optional chart
/// coordinates (radians on the circle and sphere, the unit interval itself on
/// `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub ambient: Array2<f64>,
    pub intrinsic: Option<Array2<f64>>,
    pub tag: ManifoldTag,
}

impl PointCloud {
    pub fn new(ambient: Array2<f64>, intrinsic: Option<Array2<f64>>, tag: ManifoldTag) -> Result<Self> {
        if let Some(chart) = &intrinsic {
            if chart.nrows() != ambient.nrows() {
                return Err(FdmError::invalid(format!(
                    "intrinsic coordinates have {} rows, ambient {}",
                    chart.nrows(),
                    ambient.nrows()
                )));
            }
        }
        let cloud = PointCloud { ambient, intrinsic, tag };
        cloud.validate()?;
        Ok(cloud)
    }

    /// A cloud with no known structure.
    pub fn external(ambient: Array2<f64>) -> Self {
        PointCloud { ambient, intrinsic: None, tag: ManifoldTag::External }
    }

    pub fn len(&self) -> usize {
        self.ambient.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.ambient.nrows() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.ambient.row(i)
    }

    /// Rows `idx` of this cloud, in that order.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        let ambient = self.ambient.select(ndarray::Axis(0), idx);
        let intrinsic = self.intrinsic.as_ref().map(|c| c.select(ndarray::Axis(0), idx));
        PointCloud { ambient, intrinsic, tag: self.tag }
    }

    /// First intrinsic coordinate of every sample (the angle on the circle).
    pub fn chart_column(&self, col: usize) -> Option<Array1<f64>> {
        self.intrinsic.as_ref().map(|c| c.column(col).to_owned())
    }

    /// Checks the per-manifold invariants: unit norms on the circle and
    /// sphere, `[0, 1]` on the interval, and that the chart reproduces the
    /// ambient coordinates.
    pub fn validate(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        let expect_dim = match self.tag {
            ManifoldTag::Circle => Some(2),
            ManifoldTag::Sphere => Some(3),
            ManifoldTag::Interval => Some(1),
            ManifoldTag::External => None,
        };
        if let Some(n) = expect_dim {
            if self.ambient_dim() != n {
                return Err(FdmError::invalid(format!(
                    "{} cloud must have ambient dimension {n}, got {}",
                    self.tag.name(),
                    self.ambient_dim()
                )));
            }
        }
        for (i, row) in self.ambient.outer_iter().enumerate() {
            match self.tag {
                ManifoldTag::Circle | ManifoldTag::Sphere => {
                    let norm = row.dot(&row).sqrt();
                    if (norm - 1.0).abs() > TOL {
                        return Err(FdmError::invalid(format!("sample {i} has norm {norm}, expected 1")));
                    }
                }
                ManifoldTag::Interval => {
                    if !(0.0..=1.0).contains(&row[0]) {
                        return Err(FdmError::invalid(format!("sample {i} = {} outside [0, 1]", row[0])));
                    }
                }
                ManifoldTag::External => {}
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FdmError::invalid(format!("sample {i} is not finite")));
            }
        }
        if let Some(chart) = &self.intrinsic {
            for (i, (row, c)) in self.ambient.outer_iter().zip(chart.outer_iter()).enumerate() {
                let embedded = match self.tag {
                    ManifoldTag::Circle => vec![c[0].cos(), c[0].sin()],
                    ManifoldTag::Sphere => sphere_embed(c[0], c[1]).to_vec(),
                    ManifoldTag::Interval => vec![c[0]],
                    ManifoldTag::External => continue,
                };
                for (a, b) in row.iter().zip(&embedded) {
                    if (a - b).abs() > TOL {
                        return Err(FdmError::invalid(format!("sample {i}: chart does not reproduce ambient")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 3 {
        return Err(FdmError::invalid(format!("need at least 3 samples, got {n}")));
    }
    Ok(())
}

fn circle_from_angles(theta: Vec<f64>) -> PointCloud {
    let n = theta.len();
    let mut ambient = Array2::zeros((n, 2));
    for (i, t) in theta.iter().enumerate() {
        ambient[[i, 0]] = t.cos();
        ambient[[i, 1]] = t.sin();
    }
    let intrinsic = Array2::from_shape_vec((n, 1), theta).expect("shape");
    PointCloud { ambient, intrinsic: Some(intrinsic), tag: ManifoldTag::Circle }
}

/// `theta_i = 2 pi i / N` for `i = 1..=N`.
pub fn circle_uniform_grid(n: usize) -> Result<PointCloud> {
    check_count(n)?;
    Ok(circle_from_angles(uniform_angles(n)))
}

fn uniform_angles(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// The uniform grid pushed through `theta - sin(theta) / 2`.
pub fn circle_nonuniform_grid(n: usize) -> Result<PointCloud> {
    check_count(n)?;
    let theta = uniform_angles(n).into_iter().map(|t| t - t.sin() / 2.0).collect();
    Ok(circle_from_angles(theta))
}

/// `theta_i = 2 pi r_i` with `r_i` uniform on `[0, 1)` from [`CounterRng`].
pub fn circle_random(n: usize, seed: u64) -> Result<PointCloud> {
    check_count(n)?;
    let mut rng = CounterRng::new(seed);
    let theta = (0..n).map(|_| 2.0 * PI * rng.next_f64()).collect();
    Ok(circle_from_angles(theta))
}

/// `x_i = (i - 1) / (N - 1)`.
pub fn interval_grid(n: usize) -> Result<PointCloud> {
    check_count(n)?;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let ambient = Array2::from_shape_vec((n, 1), xs).expect("shape");
    Ok(PointCloud { intrinsic: Some(ambient.clone()), ambient, tag: ManifoldTag::Interval })
}

pub const MAX_ICOSPHERE_LEVEL: u32 = 6;

/// Subdivided icosahedron: vertices on the unit sphere and triangular faces.
/// The twelve original vertices come first.
#[derive(Debug, Clone)]
pub struct Icosphere {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl Icosphere {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_ICOSPHERE_LEVEL {
            return Err(FdmError::ResourceLimit(format!(
                "icosphere level {level} exceeds {MAX_ICOSPHERE_LEVEL} ({} points)",
                icosphere_size(level)
            )));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<[f64; 3]> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| normalize3(*v))
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[a], vertices[b]);
                    vertices.push(normalize3([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                    vertices.len() - 1
                })
            };
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Ok(Icosphere { vertices, faces })
    }

    /// Mesh neighbours of every vertex, sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Number of vertices at a subdivision level: `10 * 4^level + 2`.
pub fn icosphere_size(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// `(sin(polar) cos(azimuth), sin(polar) sin(azimuth), cos(polar))`.
pub fn sphere_embed(polar: f64, azimuth: f64) -> [f64; 3] {
    [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()]
}

/// Near-uniform sphere grid from icosahedral subdivision, `10 * 4^level + 2`
/// points. Chart columns are (polar, azimuth) in radians.
pub fn sphere_icosphere_grid(level: u32) -> Result<PointCloud> {
    let mesh = Icosphere::new(level)?;
    let n = mesh.vertices.len();
    let mut ambient = Array2::zeros((n, 3));
    let mut chart = Array2::zeros((n, 2));
    for (i, v) in mesh.vertices.iter().enumerate() {
        let polar = v[2].clamp(-1.0, 1.0).acos();
        let azimuth = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        // Store the embedding of the chart so the two agree to rounding.
        let e = sphere_embed(polar, azimuth);
        for k in 0..3 {
            ambient[[i, k]] = e[k];
        }
        chart[[i, 0]] = polar;
        chart[[i, 1]] = azimuth;
    }
    Ok(PointCloud { ambient, intrinsic: Some(chart), tag: ManifoldTag::Sphere })
}

/// Great-circle distance between two points on the unit sphere.
pub fn sphere_geodesic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != 3 || y.len() != 3 {
        return Err(FdmError::invalid("sphere points must be 3-vectors"));
    }
    for p in [x, y] {
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(FdmError::invalid(format!("point with norm {norm} is not on the unit sphere")));
        }
    }
    Ok(unit_sphere_distance(x, y))
}

#[inline]
pub(crate) fn unit_sphere_distance(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Arc length between two angles on the unit circle.
pub fn circle_geodesic(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Which Fourier function a circle eigenpair index refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FourierKind {
    Constant,
    Sin(u32),
    Cos(u32),
}

impl FourierKind {
    pub fn eval(self, theta: f64) -> f64 {
        match self {
            FourierKind::Constant => 1.0,
            FourierKind::Sin(j) => (j as f64 * theta).sin(),
            FourierKind::Cos(j) => (j as f64 * theta).cos(),
        }
    }
}

/// Eigenpair `index` (1-based: 1 is the constant, `2j` is `sin(j theta)`,
/// `2j + 1` is `cos(j theta)`) of the fractional Laplacian of order `beta`
/// on the unit circle. Returns the eigenvalue `j^beta` and the function.
pub fn circle_truth(index: usize, beta: f64) -> Result<(f64, FourierKind)> {
    if index == 0 {
        return Err(FdmError::invalid("circle eigenpair indices start at 1"));
    }
    if index == 1 {
        return Ok((0.0, FourierKind::Constant));
    }
    let j = (index / 2) as u32;
    let kind = if index.is_multiple_of(2) { FourierKind::Sin(j) } else { FourierKind::Cos(j) };
    Ok(((j as f64).powf(beta), kind))
}

/// Analytic eigenpairs of a manifold, indexed from 0 (the constant).
pub trait AnalyticTruth {
    /// Eigenvalue of `(-Laplacian)^(beta/2)` for eigenpair `index`.
    fn eigenvalue(&self, index: usize, beta: f64) -> f64;

    /// First `count` eigenfunctions evaluated on the cloud, one per column,
    /// each scaled to unit root-mean-square over the samples.
    fn basis(&self, cloud: &PointCloud, count: usize) -> Result<Array2<f64>>;

    fn geodesic(&self, x: &[f64], y: &[f64]) -> f64;

    fn eigenvalues(&self, count: usize, beta: f64) -> Vec<f64> {
        (0..count).map(|i| self.eigenvalue(i, beta)).collect()
    }
}

fn chart_of(cloud: &PointCloud, tag: ManifoldTag) -> Result<&Array2<f64>> {
    if cloud.tag != tag {
        return Err(FdmError::invalid(format!("expected a {} cloud, got {}", tag.name(), cloud.tag.name())));
    }
    cloud
        .intrinsic
        .as_ref()
        .ok_or_else(|| FdmError::invalid("analytic truth needs intrinsic coordinates"))
}

fn unit_rms_columns(mut m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows() as f64;
    for mut col in m.columns_mut() {
        let rms = (col.dot(&col) / n).sqrt();
        if rms > 0.0 {
            col.mapv_inplace(|v| v / rms);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CircleTruth;

impl AnalyticTruth for CircleTruth {
    fn eigenvalue(&self, index: usize, beta: f64) -> f64 {
        circle_truth(index + 1, beta).map(|(l, _)| l).unwrap_or(0.0)
    }

    fn basis(&self, cloud: &PointCloud, count: usize) -> Result<Array2<f64>> {
        let chart = chart_of(cloud, ManifoldTag::Circle)?;
        let mut m = Array2::zeros((cloud.len(), count));
        for k in 0..count {
            let (_, f) = circle_truth(k + 1, 1.0)?;
            for i in 0..cloud.len() {
                m[[i, k]] = f.eval(chart[[i, 0]]);
            }
        }
        Ok(unit_rms_columns(m))
    }

    fn geodesic(&self, x: &[f64], y: &[f64]) -> f64 {
        circle_geodesic(x[1].atan2(x[0]), y[1].atan2(y[0]))
    }
}

/// Real spherical harmonics, eigenvalues `l (l + 1)` with multiplicity `2l + 1`.
/// Within a degree the order is `m = 0, 1, -1, 2, -2, ...` (cosine before sine).
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereTruth;

impl SphereTruth {
    /// `(l, m)` for a 0-based eigenpair index.
    pub fn degree_order(index: usize) -> (usize, i64) {
        let l = (index as f64).sqrt().floor() as usize;
        let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
        let r = index - l * l;
        let m = if r == 0 { 0 } else if r % 2 == 1 { (r as i64 + 1) / 2 } else { -(r as i64 / 2) };
        (l, m)
    }

    /// Unnormalized harmonic `index` at (polar, azimuth).
    pub fn value(index: usize, polar: f64, azimuth: f64) -> f64 {
        let (l, m) = Self::degree_order(index);
        let p = associated_legendre(l, polar.cos());
        harmonic(&p, l, m, azimuth)
    }
}

fn harmonic(p: &[Vec<f64>], l: usize, m: i64, azimuth: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let angular = match m.cmp(&0) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => (am as f64 * azimuth).cos(),
        std::cmp::Ordering::Less => (am as f64 * azimuth).sin(),
    };
    p[l][am] * angular
}

/// Associated Legendre functions `P_l^m(x)` for `0 <= m <= l <= lmax`,
/// without the Condon-Shortley phase. Indexed `[l][m]`.
fn associated_legendre(lmax: usize, x: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0][0] = 1.0;
    for m in 1..=lmax {
        p[m][m] = p[m - 1][m - 1] * (2 * m - 1) as f64 * s;
    }
    for m in 0..lmax {
        p[m + 1][m] = x * (2 * m + 1) as f64 * p[m][m];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            p[l][m] = (x * (2 * l - 1) as f64 * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m]) / (l - m) as f64;
        }
    }
    p
}

impl AnalyticTruth for SphereTruth {
    fn eigenvalue(&self, index: usize, beta: f64) -> f64 {
        let (l, _) = Self::degree_order(index);
        let lap = (l * (l + 1)) as f64;
        if lap == 0.0 {
            0.0
        } else {
            lap.powf(beta / 2.0)
        }
    }

    fn basis(&self, cloud: &PointCloud, count: usize) -> Result<Array2<f64>> {
        let chart = chart_of(cloud, ManifoldTag::Sphere)?;
        let lmax = if count == 0 { 0 } else { Self::degree_order(count - 1).0 };
        let mut m = Array2::zeros((cloud.len(), count));
        for i in 0..cloud.len() {
            let (polar, azimuth) = (chart[[i, 0]], chart[[i, 1]]);
            let p = associated_legendre(lmax, polar.cos());
            for k in 0..count {
                let (l, order) = Self::degree_order(k);
                m[[i, k]] = harmonic(&p, l, order, azimuth);
            }
        }
        Ok(unit_rms_columns(m))
    }

    fn geodesic(&self, x: &[f64], y: &[f64]) -> f64 {
        unit_sphere_distance(x, y)
    }
}

/// Neumann Laplacian on `[0, 1]`: `cos(pi k x)` with eigenvalue `(pi k)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntervalTruth;

impl AnalyticTruth for IntervalTruth {
    fn eigenvalue(&self, index: usize, beta: f64) -> f64 {
        if index == 0 {
            0.0
        } else {
            (PI * index as f64).powf(beta)
        }
    }

    fn basis(&self, cloud: &PointCloud, count: usize) -> Result<Array2<f64>> {
        let chart = chart_of(cloud, ManifoldTag::Interval)?;
        let m = Array2::from_shape_fn((cloud.len(), count), |(i, k)| (PI * k as f64 * chart[[i, 0]]).cos());
        Ok(unit_rms_columns(m))
    }

    fn geodesic(&self, x: &[f64], y: &[f64]) -> f64 {
        (x[0] - y[0]).abs()
    }
}

/// Ground truth for a tagged cloud, if one exists.
pub fn truth_for(tag: ManifoldTag) -> Option<Box<dyn AnalyticTruth + Send + Sync>> {
    match tag {
        ManifoldTag::Circle => Some(Box::new(CircleTruth)),
        ManifoldTag::Sphere => Some(Box::new(SphereTruth)),
        ManifoldTag::Interval => Some(Box::new(IntervalTruth)),
        ManifoldTag::External => None,
    }
}

/// Normalization constant `c_{n,s}` of the integral fractional Laplacian in
/// `R^n`: `s 4^s Gamma((n + 2s)/2) / (pi^(n/2) Gamma(1 - s))`.
pub fn frac_laplacian_constant(n: usize, s: f64) -> f64 {
    let n = n as f64;
    s * 4f64.powf(s) * gamma((n + 2.0 * s) / 2.0) / (PI.powf(n / 2.0) * gamma(1.0 - s))
}

/// Regional fractional Laplacian of order `s = 1/2` on `[0, 1]` applied to
/// `u(x) = x^2`: `c_{1,1/2} (-1 + 2x log(x / (1 - x)))`.
pub fn regional_frac_laplacian_half(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(FdmError::Domain(format!("x = {x} must lie strictly inside (0, 1)")));
    }
    Ok(frac_laplacian_constant(1, 0.5) * (-1.0 + 2.0 * x * (x / (1.0 - x)).ln()))
}

/// Neumann cosine coefficient `<u, cos(pi k x)> / ||cos(pi k x)||^2` of
/// `u(x) = x^2`, `k >= 1`: `4 (-1)^k / (pi k)^2`.
pub fn interval_square_coefficient(k: usize) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    4.0 * sign / (PI * k as f64).powi(2)
}

/// Spectral fractional Laplacian of order `s` of `u(x) = x^2` on `[0, 1]`
/// with Neumann eigenfunctions, truncated to `terms` modes.
pub fn spectral_frac_laplacian_interval(x: &[f64], s: f64, terms: usize) -> Result<Vec<f64>> {
    if terms == 0 {
        return Err(FdmError::invalid("need at least one spectral term"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(FdmError::invalid(format!("order s = {s} must lie in (0, 1)")));
    }
    let weights: Vec<f64> = (1..=terms)
        .map(|k| (PI * k as f64).powi(2).powf(s) * interval_square_coefficient(k))
        .collect();
    Ok(x
        .iter()
        .map(|&xi| weights.iter().enumerate().map(|(k, w)| w * (PI * (k + 1) as f64 * xi).cos()).sum())
        .collect())
}
