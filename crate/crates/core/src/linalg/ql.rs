//! Implicit-shift QL iteration on a symmetric tridiagonal matrix.
//!
//! Instead of accumulating the full eigenvector matrix, the plane rotations
//! can be recorded. The eigenvector of eigenvalue `j` is `G_1 ... G_M e_j`, so
//! a few selected eigenvectors cost `O(M k)` by replaying the log backwards.

use ndarray::Array2;

use crate::error::{FdmError, Result};

const MAX_SWEEPS: usize = 60;

/// Sequence of rotations acting on coordinates `(i, i + 1)`.
#[derive(Debug, Default, Clone)]
pub struct RotationLog {
    index: Vec<u32>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RotationLog {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn push(&mut self, i: usize, c: f64, s: f64) {
        self.index.push(i as u32);
        self.cos.push(c);
        self.sin.push(s);
    }

    /// Computes `G_1 ... G_M Y` in place for an `n x k` block `Y`.
    pub fn apply(&self, y: &mut Array2<f64>) {
        let k = y.ncols();
        let data = y.as_slice_mut().expect("standard layout");
        for r in (0..self.index.len()).rev() {
            let i = self.index[r] as usize;
            let (c, s) = (self.cos[r], self.sin[r]);
            let (lo, hi) = data[i * k..(i + 2) * k].split_at_mut(k);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = c * u + s * v;
                *b = c * v - s * u;
            }
        }
    }
}

/// Eigenvalues of the tridiagonal matrix `(diag, off)` in input order of the
/// deflation (unsorted). With `log`, the rotations are recorded.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64], mut log: Option<&mut RotationLog>) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);

    // deflate against the norm seen so far (EISPACK tql2); a purely relative
    // test can stall on a large cluster of noise-level eigenvalues
    let mut scale = 0.0f64;
    for l in 0..n {
        scale = scale.max(d[l].abs() + e[l].abs());
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                if e[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(FdmError::NoConvergence(format!(
                    "QL iteration stalled at eigenvalue {l} of {n}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(log) = log.as_deref_mut() {
                    log.push(i, c, s);
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Largest `k` eigenpairs of a tridiagonal matrix, descending. Eigenvectors
/// are the columns of the returned `n x k` matrix.
pub fn tridiagonal_top(diag: &[f64], off: &[f64], k: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = diag.len();
    let mut log = RotationLog::default();
    let evals = tridiagonal_eigenvalues(diag, off, Some(&mut log))?;
    let order = descending_order(&evals);
    let k = k.min(n);
    let mut y = Array2::zeros((n, k));
    let mut values = Vec::with_capacity(k);
    for (col, &j) in order.iter().take(k).enumerate() {
        y[[j, col]] = 1.0;
        values.push(evals[j]);
    }
    log.apply(&mut y);
    Ok((values, y))
}

pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_level_cluster_converges() {
        // two O(1) eigenvalues on top of hundreds at roundoff scale, the
        // shape of a wide Gaussian kernel after tridiagonalization
        let mut rng = crate::rng::CounterRng::new(5);
        let n = 400;
        let mut d: Vec<f64> = (0..n).map(|_| (rng.next_f64() - 0.5) * 2e-17).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| (rng.next_f64() - 0.5) * 2e-17).collect();
        d[0] = 1.0;
        d[1] = 0.5;
        let (vals, vecs) = tridiagonal_top(&d, &e, 2).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] - 0.5).abs() < 1e-15);
        assert!((vecs[[0, 0]].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two() {
        let (vals, vecs) = tridiagonal_top(&[2.0, 2.0], &[1.0], 2).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[[0, 0]].abs() - r).abs() < 1e-14);
        assert!((vecs[[0, 0]] - vecs[[1, 0]]).abs() < 1e-14);
        assert!((vecs[[0, 1]] + vecs[[1, 1]]).abs() < 1e-14);
    }

    #[test]
    fn free_path_laplacian() {
        // path graph Laplacian eigenvalues 2 - 2 cos(pi j / n)
        let n = 50;
        let mut d = vec![2.0; n];
        d[0] = 1.0;
        d[n - 1] = 1.0;
        let off = vec![-1.0; n - 1];
        let mut ev = tridiagonal_eigenvalues(&d, &off, None).unwrap();
        ev.sort_by(f64::total_cmp);
        for (j, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_residuals() {
        let n = 40;
        let d: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 * 0.3).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + ((i * 3) % 5) as f64 * 0.1).collect();
        let (vals, vecs) = tridiagonal_top(&d, &off, 6).unwrap();
        for c in 0..6 {
            for i in 0..n {
                let mut tv = d[i] * vecs[[i, c]];
                if i > 0 {
                    tv += off[i - 1] * vecs[[i - 1, c]];
                }
                if i + 1 < n {
                    tv += off[i] * vecs[[i + 1, c]];
                }
                assert!((tv - vals[c] * vecs[[i, c]]).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }
}
