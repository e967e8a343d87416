//! Householder reduction of a symmetric matrix to tridiagonal form.

use ndarray::{Array2, ArrayView2, Axis};

use crate::par::{self, Execution};

/// `A = Q T Q^T` with `Q = P_0 P_1 ... P_{n-3}` and `P_k = I - beta_k v_k v_k^T`
/// acting on coordinates `k+1..n`.
#[derive(Debug, Clone)]
pub struct Tridiagonalization {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl Tridiagonalization {
    /// Reads only the lower triangle of `a`.
    pub fn new(a: ArrayView2<'_, f64>, exec: Execution) -> Self {
        let n = a.nrows();
        let mut w: Vec<f64> = a.iter().copied().collect();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let mut v: Vec<f64> = (0..m).map(|i| w[(k + 1 + i) * n + k]).collect();
            let tail: f64 = v[1..].iter().map(|x| x * x).sum();
            diag[k] = w[k * n + k];
            if tail == 0.0 {
                off[k] = v[0];
                reflectors.push((Vec::new(), 0.0));
                continue;
            }
            let norm = (v[0] * v[0] + tail).sqrt();
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv = v[0] * v[0] + tail;
            let beta = 2.0 / vtv;
            off[k] = alpha;

            // p = beta * A22 v from the lower triangle
            let mut p = vec![0.0; m];
            for i in 0..m {
                let row = &w[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + k + 2 + i];
                let vi = v[i];
                let mut acc = 0.0;
                for j in 0..i {
                    acc += row[j] * v[j];
                    p[j] += row[j] * vi;
                }
                p[i] += acc + row[i] * vi;
            }
            for x in p.iter_mut() {
                *x *= beta;
            }
            let kk = 0.5 * beta * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let q: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();

            // A22 -= v q^T + q v^T on the lower triangle
            par::for_each_chunk(exec, &mut w, n, |row, chunk| {
                if row <= k {
                    return;
                }
                let i = row - k - 1;
                let (vi, qi) = (v[i], q[i]);
                let seg = &mut chunk[k + 1..k + 2 + i];
                for (j, x) in seg.iter_mut().enumerate() {
                    *x -= vi * q[j] + qi * v[j];
                }
            });
            reflectors.push((v, beta));
        }
        if n >= 2 {
            diag[n - 2] = w[(n - 2) * n + n - 2];
            off[n - 2] = w[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            diag[n - 1] = w[(n - 1) * n + n - 1];
        }
        Tridiagonalization { diag, off, reflectors }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `x <- Q x`.
    pub fn apply_q(&self, x: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            reflect(&mut x[k + 1..], v, *beta);
        }
    }

    /// `x <- Q^T x`.
    pub fn apply_qt(&self, x: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            reflect(&mut x[k + 1..], v, *beta);
        }
    }

    /// `Z <- Q Z` for an `n x k` block.
    pub fn apply_q_block(&self, z: &mut Array2<f64>) {
        let cols = z.ncols();
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let mut sub = z.slice_mut(ndarray::s![k + 1.., ..]);
            let mut w = vec![0.0; cols];
            for (vi, row) in v.iter().zip(sub.axis_iter(Axis(0))) {
                for (wj, r) in w.iter_mut().zip(row) {
                    *wj += vi * r;
                }
            }
            for (vi, mut row) in v.iter().zip(sub.axis_iter_mut(Axis(0))) {
                let f = beta * vi;
                for (r, wj) in row.iter_mut().zip(&w) {
                    *r -= f * wj;
                }
            }
        }
    }
}

fn reflect(x: &mut [f64], v: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let f = beta * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
