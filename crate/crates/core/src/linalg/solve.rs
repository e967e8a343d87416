//! Direct solvers: Cholesky for SPD systems, banded LU for tridiagonal ones.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{FdmError, Result};

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn new(a: ArrayView2<'_, f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(FdmError::invalid("Cholesky needs a square matrix"));
        }
        let mut l = a.to_owned();
        for j in 0..n {
            let mut djj = l[[j, j]];
            for k in 0..j {
                djj -= l[[j, k]] * l[[j, k]];
            }
            if !(djj > 0.0) {
                return Err(FdmError::SpectralFailure(format!(
                    "matrix is not numerically positive definite (pivot {j} = {djj:e})"
                )));
            }
            let djj = djj.sqrt();
            l[[j, j]] = djj;
            let (head, mut tail) = l.view_mut().split_at(ndarray::Axis(0), j + 1);
            let rj = head.row(j);
            for mut ri in tail.rows_mut() {
                let mut s = ri[j];
                for k in 0..j {
                    s -= ri[k] * rj[k];
                }
                ri[j] = s / djj;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                l[[i, j]] = 0.0;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let n = self.l.nrows();
        if b.len() != n {
            return Err(FdmError::invalid(format!("right-hand side has length {}, expected {n}", b.len())));
        }
        let mut x = b.to_owned();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        Ok(x)
    }

    pub fn factor(&self) -> &Array2<f64> {
        &self.l
    }
}

/// Solves `(T + shift I) x = b` for the symmetric tridiagonal `T = (diag, off)`
/// by Gaussian elimination with partial pivoting.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if b.len() != n || off.len() + 1 != n.max(1) {
        return Err(FdmError::invalid("tridiagonal system size mismatch"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // rows stored as (main, upper, second upper) after elimination
    let mut dl: Vec<f64> = off.to_vec();
    let mut d: Vec<f64> = diag.iter().map(|x| x + shift).collect();
    let mut du: Vec<f64> = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(FdmError::SpectralFailure("singular tridiagonal system".into()));
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            x[i + 1] -= f * x[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            du[i] = tmp;
            x.swap(i, i + 1);
            x[i + 1] -= f * x[i];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(FdmError::SpectralFailure("singular tridiagonal system".into()));
    }
    x[n - 1] /= d[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn cholesky_solves_spd() {
        let n = 12;
        let mut rng = CounterRng::new(3);
        let b = Array2::from_shape_fn((n, n), |_| rng.next_f64() - 0.5);
        let a = b.t().dot(&b) + Array2::<f64>::eye(n) * 0.1;
        let rhs = Array1::from_shape_fn(n, |i| (i as f64).sin());
        let x = Cholesky::new(a.view()).unwrap().solve(rhs.view()).unwrap();
        let r = a.dot(&x) - &rhs;
        assert!(r.iter().all(|v| v.abs() < 1e-11));
        let l = Cholesky::new(a.view()).unwrap();
        let back = l.factor().dot(&l.factor().t());
        assert!(back.iter().zip(a.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = ndarray::array![[1.0, 2.0], [2.0, 1.0]];
        assert!(Cholesky::new(a.view()).is_err());
    }

    #[test]
    fn tridiagonal_matches_dense() {
        for n in [1usize, 2, 3, 9] {
            let diag: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.3).collect();
            let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| 1.0 + 0.2 * i as f64).collect();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).ln() + 0.5).collect();
            let shift = 0.05;
            let x = solve_tridiagonal(&diag, &off, shift, &b).unwrap();
            for i in 0..n {
                let mut s = (diag[i] + shift) * x[i];
                if i > 0 {
                    s += off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += off[i] * x[i + 1];
                }
                assert!((s - b[i]).abs() < 1e-11, "n={n} row {i}");
            }
        }
    }
}
