//! Dense symmetric eigensolvers and linear solvers.

mod lanczos;
mod ql;
mod solve;
mod tridiag;

use ndarray::{Array2, ArrayView2};

pub use lanczos::{lanczos_top, LanczosOptions};
pub use ql::{tridiagonal_eigenvalues, tridiagonal_top, RotationLog};
pub use solve::{solve_tridiagonal, Cholesky};
pub use tridiag::Tridiagonalization;

use crate::error::{FdmError, Result};
use crate::kernels::{EigenMethod, DENSE_EIGEN_LIMIT};
use crate::par::{self, Execution};

/// Rejects matrices whose asymmetry exceeds `1e-12 * max(1, max |a_ij|)`.
pub fn check_symmetric(a: ArrayView2<'_, f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(FdmError::invalid(format!("matrix is {} x {}, expected square", n, a.ncols())));
    }
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if !(worst <= 1e-12 * scale) {
        return Err(FdmError::invalid(format!("matrix is not symmetric (max asymmetry {worst:e})")));
    }
    Ok(())
}

/// Largest `k` eigenpairs of a symmetric matrix, eigenvalues descending and
/// eigenvectors orthonormal columns.
pub fn symmetric_top(
    a: ArrayView2<'_, f64>,
    k: usize,
    method: EigenMethod,
    exec: Execution,
) -> Result<(Vec<f64>, Array2<f64>)> {
    check_symmetric(a)?;
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(FdmError::invalid(format!("cannot extract {k} eigenpairs of a {n} x {n} matrix")));
    }
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= DENSE_EIGEN_LIMIT,
    };
    if dense {
        let t = Tridiagonalization::new(a, exec);
        let (vals, mut vecs) = tridiagonal_top(&t.diag, &t.off, k)?;
        t.apply_q_block(&mut vecs);
        Ok((vals, vecs))
    } else {
        let op = |x: &[f64], y: &mut [f64]| {
            let out = par::map_range(exec, n, |i| {
                a.row(i).iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
            });
            y.copy_from_slice(&out);
        };
        lanczos_top(n, op, k, LanczosOptions::default())
    }
}

/// All eigenvalues of a symmetric matrix in descending order.
pub fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let t = Tridiagonalization::new(a, Execution::Sequential);
    let mut ev = tridiagonal_eigenvalues(&t.diag, &t.off, None)?;
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}
