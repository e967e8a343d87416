//! Lanczos iteration with full reorthogonalization and locking.
//!
//! A single Krylov sequence sees only one direction of an exactly repeated
//! eigenvalue, so after a round converges its Ritz vectors are locked and a
//! fresh round runs on the deflated operator. Rounds stop once the leading
//! deflated Ritz value no longer enters the top `k`.

use ndarray::Array2;

use super::ql::tridiagonal_top;
use crate::error::{FdmError, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Ritz residuals must fall below `tol * ||A||`.
    pub tol: f64,
    /// Total matrix-vector products allowed, as a multiple of `n`.
    pub max_iter_factor: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-12, max_iter_factor: 10, seed: 0x5eed }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in against {
            let h = dot(q, w);
            axpy(-h, q, w);
        }
    }
}

/// Top `k` eigenpairs of the symmetric operator `op` (`y = A x`), descending.
pub fn lanczos_top<F>(n: usize, op: F, k: usize, opts: LanczosOptions) -> Result<(Vec<f64>, Array2<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(FdmError::invalid(format!("cannot extract {k} eigenpairs of a {n} x {n} matrix")));
    }
    let max_iter = opts.max_iter_factor.max(1) * n;
    let mut rng = CounterRng::new(opts.seed);
    let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut total = 0usize;
    let mut anorm = 0.0f64;

    loop {
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|(_, v)| v.clone()).collect();
        let room = n - locked.len();
        if room == 0 {
            break;
        }
        let mut q: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
        orthogonalize(&mut q, &locked_vecs);
        let nq = dot(&q, &q).sqrt();
        if nq == 0.0 {
            break;
        }
        q.iter_mut().for_each(|x| *x /= nq);

        let mut basis: Vec<Vec<f64>> = vec![q];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let want = k.min(room);
        let mut w = vec![0.0; n];
        let ritz = loop {
            let j = basis.len() - 1;
            op(&basis[j], &mut w);
            total += 1;
            let alpha = dot(&basis[j], &w);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            orthogonalize(&mut w, &locked_vecs);
            orthogonalize(&mut w, &basis);
            alphas.push(alpha);
            let beta = dot(&w, &w).sqrt();
            let m = alphas.len();
            let breakdown = beta <= f64::EPSILON * anorm.max(alpha.abs()).max(f64::MIN_POSITIVE) || m == room;

            if m >= want && (breakdown || m.is_multiple_of(5)) {
                let (vals, y) = tridiagonal_top(&alphas, &betas, want)?;
                anorm = vals.iter().fold(anorm, |a, v| a.max(v.abs()));
                let tol = opts.tol * anorm.max(f64::MIN_POSITIVE);
                let converged = breakdown || (0..want).all(|c| (beta * y[[m - 1, c]]).abs() <= tol);
                if converged {
                    break (vals, y);
                }
            }
            if total > max_iter {
                return Err(FdmError::NoConvergence(format!(
                    "Lanczos exceeded {max_iter} iterations with {} of {k} pairs locked",
                    locked.len()
                )));
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(std::mem::replace(&mut w, vec![0.0; n]));
            betas.push(beta);
        };

        let (vals, y) = ritz;
        let kth = if locked.len() >= k {
            let mut lv: Vec<f64> = locked.iter().map(|(v, _)| *v).collect();
            lv.sort_by(|a, b| b.total_cmp(a));
            Some(lv[k - 1])
        } else {
            None
        };
        let margin = opts.tol.max(1e-10) * anorm;
        let mut added = 0;
        for (c, &val) in vals.iter().enumerate() {
            if let Some(kth) = kth {
                if val <= kth + margin {
                    continue;
                }
            }
            let mut x = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                axpy(y[[i, c]], b, &mut x);
            }
            let current: Vec<Vec<f64>> = locked.iter().map(|(_, v)| v.clone()).collect();
            orthogonalize(&mut x, &current);
            let nx = dot(&x, &x).sqrt();
            if nx < 0.5 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            locked.push((val, x));
            added += 1;
        }
        if added == 0 {
            break;
        }
    }

    locked.sort_by(|a, b| b.0.total_cmp(&a.0));
    locked.truncate(k);
    if locked.len() < k {
        return Err(FdmError::NoConvergence(format!("Lanczos found {} of {k} eigenpairs", locked.len())));
    }
    let mut vecs = Array2::zeros((n, k));
    for (c, (_, v)) in locked.iter().enumerate() {
        for (i, x) in v.iter().enumerate() {
            vecs[[i, c]] = *x;
        }
    }
    Ok((locked.into_iter().map(|(v, _)| v).collect(), vecs))
}
