//! Independent reference implementations used only by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Shortest path lengths by enumerating every simple path (tiny graphs only).
/// Both directions of a pair are enumerated and the smaller floating-point
/// sum is kept, so the result is symmetric bit for bit.
pub fn brute_force_shortest(n: usize, w: &Array2<f64>) -> Array2<f64> {
    fn dfs(u: usize, target: usize, len: f64, seen: &mut Vec<bool>, w: &Array2<f64>, best: &mut f64) {
        if u == target {
            *best = best.min(len);
            return;
        }
        for v in 0..w.nrows() {
            if !seen[v] && w[[u, v]] > 0.0 {
                seen[v] = true;
                dfs(v, target, len + w[[u, v]], seen, w, best);
                seen[v] = false;
            }
        }
    }
    let mut out = Array2::zeros((n, n));
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut best = f64::INFINITY;
            dfs(s, t, 0.0, &mut seen, w, &mut best);
            out[[s, t]] = best;
        }
    }
    for s in 0..n {
        for t in 0..s {
            let d = out[[s, t]].min(out[[t, s]]);
            out[[s, t]] = d;
            out[[t, s]] = d;
        }
    }
    out
}

/// Characteristic polynomial coefficients of `A` (monic, highest degree
/// first) by the Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = Array2::<f64>::zeros((n, n));
    let mut c = 1.0;
    for k in 1..=n {
        m = a.dot(&m) + Array2::<f64>::eye(n) * c;
        let am = a.dot(&m);
        c = -am.diag().sum() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Real roots of the characteristic polynomial of a symmetric matrix, found by
/// bisection on sign changes of `det(A - xI)` with the count of eigenvalues
/// below `x` (Sylvester inertia of an LDL^T factorization) as the bracket
/// guide, then polished by Newton steps on the polynomial. Descending.
pub fn charpoly_roots(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let bound = a.rows().into_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let count_below = |x: f64| -> usize {
        // LDL^T of A - xI without pivoting; count negative pivots
        let mut m = a.clone();
        for i in 0..n {
            m[[i, i]] -= x;
        }
        let mut neg = 0;
        for k in 0..n {
            let mut p = m[[k, k]];
            if p == 0.0 {
                p = 1e-300;
            }
            if p < 0.0 {
                neg += 1;
            }
            for i in k + 1..n {
                let f = m[[i, k]] / p;
                for j in k + 1..n {
                    m[[i, j]] -= f * m[[k, j]];
                }
            }
        }
        neg
    };
    let poly = characteristic_polynomial(a);
    let deriv: Vec<f64> = poly.iter().enumerate().take(n).map(|(i, c)| c * (n - i) as f64).collect();
    let mut roots = Vec::with_capacity(n);
    for k in 0..n {
        // k-th smallest eigenvalue: smallest x with count_below(x) > k
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 * bound {
                break;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = horner(&deriv, x);
            if d.abs() > 1e-8 {
                let step = horner(&poly, x) / d;
                if step.abs() < 1e-10 {
                    x -= step;
                }
            }
        }
        roots.push(x);
    }
    roots.reverse();
    roots
}

/// Random symmetric matrix with entries in `[-1, 1]`.
pub fn random_symmetric(n: usize, rng: &mut fdm_core::rng::CounterRng) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = 2.0 * rng.next_f64() - 1.0;
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Random connected weighted graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(n: usize, rng: &mut fdm_core::rng::CounterRng) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    let order = rng.permutation(n);
    for i in 1..n {
        let parent = order[rng.next_below(i)];
        let weight = 0.1 + rng.next_f64();
        w[[order[i], parent]] = weight;
        w[[parent, order[i]]] = weight;
    }
    for i in 0..n {
        for j in 0..i {
            if w[[i, j]] == 0.0 && rng.next_f64() < 0.3 {
                let weight = 0.1 + rng.next_f64();
                w[[i, j]] = weight;
                w[[j, i]] = weight;
            }
        }
    }
    w
}

pub fn edges_of(w: &Array2<f64>) -> Vec<(usize, usize, f64)> {
    let n = w.nrows();
    let mut e = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if w[[i, j]] > 0.0 {
                e.push((i, j, w[[i, j]]));
            }
        }
    }
    e
}
