//! Matrix-free iterative solvers for `(I + T) x = b` and a spectral
//! radius estimate for `T`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct KrylovOutcome {
    #[serde(skip)]
    pub x: Vec<Complex64>,
    /// Relative residual after each iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest singular value of the last Hessenberg matrix, an upper
    /// bound for `σ_min(I + T)`. `NaN` for stationary iterations.
    pub sigma_min: f64,
}

/// Restarted GMRES for `(I + T) x = b` with `x_0 = 0`.
pub fn gmres(
    mut apply_t: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    b: &[Complex64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = vec![zero; n];
    let mut history = Vec::new();
    let mut sigma_min = f64::NAN;
    if bnorm == 0.0 || n == 0 {
        return Ok(KrylovOutcome { x, history, iterations: 0, converged: true, sigma_min });
    }
    let op = |v: &[Complex64], apply_t: &mut dyn FnMut(&[Complex64]) -> Result<Vec<Complex64>>| -> Result<Vec<Complex64>> {
        let t = apply_t(v)?;
        Ok(v.iter().zip(&t).map(|(a, b)| a + b).collect())
    };
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut total = 0;
    let restart = restart.max(1);
    while total < max_iter {
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut h = vec![vec![zero; restart]; restart + 1];
        let mut cs = vec![zero; restart];
        let mut sn = vec![zero; restart];
        let mut g = vec![zero; restart + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut raw_cols: Vec<Vec<Complex64>> = Vec::new();
        let mut k = 0;
        let mut res = beta / bnorm;
        while k < restart && total < max_iter {
            let mut w = op(&basis[k], &mut apply_t)?;
            for (j, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[j][k] = c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            let raw: Vec<Complex64> = (0..=k + 1).map(|i| h[i][k]).collect();
            for i in 0..k {
                let (a, b) = (h[i][k], h[i + 1][k]);
                h[i][k] = cs[i].conj() * a + sn[i].conj() * b;
                h[i + 1][k] = -sn[i] * a + cs[i] * b;
            }
            let (a, b) = (h[k][k], h[k + 1][k]);
            let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if rho == 0.0 {
                cs[k] = Complex64::new(1.0, 0.0);
                sn[k] = zero;
            } else {
                cs[k] = a / rho;
                sn[k] = b / rho;
            }
            h[k][k] = Complex64::new(rho, 0.0);
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            raw_cols.push(raw);
            total += 1;
            k += 1;
            res = g[k].norm() / bnorm;
            history.push(res);
            if res <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|c| c / wn).collect());
        }
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(a, b)| *a += yj * b);
        }
        sigma_min = hessenberg_sigma_min(&raw_cols);
        if res <= tol {
            let ax = op(&x, &mut apply_t)?;
            let true_res = norm(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
            if true_res <= tol {
                return Ok(KrylovOutcome { x, history, iterations: total, converged: true, sigma_min });
            }
        }
        let ax = op(&x, &mut apply_t)?;
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        beta = norm(&r);
        if beta == 0.0 {
            return Ok(KrylovOutcome { x, history, iterations: total, converged: true, sigma_min });
        }
    }
    Ok(KrylovOutcome { x, history, iterations: total, converged: false, sigma_min })
}

/// Smallest singular value of the `(k+1) × k` Hessenberg matrix whose
/// columns (of growing length) are given.
fn hessenberg_sigma_min(cols: &[Vec<Complex64>]) -> f64 {
    let k = cols.len();
    if k == 0 {
        return f64::NAN;
    }
    let m = DMatrix::from_fn(k + 1, k, |i, j| cols[j].get(i).copied().unwrap_or(Complex64::new(0.0, 0.0)));
    m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Fixed-point iteration `x_{k+1} = b - T x_k` from `x_0 = b`.
pub fn neumann(
    mut apply_t: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let bnorm = norm(b);
    let mut x = b.to_vec();
    let mut history = Vec::new();
    if bnorm == 0.0 || b.is_empty() {
        return Ok(KrylovOutcome { x, history, iterations: 0, converged: true, sigma_min: f64::NAN });
    }
    for it in 1..=max_iter {
        let t = apply_t(&x)?;
        let next: Vec<Complex64> = b.iter().zip(&t).map(|(p, q)| p - q).collect();
        // x + T x - b = x - next
        let res = norm(&x.iter().zip(&next).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
        x = next;
        history.push(res);
        if res <= tol {
            return Ok(KrylovOutcome { x, history, iterations: it, converged: true, sigma_min: f64::NAN });
        }
        if !res.is_finite() {
            break;
        }
    }
    let iterations = history.len();
    Ok(KrylovOutcome { x, history, iterations, converged: false, sigma_min: f64::NAN })
}

/// Spectral radius estimate `(‖T^{k+s} v‖/‖T^k v‖)^{1/s}` by power iteration
/// from `v`, with `k = iters - s` and `s = min(10, iters/2)`.
pub fn spectral_radius(
    mut apply_t: impl FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    v: &[Complex64],
    iters: usize,
) -> Result<f64> {
    let iters = iters.max(2);
    let s = (iters / 2).min(10);
    let mut x = v.to_vec();
    let mut logs = Vec::with_capacity(iters);
    let mut acc = 0.0;
    for _ in 0..iters {
        let n0 = norm(&x);
        if n0 == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|c| *c /= n0);
        x = apply_t(&x)?;
        acc += norm(&x).ln();
        logs.push(acc);
    }
    let hi = logs[iters - 1];
    let lo = logs[iters - 1 - s];
    Ok(((hi - lo) / s as f64).exp())
}
