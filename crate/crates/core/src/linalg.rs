//! Preconditioned conjugate gradients for the matrix-free FEM operators.
//!
//! Reductions run sequentially in index order so results are bit-for-bit
//! reproducible.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `|r| / |b|` (zero when `b` vanishes).
    pub relative_residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Removes the mean, the gauge of periodic problems.
pub fn project_mean_zero(v: &mut [f64]) {
    let m = mean(v);
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` from the initial guess in `x`.
///
/// `precond(r, z)` writes `z = P^-1 r` for a symmetric positive definite `P`.
/// With `periodic` set, `A` is taken to be singular with the constants as
/// kernel: residual and search directions are kept mean-zero, and so is the
/// returned solution.
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    periodic: bool,
) -> Result<CgStats> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if periodic {
        project_mean_zero(&mut r);
    }
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut rz_old = 1.0;
    let mut res = norm(&r) / b_norm;
    let mut it = 0;
    while res > tol {
        if it == max_iter {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        precond(&r, &mut z);
        if periodic {
            project_mean_zero(&mut z);
        }
        let rz = dot(&r, &z);
        let beta = if it == 0 { 0.0 } else { rz / rz_old };
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        let alpha = rz / pq;
        let mut sum = 0.0;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            sum += r[i];
        }
        if periodic {
            let m = sum / n as f64;
            r.iter_mut().for_each(|v| *v -= m);
        }
        rz_old = rz;
        res = norm(&r) / b_norm;
        it += 1;
    }
    if periodic {
        project_mean_zero(x);
    }
    Ok(CgStats { iterations: it, relative_residual: res })
}

/// Jacobi preconditioner from the inverse diagonal.
pub fn jacobi(inv_diag: &[f64]) -> impl FnMut(&[f64], &mut [f64]) + '_ {
    move |r, z| {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv_diag) {
            *zi = ri * di;
        }
    }
}
