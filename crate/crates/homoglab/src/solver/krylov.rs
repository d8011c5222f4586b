//! Preconditioned Krylov iterations: CG for symmetric operators, BiCGStab
//! (transpose-free) for non-symmetric ones.

use crate::error::{Error, Result};
use crate::parallel::{axpy, dot, norm_sq, xpby};

pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    /// Unpreconditioned residual l2 norms per iteration (recursive updates).
    pub history: Vec<f64>,
    pub converged: bool,
}

pub fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol_abs: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![norm_sq(&r).sqrt()];
    if history[0] <= tol_abs {
        return Ok(KrylovOutcome {
            x,
            iters: 0,
            history,
            converged: true,
        });
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::IllConditioned);
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rnorm = norm_sq(&r).sqrt();
        history.push(rnorm);
        if rnorm <= tol_abs {
            return Ok(KrylovOutcome {
                x,
                iters: it,
                history,
                converged: true,
            });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        xpby(&mut p, &z, beta);
        rz = rz_new;
    }
    let iters = max_iter;
    Ok(KrylovOutcome {
        x,
        iters,
        history,
        converged: false,
    })
}

pub fn bicgstab(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol_abs: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = vec![norm_sq(&r).sqrt()];
    if history[0] <= tol_abs {
        return Ok(KrylovOutcome {
            x,
            iters: 0,
            history,
            converged: true,
        });
    }
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        // p = r + beta (p - omega v)
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut p_hat);
        apply(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm_sq(&s).sqrt();
        if snorm <= tol_abs {
            axpy(&mut x, alpha, &p_hat);
            history.push(snorm);
            return Ok(KrylovOutcome {
                x,
                iters: it,
                history,
                converged: true,
            });
        }
        precond(&s, &mut s_hat);
        apply(&s_hat, &mut t);
        let tt = norm_sq(&t);
        if tt < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rnorm = norm_sq(&r).sqrt();
        history.push(rnorm);
        if rnorm <= tol_abs {
            return Ok(KrylovOutcome {
                x,
                iters: it,
                history,
                converged: true,
            });
        }
        rho = rho_new;
    }
    let iters = history.len() - 1;
    Ok(KrylovOutcome {
        x,
        iters,
        history,
        converged: false,
    })
}
