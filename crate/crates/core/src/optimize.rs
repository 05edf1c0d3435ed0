// SPDX-License-Identifier: Apache-2.0

//! Small dense optimizers used by the phase solver.

use nalgebra::{DMatrix, DVector};

const GRAD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    pub f_target: f64,
    pub g_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 400, f_target: 1e-24, g_tol: 1e-13 }
    }
}

pub(crate) fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + GRAD_STEP;
        let fp = f(&xp);
        xp[i] = xi - GRAD_STEP;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * GRAD_STEP);
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton descent with inverse-Hessian updates and Armijo backtracking.
pub(crate) fn bfgs<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &BfgsOptions) -> (Vec<f64>, f64) {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if k == 0 {
        return (x, fx);
    }
    let mut g = numerical_gradient(f, &x);
    let mut h = DMatrix::<f64>::identity(k, k);

    for _ in 0..opts.max_iter {
        if fx <= opts.f_target || g.iter().all(|v| v.abs() <= opts.g_tol) {
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            h = DMatrix::identity(k, k);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fxn = f(&xn);
            if fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else { break };

        let gn = numerical_gradient(f, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let sv = DVector::from_column_slice(&s);
            let yv = DVector::from_column_slice(&y);
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            let rho = 1.0 / sy;
            h += (&sv * sv.transpose()) * ((1.0 + rho * yhy) * rho)
                - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        let stalled = (fx - fxn).abs() <= 1e-16 * fx.abs().max(1e-300);
        x = xn;
        fx = fxn;
        g = gn;
        if stalled && fx > opts.f_target {
            break;
        }
    }
    (x, fx)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gauss-Newton on a residual vector using minimum-norm least-squares steps.
/// Returns the final point and its max-abs residual.
pub(crate) fn gauss_newton<R: Fn(&[f64]) -> Vec<f64>>(r: &R, x0: &[f64], max_iter: usize, tol: f64) -> (Vec<f64>, f64) {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut rx = r(&x);
    let mut err = max_abs(&rx);
    if k == 0 || rx.is_empty() {
        return (x, err);
    }
    for _ in 0..max_iter {
        if err <= tol {
            break;
        }
        let m = rx.len();
        let mut jac = DMatrix::<f64>::zeros(m, k);
        let mut xp = x.clone();
        for i in 0..k {
            let xi = x[i];
            xp[i] = xi + GRAD_STEP;
            let rp = r(&xp);
            xp[i] = xi - GRAD_STEP;
            let rm = r(&xp);
            xp[i] = xi;
            for row in 0..m {
                jac[(row, i)] = (rp[row] - rm[row]) / (2.0 * GRAD_STEP);
            }
        }
        let rhs = DVector::from_column_slice(&rx);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(step) = svd.solve(&rhs, smax * 1e-10) else { break };

        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
            let rn = r(&xn);
            let en = max_abs(&rn);
            if en < err {
                x = xn;
                rx = rn;
                err = en;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, err)
}
