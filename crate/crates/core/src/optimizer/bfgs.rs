//! Derivative-free BFGS ascent: central finite-difference gradients,
//! inverse-Hessian updates and Armijo backtracking.

use nalgebra::{DMatrix, DVector};

use super::OptimizerSettings;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsSettings {
    pub fd_step: f64,
    pub ls_backtrack: f64,
    pub ls_max: usize,
    pub max_iters: usize,
    /// Stop once the max-norm of the gradient is below this.
    pub grad_tol: f64,
    /// Largest max-norm of a trial step.
    pub max_step: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        BfgsSettings::from(&OptimizerSettings::default())
    }
}

impl From<&OptimizerSettings> for BfgsSettings {
    fn from(s: &OptimizerSettings) -> Self {
        BfgsSettings {
            fd_step: s.fd_step,
            ls_backtrack: s.ls_backtrack,
            ls_max: s.ls_max,
            max_iters: s.max_ris_iters,
            grad_tol: 1e-8,
            max_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    pub initial: T,
    pub iterations: usize,
}

fn fd_gradient<T: Real>(f: &mut impl FnMut(&DVector<T>) -> T, x: &DVector<T>, h: T) -> DVector<T> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        g[i] = (up - down) / (h + h);
    }
    g
}

/// Maximize `f` from `x0`. The returned value never falls below `f(x0)`.
pub fn maximize<T: Real>(
    mut f: impl FnMut(&DVector<T>) -> T,
    x0: DVector<T>,
    settings: &BfgsSettings,
) -> BfgsOutcome<T> {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let initial = fx;
    let h = T::lit(settings.fd_step);
    let shrink = T::lit(settings.ls_backtrack);
    let armijo = T::lit(1e-4);
    let grad_tol = T::lit(settings.grad_tol);
    let max_step = T::lit(settings.max_step);
    let mut hinv = DMatrix::<T>::identity(n, n);
    let mut g = fd_gradient(&mut f, &x, h);
    let mut iterations = 0;
    while iterations < settings.max_iters && n > 0 {
        if !(g.amax() > grad_tol) {
            break;
        }
        iterations += 1;
        let mut d = &hinv * &g;
        if !(d.dot(&g) > T::zero()) {
            hinv.fill_with_identity();
            d = g.clone();
        }
        let accepted = loop {
            let slope = d.dot(&g);
            let mut a = (max_step / d.amax()).min(T::one());
            let mut found = None;
            for _ in 0..settings.ls_max {
                let trial = &x + &d * a;
                let ft = f(&trial);
                if ft >= fx + armijo * a * slope {
                    found = Some((trial, ft));
                    break;
                }
                a *= shrink;
            }
            match found {
                Some(step) => break Some(step),
                // a stale curvature model can stall the search; retry along
                // the gradient before giving up
                None if d != g => {
                    hinv.fill_with_identity();
                    d = g.clone();
                }
                None => break None,
            }
        };
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = fd_gradient(&mut f, &x_new, h);
        let s = &x_new - &x;
        // curvature pair of the minimization of -f
        let y = &g - &g_new;
        let sy = s.dot(&y);
        if sy > T::lit(1e-12) * s.norm() * y.norm() {
            let rho = T::one() / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 y'Hy + rho) s s'
            hinv.ger(-rho, &s, &hy, T::one());
            hinv.ger(-rho, &hy, &s, T::one());
            hinv.ger(rho * rho * yhy + rho, &s, &s, T::one());
        }
        let gain = f_new - fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        if gain <= T::lit(1e-14) * (T::one() + fx.abs()) {
            break;
        }
    }
    BfgsOutcome {
        x,
        value: fx,
        initial,
        iterations,
    }
}
