//! Log-barrier interior-point solver for small convex QCQPs
//! `min f0(z) s.t. f_i(z) <= 0` with `f(z) = z'Az + b'z + c`, `A` PSD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub(crate) struct Quad<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: T,
}

impl<T: Real> Quad<T> {
    pub fn zeros(n: usize) -> Self {
        Quad {
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
            c: T::zero(),
        }
    }

    pub fn value(&self, z: &DVector<T>) -> T {
        (&self.a * z).dot(z) + self.b.dot(z) + self.c
    }

    pub fn grad(&self, z: &DVector<T>) -> DVector<T> {
        (&self.a * z) * T::lit(2.0) + &self.b
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierSettings {
    /// Stop once the duality-gap bound `m / tau` falls below this.
    pub gap_tol: f64,
    pub mu: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            gap_tol: 1e-10,
            mu: 20.0,
            newton_tol: 1e-12,
            max_newton: 60,
        }
    }
}

struct Barrier<'a, T: Real> {
    obj: &'a Quad<T>,
    cons: &'a [Quad<T>],
}

impl<T: Real> Barrier<'_, T> {
    /// `tau f0 - sum log(-f_i)`, `None` outside the strict interior.
    fn value(&self, tau: T, z: &DVector<T>) -> Option<T> {
        let mut v = tau * self.obj.value(z);
        for c in self.cons {
            let f = c.value(z);
            if !(f < T::zero()) {
                return None;
            }
            v -= (-f).ln();
        }
        Some(v)
    }

    fn grad_hess(&self, tau: T, z: &DVector<T>) -> (DVector<T>, DMatrix<T>) {
        let two = T::lit(2.0);
        let mut g = self.obj.grad(z) * tau;
        let mut h = &self.obj.a * (two * tau);
        for c in self.cons {
            let f = c.value(z);
            let gi = c.grad(z);
            let inv = -T::one() / f;
            g.axpy(inv, &gi, T::one());
            h += &c.a * (two * inv);
            h.ger(inv * inv, &gi, &gi, T::one());
        }
        (g, h)
    }
}

/// Minimize from a strictly feasible start.
pub(crate) fn minimize<T: Real>(
    obj: &Quad<T>,
    cons: &[Quad<T>],
    z0: DVector<T>,
    settings: &BarrierSettings,
) -> Result<DVector<T>> {
    let barrier = Barrier { obj, cons };
    let m = T::from_usize(cons.len().max(1)).unwrap();
    let mut z = z0;
    let mut tau = T::one();
    if barrier.value(tau, &z).is_none() {
        return Err(Error::Numerical("barrier start is not strictly feasible".into()));
    }
    let gap_tol = T::lit(settings.gap_tol);
    let newton_tol = T::lit(settings.newton_tol);
    let half = T::lit(0.5);
    loop {
        for _ in 0..settings.max_newton {
            let (g, mut h) = barrier.grad_hess(tau, &z);
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    // tiny ridge for numerically semi-definite Hessians
                    let ridge = h.diagonal().amax() * T::lit(1e-12) + T::lit(1e-300);
                    for i in 0..h.nrows() {
                        h[(i, i)] += ridge;
                    }
                    h.cholesky()
                        .ok_or_else(|| Error::Numerical("barrier Hessian not positive definite".into()))?
                        .solve(&(-&g))
                }
            };
            let decrement = -g.dot(&step);
            if decrement * half <= newton_tol {
                break;
            }
            let phi0 = barrier.value(tau, &z).unwrap();
            let mut s = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial = &z + &step * s;
                if let Some(v) = barrier.value(tau, &trial) {
                    if v <= phi0 - T::lit(0.25) * s * decrement {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                s *= half;
            }
            if !moved {
                break;
            }
        }
        if m / tau < gap_tol {
            return Ok(z);
        }
        tau *= T::lit(settings.mu);
    }
}
