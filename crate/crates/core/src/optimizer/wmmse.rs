//! Weighted MMSE precoder optimization.
//!
//! With MMSE equalizers `g` and MSE weights `w = 1/eps` fixed, the augmented
//! weighted MSE `xi = w * eps(P) - ln w` of every decoding step is a convex
//! quadratic in the precoder. Streams decoded by several users enter through
//! an auxiliary rate variable `t_s` with `xi_{k,s} + t_s <= 1` for every
//! decoder, private streams enter the objective directly, and per-AP power
//! budgets are quadratic constraints. Each iteration solves that QCQP and
//! accepts the result only if the weighted sum rate did not decrease.
//!
//! Internally channels are divided by the noise amplitude so the noise power
//! is 1 and rates are in nats.

use nalgebra::DVector;
use rand::Rng;

use super::layout::StreamLayout;
use super::qcqp::{self, BarrierSettings, Quad};
use super::{check_weights, OptimizerSettings, TxConfig};
use crate::error::{Error, Result};
use crate::rates::{allocate_greedy, evaluate, received_powers, Precoder, RateResult, Scheme};
use crate::scalar::{abs2, cn01, CMatrix, Cplx, Real};

/// Result of [`wmmse_precoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutput<T: Real> {
    pub precoder: Precoder<T>,
    /// Rates with the weighted-sum-rate optimal common allocation.
    pub rates: RateResult<T>,
    /// Weighted sum rate, bit/s/Hz.
    pub wsr: T,
    /// WSR before the first and after every accepted iteration.
    pub trace: Vec<T>,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

/// Scale each AP's row block so its energy meets the budget with equality.
pub fn scale_to_budget<T: Real>(p: &mut CMatrix<T>, tx: &TxConfig<T>) {
    let nt = tx.antennas_per_ap;
    for (n, &budget) in tx.power.iter().enumerate() {
        let mut block = p.rows_mut(n * nt, nt);
        let energy = block.iter().fold(T::zero(), |a, z| a + abs2(*z));
        if energy > T::zero() {
            block.scale_mut((budget / energy).sqrt());
        }
    }
}

fn unit<T: Real>(v: DVector<Cplx<T>>) -> Option<DVector<Cplx<T>>> {
    let n = v.norm();
    (n > T::zero()).then(|| v / Cplx::new(n, T::zero()))
}

/// Deterministic start: matched-filter columns (sums of normalized channels
/// for common streams), equal power, scaled to the budgets.
pub fn initial_precoder<T: Real>(h_eff: &CMatrix<T>, scheme: &Scheme, tx: &TxConfig<T>) -> CMatrix<T> {
    let (ntx, k_users) = h_eff.shape();
    let mut first = DVector::zeros(ntx);
    if ntx > 0 {
        first[0] = Cplx::new(T::one(), T::zero());
    }
    let mrt = |k: usize| unit(h_eff.column(k).into_owned()).unwrap_or_else(|| first.clone());
    let combined = |users: &mut dyn Iterator<Item = usize>| {
        let sum = users.fold(DVector::zeros(ntx), |acc: DVector<Cplx<T>>, k| acc + mrt(k));
        unit(sum).unwrap_or_else(|| mrt(0))
    };
    let mut cols: Vec<DVector<Cplx<T>>> = Vec::new();
    match scheme {
        Scheme::Rs1Layer => {
            cols.push(combined(&mut (0..k_users)));
            cols.extend((0..k_users).map(mrt));
        }
        Scheme::Hrs2Layer { groups } => {
            cols.push(combined(&mut (0..k_users)));
            for g in groups {
                cols.push(combined(&mut g.iter().copied()));
            }
            cols.extend((0..k_users).map(mrt));
        }
        Scheme::Sdma | Scheme::Noma { .. } => cols.extend((0..k_users).map(mrt)),
    }
    let mut p = CMatrix::from_columns(&cols);
    scale_to_budget(&mut p, tx);
    p
}

/// I.i.d. complex Gaussian columns scaled to the budgets.
pub fn random_precoder<T: Real, R: Rng + ?Sized>(
    scheme: &Scheme,
    users: usize,
    tx: &TxConfig<T>,
    rng: &mut R,
) -> CMatrix<T> {
    let mut p = CMatrix::from_fn(tx.tx_dim(), scheme.streams(users), |_, _| cn01::<T, R>(rng));
    scale_to_budget(&mut p, tx);
    p
}

struct Subproblem<T: Real> {
    obj: Quad<T>,
    cons: Vec<Quad<T>>,
    ntx: usize,
    cols: usize,
    warm: DVector<T>,
    interior: DVector<T>,
}

impl<T: Real> Subproblem<T> {
    fn re(&self, i: usize, j: usize) -> usize {
        j * self.ntx + i
    }

    fn im(&self, i: usize, j: usize) -> usize {
        self.ntx * self.cols + j * self.ntx + i
    }

    fn extract(&self, z: &DVector<T>) -> CMatrix<T> {
        CMatrix::from_fn(self.ntx, self.cols, |i, j| {
            Cplx::new(z[self.re(i, j)], z[self.im(i, j)])
        })
    }

    /// Strictly feasible point on the segment from the warm start towards
    /// the known interior point.
    fn start(&self) -> Result<DVector<T>> {
        let mut delta = T::lit(1e-6);
        loop {
            let z = &self.warm + (&self.interior - &self.warm) * delta;
            if self.cons.iter().all(|c| c.value(&z) < T::zero()) {
                return Ok(z);
            }
            if delta >= T::one() {
                return Err(Error::Numerical("no strictly feasible WMMSE start".into()));
            }
            delta = (delta * T::lit(10.0)).min(T::one());
        }
    }

    fn build(layout: &StreamLayout<T>, h: &CMatrix<T>, p: &CMatrix<T>, tx: &TxConfig<T>) -> Self {
        let (ntx, cols) = p.shape();
        let active_multi: Vec<usize> = layout
            .streams
            .iter()
            .enumerate()
            .filter(|(_, s)| s.decoders.len() > 1 && s.weight > T::zero())
            .map(|(i, _)| i)
            .collect();
        let n_p = 2 * ntx * cols;
        let n = n_p + active_multi.len();
        let mut sub = Subproblem {
            obj: Quad::zeros(n),
            cons: Vec::new(),
            ntx,
            cols,
            warm: DVector::zeros(n),
            interior: DVector::zeros(n),
        };
        for j in 0..cols {
            for i in 0..ntx {
                let (r, m) = (sub.re(i, j), sub.im(i, j));
                sub.warm[r] = p[(i, j)].re;
                sub.warm[m] = p[(i, j)].im;
            }
        }
        let amp = h.adjoint() * p;
        let two = T::lit(2.0);
        // xi for user k decoding column s with the given interferers
        let mse_quad = |sub: &Subproblem<T>, k: usize, s: usize, interf: &[usize]| -> Quad<T> {
            let hk = h.column(k);
            let total = interf.iter().chain(std::iter::once(&s)).fold(T::one(), |a, &j| {
                a + abs2(amp[(k, j)])
            });
            let g = amp[(k, s)].conj() / total;
            let eps = T::one() - abs2(amp[(k, s)]) / total;
            let w = T::one() / eps;
            let mut q = Quad::zeros(n);
            let kappa = w * abs2(g);
            for &j in interf.iter().chain(std::iter::once(&s)) {
                for r in 0..ntx {
                    for c in 0..ntx {
                        let v = hk[r] * hk[c].conj() * kappa;
                        let (rr, ri, cr, ci) = (sub.re(r, j), sub.im(r, j), sub.re(c, j), sub.im(c, j));
                        q.a[(rr, cr)] += v.re;
                        q.a[(ri, ci)] += v.re;
                        q.a[(rr, ci)] -= v.im;
                        q.a[(ri, cr)] += v.im;
                    }
                }
            }
            for i in 0..ntx {
                let c = g * hk[i].conj();
                q.b[sub.re(i, s)] -= two * w * c.re;
                q.b[sub.im(i, s)] += two * w * c.im;
            }
            q.c = w * (abs2(g) + T::one()) - w.ln();
            q
        };

        for (idx, stream) in layout.streams.iter().enumerate() {
            if stream.weight == T::zero() {
                continue;
            }
            if stream.decoders.len() == 1 {
                let d = &stream.decoders[0];
                let q = mse_quad(&sub, d.user, stream.column, &d.interference);
                sub.obj.a += &q.a * stream.weight;
                sub.obj.b += &q.b * stream.weight;
                sub.obj.c += q.c * stream.weight;
                continue;
            }
            let t = n_p + active_multi.iter().position(|&i| i == idx).unwrap();
            sub.obj.b[t] -= stream.weight;
            let mut warm_t = T::max_value().unwrap();
            let mut interior_t = T::max_value().unwrap();
            for d in &stream.decoders {
                let mut q = mse_quad(&sub, d.user, stream.column, &d.interference);
                warm_t = warm_t.min(T::one() - q.value(&sub.warm));
                interior_t = interior_t.min(T::one() - q.c);
                q.b[t] = T::one();
                q.c -= T::one();
                sub.cons.push(q);
            }
            sub.warm[t] = warm_t;
            sub.interior[t] = interior_t - T::one();
        }

        let nt = tx.antennas_per_ap;
        for (ap, &budget) in tx.power.iter().enumerate() {
            let mut q = Quad::zeros(n);
            for j in 0..cols {
                for i in ap * nt..(ap + 1) * nt {
                    let (r, m) = (sub.re(i, j), sub.im(i, j));
                    q.a[(r, r)] = T::one();
                    q.a[(m, m)] = T::one();
                }
            }
            q.c = -budget;
            sub.cons.push(q);
        }
        sub
    }
}

/// WMMSE iterations from `p`: the final precoder, the WSR trace (nats, on
/// the noise-normalized channel) and whether the tolerance was met.
fn iterate<T: Real>(
    layout: &StreamLayout<T>,
    hn: &CMatrix<T>,
    mut p: CMatrix<T>,
    tx: &TxConfig<T>,
    settings: &OptimizerSettings,
) -> Result<(CMatrix<T>, Vec<T>, bool)> {
    let wsr_of = |p: &CMatrix<T>| layout.wsr(&received_powers(hn, p), T::one());
    let mut wsr = wsr_of(&p);
    let mut trace = vec![wsr];
    let mut converged = false;
    let tol = T::lit(settings.wsr_tol);
    let barrier = BarrierSettings::default();
    for _ in 0..settings.max_wmmse_iters {
        let sub = Subproblem::build(layout, hn, &p, tx);
        let z = qcqp::minimize(&sub.obj, &sub.cons, sub.start()?, &barrier)?;
        let candidate = sub.extract(&z);
        let next = wsr_of(&candidate);
        if !(next >= wsr) {
            converged = true;
            break;
        }
        let gain = next - wsr;
        p = candidate;
        wsr = next;
        trace.push(wsr);
        if gain <= tol * wsr.abs().max(T::lit(1e-12)) {
            converged = true;
            break;
        }
    }
    Ok((p, trace, converged))
}

/// Maximize `sum_k u_k (c_k + R_p,k)` over the precoder and the common-rate
/// allocation under per-AP power budgets. Without `init`, iterations start
/// from [`initial_precoder`] and, for schemes with common streams, from a
/// common-heavy variant of it; the better result is returned. A given
/// `init` is rescaled to the budgets if it violates them.
pub fn wmmse_precoder<T: Real>(
    h_eff: &CMatrix<T>,
    weights: &[T],
    tx: &TxConfig<T>,
    scheme: &Scheme,
    settings: &OptimizerSettings,
    init: Option<&CMatrix<T>>,
) -> Result<WmmseOutput<T>> {
    tx.validate()?;
    check_weights(weights)?;
    let k_users = weights.len();
    if h_eff.shape() != (tx.tx_dim(), k_users) {
        return Err(Error::dims(format!(
            "channel is {:?}, expected ({}, {k_users})",
            h_eff.shape(),
            tx.tx_dim()
        )));
    }
    let layout = StreamLayout::new(scheme, weights)?;
    let starts = match init {
        Some(p0) => {
            if p0.shape() != (tx.tx_dim(), layout.columns) {
                return Err(Error::dims("initial precoder has the wrong shape"));
            }
            let mut p = p0.clone();
            let pre = Precoder::new(scheme.clone(), k_users, p.clone())?;
            if pre.power_residual(&tx.power, tx.antennas_per_ap) > T::zero() {
                scale_to_budget(&mut p, tx);
            }
            vec![p]
        }
        None => {
            // The equal-split start can stall in a private-heavy local
            // optimum; a common-heavy variant covers the other basin.
            let p = initial_precoder(h_eff, scheme, tx);
            let shared = layout.columns - k_users;
            let mut starts = vec![p.clone()];
            if shared > 0 && matches!(scheme, Scheme::Rs1Layer | Scheme::Hrs2Layer { .. }) {
                let mut heavy = p;
                for mut col in heavy.columns_mut(shared, k_users).column_iter_mut() {
                    col *= Cplx::new(T::lit(0.1), T::zero());
                }
                scale_to_budget(&mut heavy, tx);
                starts.push(heavy);
            }
            starts
        }
    };
    let hn = h_eff / Cplx::new(tx.noise.sqrt(), T::zero());
    let mut best: Option<(CMatrix<T>, Vec<T>, bool)> = None;
    for p0 in starts {
        let run = iterate(&layout, &hn, p0, tx, settings)?;
        if best.as_ref().is_none_or(|b| run.1.last() > b.1.last()) {
            best = Some(run);
        }
    }
    let (p, trace, converged) = best.expect("at least one start");
    let precoder = Precoder::new(scheme.clone(), k_users, p)?;
    let rates = allocate_greedy(&evaluate(h_eff, &precoder, tx.noise)?, weights);
    Ok(WmmseOutput {
        wsr: rates.weighted_sum(weights),
        precoder,
        rates,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Cplx<f64>;

    fn tx(nt: usize) -> TxConfig<f64> {
        TxConfig::uniform(1, nt, 1.0, 1.0)
    }

    #[test]
    fn single_user_mrt() {
        let h = CMatrix::from_row_slice(2, 1, &[C::new(1.0, 0.0), C::new(0.0, 0.0)]);
        for scheme in [Scheme::Sdma, Scheme::Rs1Layer] {
            let out = wmmse_precoder(&h, &[1.0], &tx(2), &scheme, &OptimizerSettings::default(), None)
                .unwrap();
            assert!((out.wsr - 1.0).abs() < 1e-6, "{scheme}: {}", out.wsr);
            let p = out.precoder.matrix();
            let last = p.column(p.ncols() - 1);
            if scheme == Scheme::Sdma {
                assert!((last[0].norm() - 1.0).abs() < 1e-6 && last[1].norm() < 1e-4);
            }
        }
        // a random start converges to the same rate
        let p0 = CMatrix::from_row_slice(2, 1, &[C::new(0.1, 0.3), C::new(-0.7, 0.2)]);
        let out = wmmse_precoder(&h, &[1.0], &tx(2), &Scheme::Sdma, &OptimizerSettings::default(), Some(&p0))
            .unwrap();
        assert!((out.wsr - 1.0).abs() < 1e-4, "{}", out.wsr);
    }

    #[test]
    fn traces_are_monotone_and_power_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let schemes = [
            Scheme::Rs1Layer,
            Scheme::Sdma,
            Scheme::Noma { order: [0, 1] },
            Scheme::Hrs2Layer {
                groups: vec![vec![0], vec![1]],
            },
        ];
        for scheme in &schemes {
            for _ in 0..10 {
                let h = CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(&mut rng) * 3.0);
                let u = [rng.random::<f64>(), rng.random::<f64>()];
                let p0 = random_precoder(scheme, 2, &tx(2), &mut rng);
                let out = wmmse_precoder(&h, &u, &tx(2), scheme, &OptimizerSettings::default(), Some(&p0))
                    .unwrap();
                for w in out.trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-8);
                }
                assert!(out.precoder.power_residual(&[1.0], 2) <= 1e-9);
                assert!((out.wsr - out.trace.last().unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = CMatrix::<f64>::zeros(2, 2);
        let s = OptimizerSettings::default();
        assert!(wmmse_precoder(&h, &[0.0, 0.0], &tx(2), &Scheme::Sdma, &s, None).is_err());
        let bad = TxConfig::uniform(1, 2, 0.0, 1.0);
        assert!(wmmse_precoder(&h, &[1.0, 1.0], &bad, &Scheme::Sdma, &s, None).is_err());
        assert!(wmmse_precoder(&h, &[1.0, 1.0], &tx(3), &Scheme::Sdma, &s, None).is_err());
    }

    #[test]
    fn per_ap_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = CMatrix::from_fn(4, 2, |_, _| cn01::<f64, _>(&mut rng) * 2.0);
        let tx = TxConfig {
            antennas_per_ap: 2,
            power: vec![1.0, 0.25],
            noise: 1.0,
        };
        let out = wmmse_precoder(&h, &[0.5, 0.5], &tx, &Scheme::Rs1Layer, &OptimizerSettings::default(), None)
            .unwrap();
        let per = out.precoder.power_per_ap(2);
        assert!(per[0] <= 1.0 + 1e-9 && per[1] <= 0.25 + 1e-9, "{per:?}");
        assert!(per[1] > 0.2);
    }
}
