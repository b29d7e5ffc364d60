//! Two-user rate regions traced by weighted-sum-rate sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::alternating::{alternating_from, alternating_optimize, embed_noma_in_rs1, embed_sdma_in_rs1};
use super::ergodic::ergodic_rates;
use super::{DesignOutput, DesignProblem, OptimizerSettings};
use crate::channel::CsiErrorModel;
use crate::error::{Error, Result};
use crate::rates::{allocate_greedy, Scheme};
use crate::scalar::Real;

/// `u_i = (cos^2 w_i, sin^2 w_i)` with `w_i` evenly spaced on `[0, pi/2]`.
pub fn sweep_weights<T: Real>(n: usize) -> Vec<[T; 2]> {
    let half_pi = T::frac_pi_2();
    (0..n)
        .map(|i| {
            let w = if n == 1 {
                half_pi / T::lit(2.0)
            } else {
                half_pi * T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap()
            };
            let (s, c) = w.sin_cos();
            [c * c, s * s]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint<T> {
    /// `0..n` for the sweep, `n` and `n + 1` for the two corners.
    pub weight_idx: usize,
    pub u: [T; 2],
    /// Per-user totals with the WSR-optimal common allocation.
    pub rates: [T; 2],
    pub wsr: T,
}

/// The sweep points followed by the single-user corners `(R1, 0)` and
/// `(0, R2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSweep<T> {
    pub points: Vec<RegionPoint<T>>,
}

impl<T: Real> RegionSweep<T> {
    /// Points on the upper-right Pareto frontier.
    pub fn frontier(&self) -> Vec<RegionPoint<T>> {
        let pts: Vec<[T; 2]> = self.points.iter().map(|p| p.rates).collect();
        self.points
            .iter()
            .zip(pareto_frontier(&pts))
            .filter_map(|(p, on)| on.then_some(*p))
            .collect()
    }
}

/// Evaluate designs by averaging over the estimation error instead of on
/// the design channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicEval<T> {
    pub err: CsiErrorModel<T>,
    pub n_samples: usize,
}

/// Flags the points not dominated by any other point.
pub fn pareto_frontier<T: Real>(points: &[[T; 2]]) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            !points
                .iter()
                .any(|q| q[0] >= p[0] && q[1] >= p[1] && (q[0] > p[0] || q[1] > p[1]))
        })
        .collect()
}

/// RS1 design together with the SDMA and NOMA designs it was seeded from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDesign<T: Real> {
    pub rs: DesignOutput<T>,
    pub sdma: DesignOutput<T>,
    pub noma: DesignOutput<T>,
}

/// Optimize `scheme`; NOMA tries both decoding orders and keeps the better.
pub fn design_point<T: Real>(
    problem: &DesignProblem<T>,
    weights: &[T],
    scheme: &Scheme,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<DesignOutput<T>> {
    match scheme {
        Scheme::Noma { order: [a, b] } => {
            let first = alternating_optimize(problem, weights, scheme, settings, seed)?;
            let other = Scheme::Noma { order: [*b, *a] };
            let second = alternating_optimize(problem, weights, &other, settings, seed)?;
            Ok(if second.wsr > first.wsr { second } else { first })
        }
        _ => alternating_optimize(problem, weights, scheme, settings, seed),
    }
}

/// Two-user RS1 design that is never worse than SDMA or NOMA: besides its
/// own starts, RS is also started from both optimized baselines mapped into
/// the RS1 precoder structure, and the best result is kept.
pub fn embedded_design<T: Real>(
    problem: &DesignProblem<T>,
    weights: &[T],
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<EmbeddedDesign<T>> {
    if problem.channels.users() != 2 {
        return Err(Error::Unsupported("baseline embedding needs exactly 2 users".into()));
    }
    let sdma = design_point(problem, weights, &Scheme::Sdma, settings, seed)?;
    let noma = design_point(problem, weights, &Scheme::Noma { order: [0, 1] }, settings, seed)?;
    let mut rs = alternating_optimize(problem, weights, &Scheme::Rs1Layer, settings, seed)?;
    let starts = [
        (embed_sdma_in_rs1(&sdma.precoder)?, &sdma.ris),
        (embed_noma_in_rs1(&noma.precoder)?, &noma.ris),
    ];
    for (pre, ris) in starts {
        let cand = alternating_from(problem, weights, &pre, ris, settings, seed)?;
        if cand.wsr > rs.wsr {
            rs = cand;
        }
    }
    Ok(EmbeddedDesign { rs, sdma, noma })
}

/// Sweep `n_weights` weight vectors and record the per-user rates of each
/// optimized design. With `embed_baselines`, RS1 designs are seeded from the
/// SDMA and NOMA optima (see [`embedded_design`]). With `ergodic`, designs
/// made on the channels in `problem` (the estimate) are evaluated over the
/// estimation error.
pub fn rate_region<T: Real>(
    problem: &DesignProblem<T>,
    scheme: &Scheme,
    settings: &OptimizerSettings,
    n_weights: usize,
    embed_baselines: bool,
    ergodic: Option<&ErgodicEval<T>>,
    seed: u64,
) -> Result<RegionSweep<T>> {
    if problem.channels.users() != 2 {
        return Err(Error::Unsupported(format!(
            "rate regions need exactly 2 users, got {}",
            problem.channels.users()
        )));
    }
    if n_weights == 0 {
        return Err(Error::invalid("n_weights must be >= 1"));
    }
    let mut points = Vec::with_capacity(n_weights + 2);
    for (i, u) in sweep_weights::<T>(n_weights).into_iter().enumerate() {
        let design = if embed_baselines && *scheme == Scheme::Rs1Layer {
            embedded_design(problem, &u, settings, seed)?.rs
        } else {
            design_point(problem, &u, scheme, settings, seed)?
        };
        let rates = match ergodic {
            None => design.rates,
            Some(e) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + i as u64);
                let avg = ergodic_rates(
                    &design.precoder,
                    &design.ris,
                    &problem.channels,
                    &e.err,
                    problem.tx.noise,
                    e.n_samples,
                    &mut rng,
                )?;
                allocate_greedy(&avg, &u)
            }
        };
        let r = [rates.user_totals[0], rates.user_totals[1]];
        points.push(RegionPoint {
            weight_idx: i,
            u,
            rates: r,
            wsr: u[0] * r[0] + u[1] * r[1],
        });
    }
    let first = points[0];
    let last = points[n_weights - 1];
    let (one, zero) = (T::one(), T::zero());
    points.push(RegionPoint {
        weight_idx: n_weights,
        u: [one, zero],
        rates: [first.rates[0], zero],
        wsr: first.rates[0],
    });
    points.push(RegionPoint {
        weight_idx: n_weights + 1,
        u: [zero, one],
        rates: [zero, last.rates[1]],
        wsr: last.rates[1],
    });
    Ok(RegionSweep { points })
}

/// Ensemble average of one sweep position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedPoint<T> {
    pub weight_idx: usize,
    pub u: [T; 2],
    pub mean: [T; 2],
    /// Standard error of each mean, 0 for a single sweep.
    pub std_err: [T; 2],
    pub wsr: T,
    pub on_frontier: bool,
}

/// Point-wise mean over sweeps with matching weight indices, then frontier
/// extraction on the means.
pub fn average_sweeps<T: Real>(sweeps: &[RegionSweep<T>]) -> Result<Vec<AveragedPoint<T>>> {
    let Some(first) = sweeps.first() else {
        return Err(Error::invalid("no sweeps to average"));
    };
    let idx: Vec<usize> = first.points.iter().map(|p| p.weight_idx).collect();
    if sweeps
        .iter()
        .any(|s| s.points.iter().map(|p| p.weight_idx).ne(idx.iter().copied()))
    {
        return Err(Error::invalid("sweeps have different weight indices"));
    }
    let n = T::from_usize(sweeps.len()).unwrap();
    let mut out: Vec<AveragedPoint<T>> = first
        .points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut mean = [T::zero(); 2];
            let mut wsr = T::zero();
            for s in sweeps {
                mean[0] += s.points[j].rates[0] / n;
                mean[1] += s.points[j].rates[1] / n;
                wsr += s.points[j].wsr / n;
            }
            let mut std_err = [T::zero(); 2];
            if sweeps.len() > 1 {
                for (c, se) in std_err.iter_mut().enumerate() {
                    let ss = sweeps
                        .iter()
                        .fold(T::zero(), |a, s| a + (s.points[j].rates[c] - mean[c]).powi(2));
                    *se = (ss / (n - T::one()) / n).sqrt();
                }
            }
            AveragedPoint {
                weight_idx: p.weight_idx,
                u: p.u,
                mean,
                std_err,
                wsr,
                on_frontier: false,
            }
        })
        .collect();
    let means: Vec<[T; 2]> = out.iter().map(|p| p.mean).collect();
    for (p, on) in out.iter_mut().zip(pareto_frontier(&means)) {
        p.on_frontier = on;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use crate::optimizer::{wmmse_precoder, TxConfig};
    use crate::ris::RisArchitecture;
    use crate::scalar::{cn01, CMatrix};

    #[test]
    fn weights_cover_the_quarter_circle() {
        let u = sweep_weights::<f64>(21);
        assert_eq!(u.len(), 21);
        assert_eq!(u[0], [1.0, 0.0]);
        assert!(u[20][0].abs() < 1e-15 && (u[20][1] - 1.0).abs() < 1e-15);
        assert!((u[10][0] - 0.5).abs() < 1e-12);
        for w in &u {
            assert!((w[0] + w[1] - 1.0).abs() < 1e-12);
        }
        // denser near the corners
        assert!(u[1][1] - u[0][1] < u[11][1] - u[10][1]);
    }

    #[test]
    fn frontier_flags() {
        let pts = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.4, 0.4], [0.5, 0.5]];
        assert_eq!(pareto_frontier(&pts), vec![true, true, true, false, true]);
    }

    fn scalar_problem() -> DesignProblem<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = ChannelSet::direct_only(CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(&mut rng)));
        DesignProblem::new(ch, TxConfig::uniform(1, 2, 1.0, 0.1), 0, RisArchitecture::SingleConnected).unwrap()
    }

    #[test]
    fn region_layout_and_corners() {
        let p = scalar_problem();
        let s = OptimizerSettings {
            restarts: 1,
            ..OptimizerSettings::default()
        };
        let sweep = rate_region(&p, &Scheme::Sdma, &s, 5, false, None, 1).unwrap();
        assert_eq!(sweep.points.len(), 7);
        assert_eq!(sweep.points[5].rates[1], 0.0);
        assert_eq!(sweep.points[6].rates[0], 0.0);
        // the u = (1, 0) point matches a single-user design for user 1
        let single = wmmse_precoder(&p.channels.direct, &[1.0, 0.0], &p.tx, &Scheme::Sdma, &s, None).unwrap();
        let r1 = sweep.points[0].rates[0];
        assert!((r1 - single.wsr).abs() <= 1e-4 * single.wsr);
        assert!(sweep.points.iter().all(|q| q.rates[0] >= 0.0 && q.rates[1] >= 0.0));
        let three = crate::channel::ChannelSet::direct_only(CMatrix::zeros(2, 3));
        let p3 = DesignProblem::new(three, p.tx.clone(), 0, RisArchitecture::SingleConnected).unwrap();
        assert!(matches!(
            rate_region(&p3, &Scheme::Sdma, &s, 5, false, None, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn embedded_rs_dominates() {
        let p = scalar_problem();
        let s = OptimizerSettings {
            restarts: 1,
            ..OptimizerSettings::default()
        };
        for u in sweep_weights::<f64>(5) {
            let d = embedded_design(&p, &u, &s, 2).unwrap();
            assert!(d.rs.wsr >= d.sdma.wsr - 1e-6);
            assert!(d.rs.wsr >= d.noma.wsr - 1e-6);
        }
    }

    #[test]
    fn averaging() {
        let p = scalar_problem();
        let s = OptimizerSettings {
            restarts: 1,
            ..OptimizerSettings::default()
        };
        let a = rate_region(&p, &Scheme::Sdma, &s, 3, false, None, 1).unwrap();
        let avg = average_sweeps(&[a.clone(), a.clone()]).unwrap();
        for (m, q) in avg.iter().zip(&a.points) {
            assert_eq!(m.mean, q.rates);
            assert_eq!(m.std_err, [0.0, 0.0]);
        }
        let single = average_sweeps(std::slice::from_ref(&a)).unwrap();
        let flags: Vec<bool> = single.iter().map(|p| p.on_frontier).collect();
        let expect: Vec<bool> = a.points.iter().map(|q| a.frontier().contains(q)).collect();
        assert_eq!(flags, expect);
        assert!(average_sweeps::<f64>(&[]).is_err());
    }
}
