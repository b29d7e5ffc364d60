//! Alternating precoder / surface optimization with restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ris_opt::optimize_ris;
use super::wmmse::{initial_precoder, random_precoder, wmmse_precoder};
use super::{check_weights, OptimizerSettings, TxConfig};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::rates::{allocate_greedy, evaluate, Precoder, RateResult, Scheme};
use crate::ris::{effective_channels, random_params, RisArchitecture, RisMatrix};
use crate::scalar::{CMatrix, Real};

/// Channels, transmitter and surface layout of one design instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem<T: Real> {
    pub channels: ChannelSet<T>,
    pub tx: TxConfig<T>,
    /// Number of surfaces L; the channels carry `L * M` reflecting rows.
    pub surfaces: usize,
    pub arch: RisArchitecture,
}

impl<T: Real> DesignProblem<T> {
    pub fn new(channels: ChannelSet<T>, tx: TxConfig<T>, surfaces: usize, arch: RisArchitecture) -> Result<Self> {
        let p = DesignProblem {
            channels,
            tx,
            surfaces,
            arch,
        };
        p.validate()?;
        Ok(p)
    }

    /// The same instance with the reflected path removed.
    pub fn without_ris(&self) -> Self {
        DesignProblem {
            channels: self.channels.without_ris(),
            surfaces: 0,
            ..self.clone()
        }
    }

    pub fn elements(&self) -> usize {
        self.channels.ris_dim().checked_div(self.surfaces).unwrap_or(0)
    }

    pub fn has_ris(&self) -> bool {
        self.channels.ris_dim() > 0
    }

    pub fn validate(&self) -> Result<()> {
        self.channels.check_shapes()?;
        self.tx.validate()?;
        if self.channels.tx_dim() != self.tx.tx_dim() {
            return Err(Error::dims(format!(
                "channels have {} transmit antennas, transmitter has {}",
                self.channels.tx_dim(),
                self.tx.tx_dim()
            )));
        }
        let ris = self.channels.ris_dim();
        if (self.surfaces == 0) != (ris == 0) || (self.surfaces > 0 && !ris.is_multiple_of(self.surfaces)) {
            return Err(Error::dims(format!(
                "{ris} reflecting rows cannot be split over {} surfaces",
                self.surfaces
            )));
        }
        if ris > 0 {
            self.arch.group_sizes(self.elements())?;
        }
        Ok(())
    }

    /// Surface with all parameters zero (unit phases, or `X = 0`).
    pub fn neutral_ris(&self) -> Result<RisMatrix<T>> {
        if !self.has_ris() {
            return Ok(RisMatrix::none());
        }
        let m = self.elements();
        let n = self.arch.params_per_surface(m)? * self.surfaces;
        RisMatrix::from_params(&self.arch, self.surfaces, m, &vec![T::zero(); n])
    }
}

/// Best design found by [`alternating_optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutput<T: Real> {
    pub precoder: Precoder<T>,
    pub ris: RisMatrix<T>,
    /// Rates on the design channels with the WSR-optimal allocation.
    pub rates: RateResult<T>,
    pub wsr: T,
    /// WSR of the starting point followed by the WSR after each
    /// precoder/surface round, for the winning restart.
    pub wsr_trace: Vec<T>,
    pub seed: u64,
    pub converged: bool,
}

fn wsr_at<T: Real>(
    problem: &DesignProblem<T>,
    pre: &Precoder<T>,
    ris: &RisMatrix<T>,
    weights: &[T],
) -> Result<T> {
    let h = effective_channels(&problem.channels, ris)?;
    Ok(allocate_greedy(&evaluate(&h, pre, problem.tx.noise)?, weights).weighted_sum(weights))
}

/// Alternate precoder and surface updates from the given starting point
/// until the relative WSR gain of a round drops below `wsr_tol`.
pub fn alternating_from<T: Real>(
    problem: &DesignProblem<T>,
    weights: &[T],
    init_precoder: &Precoder<T>,
    init_ris: &RisMatrix<T>,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<DesignOutput<T>> {
    problem.validate()?;
    settings.validate()?;
    check_weights(weights)?;
    let scheme = init_precoder.scheme().clone();
    let tx = &problem.tx;
    let mut ris = init_ris.clone();
    let mut trace = vec![wsr_at(problem, init_precoder, &ris, weights)?];
    let h = effective_channels(&problem.channels, &ris)?;
    let mut out = wmmse_precoder(&h, weights, tx, &scheme, settings, Some(init_precoder.matrix()))?;
    let mut wsr = out.wsr;
    trace.push(wsr);
    let mut converged = out.converged;
    if problem.has_ris() {
        converged = false;
        let tol = T::lit(settings.wsr_tol);
        for _ in 0..settings.max_outer_iters {
            let step = optimize_ris(&problem.channels, &out.precoder, &ris, weights, tx.noise, settings)?;
            ris = step.ris;
            let h = effective_channels(&problem.channels, &ris)?;
            let next = wmmse_precoder(&h, weights, tx, &scheme, settings, Some(out.precoder.matrix()))?;
            let gain = next.wsr - wsr;
            if next.wsr >= wsr {
                out = next;
                wsr = out.wsr;
            }
            trace.push(wsr);
            if gain <= tol * wsr.abs().max(T::lit(1e-12)) {
                converged = true;
                break;
            }
        }
    }
    Ok(DesignOutput {
        rates: out.rates,
        precoder: out.precoder,
        ris,
        wsr,
        wsr_trace: trace,
        seed,
        converged,
    })
}

/// Joint design with `settings.restarts` starting points; the best is
/// returned. Restart 0 starts from matched-filter precoders and a neutral
/// surface, the others from random precoders and random surface parameters
/// drawn from `seed`. Without a surface this is a single precoder
/// optimization per restart.
pub fn alternating_optimize<T: Real>(
    problem: &DesignProblem<T>,
    weights: &[T],
    scheme: &Scheme,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<DesignOutput<T>> {
    problem.validate()?;
    settings.validate()?;
    let k_users = problem.channels.users();
    if weights.len() != k_users {
        return Err(Error::dims(format!("{} weights for {k_users} users", weights.len())));
    }
    scheme.check(k_users)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<DesignOutput<T>> = None;
    for restart in 0..settings.restarts {
        let (p0, ris0): (CMatrix<T>, RisMatrix<T>) = if restart == 0 {
            let ris0 = problem.neutral_ris()?;
            let h = effective_channels(&problem.channels, &ris0)?;
            (initial_precoder(&h, scheme, &problem.tx), ris0)
        } else {
            let ris0 = if problem.has_ris() {
                let m = problem.elements();
                let params = random_params(&problem.arch, problem.surfaces, m, &mut rng)?;
                RisMatrix::from_params(&problem.arch, problem.surfaces, m, &params)?
            } else {
                RisMatrix::none()
            };
            (random_precoder(scheme, k_users, &problem.tx, &mut rng), ris0)
        };
        let pre = Precoder::new(scheme.clone(), k_users, p0)?;
        let out = alternating_from(problem, weights, &pre, &ris0, settings, seed)?;
        if best.as_ref().is_none_or(|b| out.wsr > b.wsr) {
            best = Some(out);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// RS1 precoder with a zero common stream and the SDMA columns as private
/// streams; same rates as the SDMA design.
pub fn embed_sdma_in_rs1<T: Real>(sdma: &Precoder<T>) -> Result<Precoder<T>> {
    if *sdma.scheme() != Scheme::Sdma {
        return Err(Error::invalid(format!("expected an SDMA precoder, got {}", sdma.scheme())));
    }
    let p = sdma.matrix().clone().insert_column(0, num_traits::Zero::zero());
    Precoder::new(Scheme::Rs1Layer, sdma.users(), p)
}

/// RS1 precoder carrying the first-decoded NOMA message as the common stream
/// and the other as the second-decoded user's private stream.
pub fn embed_noma_in_rs1<T: Real>(noma: &Precoder<T>) -> Result<Precoder<T>> {
    let Scheme::Noma { order: [w, s] } = *noma.scheme() else {
        return Err(Error::invalid(format!("expected a NOMA precoder, got {}", noma.scheme())));
    };
    let src = noma.matrix();
    let mut p = CMatrix::zeros(src.nrows(), 3);
    p.set_column(0, &src.column(w));
    p.set_column(1 + s, &src.column(s));
    Precoder::new(Scheme::Rs1Layer, 2, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cn01;
    use rand::Rng;

    fn problem(rng: &mut ChaCha8Rng, m: usize) -> DesignProblem<f64> {
        let ch = ChannelSet::new(
            CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(rng)),
            CMatrix::from_fn(m, 2, |_, _| cn01::<f64, _>(rng) * 0.7),
            CMatrix::from_fn(m, 2, |_, _| cn01::<f64, _>(rng) * 0.7),
        )
        .unwrap();
        let surfaces = usize::from(m > 0);
        DesignProblem::new(ch, TxConfig::uniform(1, 2, 1.0, 0.1), surfaces, RisArchitecture::SingleConnected)
            .unwrap()
    }

    fn quick() -> OptimizerSettings {
        OptimizerSettings {
            restarts: 2,
            max_outer_iters: 10,
            ..OptimizerSettings::default()
        }
    }

    #[test]
    fn no_ris_is_plain_wmmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = problem(&mut rng, 0);
        let s = OptimizerSettings {
            restarts: 1,
            ..OptimizerSettings::default()
        };
        for scheme in [Scheme::Rs1Layer, Scheme::Sdma] {
            let out = alternating_optimize(&p, &[0.3, 0.7], &scheme, &s, 9).unwrap();
            let direct = wmmse_precoder(&p.channels.direct, &[0.3, 0.7], &p.tx, &scheme, &s, None).unwrap();
            assert_eq!(out.precoder, direct.precoder);
            assert_eq!(out.wsr, direct.wsr);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = problem(&mut rng, 4);
        let u = [rng.random::<f64>(), 0.5];
        let a = alternating_optimize(&p, &u, &Scheme::Rs1Layer, &quick(), 5).unwrap();
        let b = alternating_optimize(&p, &u, &Scheme::Rs1Layer, &quick(), 5).unwrap();
        assert_eq!(a, b);
        for w in a.wsr_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{:?}", a.wsr_trace);
        }
        assert!(a.wsr >= a.wsr_trace[0]);
        assert!(crate::ris::validate(&a.ris, 1e-9).passed);
        assert!(a.precoder.power_residual(&[1.0], 2) <= 1e-9);
    }

    #[test]
    fn embeddings_preserve_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(&mut rng));
        let u = [0.4, 0.6];
        let sdma = Precoder::new(Scheme::Sdma, 2, CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(&mut rng))).unwrap();
        let rs = embed_sdma_in_rs1(&sdma).unwrap();
        let a = allocate_greedy(&evaluate(&h, &sdma, 0.2).unwrap(), &u).weighted_sum(&u);
        let b = allocate_greedy(&evaluate(&h, &rs, 0.2).unwrap(), &u).weighted_sum(&u);
        assert!((a - b).abs() < 1e-12);
        for order in [[0, 1], [1, 0]] {
            let noma = Precoder::new(
                Scheme::Noma { order },
                2,
                CMatrix::from_fn(2, 2, |_, _| cn01::<f64, _>(&mut rng)),
            )
            .unwrap();
            let rs = embed_noma_in_rs1(&noma).unwrap();
            let a = allocate_greedy(&evaluate(&h, &noma, 0.2).unwrap(), &u).weighted_sum(&u);
            let b = allocate_greedy(&evaluate(&h, &rs, 0.2).unwrap(), &u).weighted_sum(&u);
            assert!(b >= a - 1e-12, "{order:?}: {b} < {a}");
        }
        assert!(embed_noma_in_rs1(&sdma).is_err());
    }

    #[test]
    fn inconsistent_problem_rejected() {
        let ch = ChannelSet::new(CMatrix::zeros(2, 2), CMatrix::zeros(3, 2), CMatrix::zeros(3, 2)).unwrap();
        let tx = TxConfig::uniform(1, 2, 1.0, 1.0);
        assert!(DesignProblem::new(ch.clone(), tx, 2, RisArchitecture::SingleConnected).is_err());
        assert!(DesignProblem::new(ch, TxConfig::uniform(1, 3, 1.0, 1.0), 1, RisArchitecture::SingleConnected).is_err());
    }
}
