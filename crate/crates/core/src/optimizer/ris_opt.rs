//! Surface optimization with the precoder held fixed.

use nalgebra::DVector;

use super::bfgs::{maximize, BfgsSettings};
use super::layout::StreamLayout;
use super::{check_weights, OptimizerSettings};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::rates::Precoder;
use crate::ris::{validate, RisArchitecture, RisMatrix};
use crate::scalar::{abs2, cplx, CMatrix, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct RisOutcome<T: Real> {
    pub ris: RisMatrix<T>,
    /// Weighted sum rate (greedy common allocation) at the returned surface.
    pub objective: T,
    /// Same at the starting surface.
    pub initial: T,
    pub iterations: usize,
}

/// Weighted sum rate as a function of the surface, with everything that does
/// not depend on it precomputed: `H^H P = H_d^H P + sum_l H_r,l^H Phi_l G_l P`.
pub(crate) struct RisObjective<'a, T: Real> {
    layout: &'a StreamLayout<T>,
    noise: T,
    base: CMatrix<T>,
    /// `H_r,l^H` per surface, K x M.
    hr_h: Vec<CMatrix<T>>,
    /// `G_l P` per surface, M x S.
    gp: Vec<CMatrix<T>>,
}

impl<'a, T: Real> RisObjective<'a, T> {
    pub(crate) fn new(
        ch: &ChannelSet<T>,
        p: &CMatrix<T>,
        surfaces: usize,
        layout: &'a StreamLayout<T>,
        noise: T,
    ) -> Self {
        let m = ch.ris_dim().checked_div(surfaces).unwrap_or(0);
        let hr_h = (0..surfaces)
            .map(|l| ch.ris_user.rows(l * m, m).adjoint())
            .collect();
        let gp = (0..surfaces).map(|l| ch.ap_ris.rows(l * m, m) * p).collect();
        RisObjective {
            layout,
            noise,
            base: ch.direct.adjoint() * p,
            hr_h,
            gp,
        }
    }

    fn wsr_of(&self, amp: &CMatrix<T>) -> T {
        self.layout.wsr(&amp.map(abs2), self.noise)
    }

    pub(crate) fn blocks(&self, blocks: &[CMatrix<T>]) -> T {
        let mut amp = self.base.clone();
        for ((hr, gp), phi) in self.hr_h.iter().zip(&self.gp).zip(blocks) {
            amp += hr * (phi * gp);
        }
        self.wsr_of(&amp)
    }

    /// Phases only: `sum_m conj(H_r[m,k]) e^{j theta_m} (G P)[m,j]`.
    fn phases(&self, thetas: &[T]) -> T {
        let mut amp = self.base.clone();
        let m = self.hr_h.first().map_or(0, |h| h.ncols());
        for (l, (hr, gp)) in self.hr_h.iter().zip(&self.gp).enumerate() {
            for e in 0..m {
                let th = thetas[l * m + e];
                let phase = cplx(th.cos(), th.sin());
                for k in 0..amp.nrows() {
                    let coef = hr[(k, e)] * phase;
                    for j in 0..amp.ncols() {
                        amp[(k, j)] += coef * gp[(e, j)];
                    }
                }
            }
        }
        self.wsr_of(&amp)
    }

    pub(crate) fn params(&self, arch: &RisArchitecture, elements: usize, x: &[T]) -> T {
        match arch {
            RisArchitecture::SingleConnected => self.phases(x),
            _ => match RisMatrix::from_params(arch, self.hr_h.len(), elements, x) {
                Ok(ris) => self.blocks(ris.blocks()),
                Err(_) => -T::max_value().unwrap(),
            },
        }
    }
}

/// BFGS ascent on the unconstrained parameters of `ris0`'s architecture with
/// the precoder fixed. The result is never worse than `ris0`.
pub fn optimize_ris<T: Real>(
    ch: &ChannelSet<T>,
    pre: &Precoder<T>,
    ris0: &RisMatrix<T>,
    weights: &[T],
    noise: T,
    settings: &OptimizerSettings,
) -> Result<RisOutcome<T>> {
    check_weights(weights)?;
    ch.check_shapes()?;
    if !validate(ris0, T::lit(1e-9)).passed {
        return Err(Error::invalid(format!(
            "starting RIS matrix is not a valid {} configuration",
            ris0.architecture()
        )));
    }
    if ris0.dim() != ch.ris_dim() {
        return Err(Error::dims(format!(
            "RIS dimension {} does not match the channels ({})",
            ris0.dim(),
            ch.ris_dim()
        )));
    }
    if pre.matrix().nrows() != ch.tx_dim() || pre.users() != ch.users() || weights.len() != ch.users() {
        return Err(Error::dims("precoder, weights and channels disagree"));
    }
    let layout = StreamLayout::new(pre.scheme(), weights)?;
    let obj = RisObjective::new(ch, pre.matrix(), ris0.surfaces(), &layout, noise);
    let initial = obj.blocks(ris0.blocks());
    if ris0.dim() == 0 {
        return Ok(RisOutcome {
            ris: ris0.clone(),
            objective: initial,
            initial,
            iterations: 0,
        });
    }
    let arch = ris0.architecture().clone();
    let start = match ris0.params() {
        Some(p) => p.to_vec(),
        None => ris0
            .reparameterize(&arch)?
            .params()
            .expect("built from parameters")
            .to_vec(),
    };
    let m = ris0.elements();
    let out = maximize(
        |x: &DVector<T>| obj.params(&arch, m, x.as_slice()),
        DVector::from_vec(start),
        &BfgsSettings::from(settings),
    );
    if out.iterations > 0 && out.value > initial {
        let ris = RisMatrix::from_params(&arch, ris0.surfaces(), m, out.x.as_slice())?;
        let objective = obj.blocks(ris.blocks());
        if objective >= initial {
            return Ok(RisOutcome {
                ris,
                objective,
                initial,
                iterations: out.iterations,
            });
        }
    }
    Ok(RisOutcome {
        ris: ris0.clone(),
        objective: initial,
        initial,
        iterations: out.iterations,
    })
}
