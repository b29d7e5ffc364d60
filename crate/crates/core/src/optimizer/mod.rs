//! Joint precoder and reflecting-surface design.
//!
//! Precoders are optimized with the WMMSE reformulation of weighted sum
//! rate maximization (a convex QCQP per iteration, solved by a barrier
//! method). Surfaces are optimized by BFGS on their unconstrained
//! parameters. The two are alternated in [`alternating_optimize`].

mod alternating;
mod bfgs;
mod ergodic;
pub mod layout;
mod qcqp;
mod region;
mod ris_opt;
mod wmmse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use alternating::{
    alternating_from, alternating_optimize, embed_noma_in_rs1, embed_sdma_in_rs1, DesignOutput,
    DesignProblem,
};
pub use bfgs::{maximize, BfgsOutcome, BfgsSettings};
pub use ergodic::ergodic_rates;
pub use region::{
    average_sweeps, design_point, embedded_design, pareto_frontier, rate_region, sweep_weights,
    AveragedPoint, EmbeddedDesign, ErgodicEval, RegionPoint, RegionSweep,
};
pub use ris_opt::{optimize_ris, RisOutcome};
pub use wmmse::{initial_precoder, random_precoder, scale_to_budget, wmmse_precoder, WmmseOutput};

/// Iteration limits and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Relative WSR change that ends the WMMSE and alternating loops.
    pub wsr_tol: f64,
    pub max_outer_iters: usize,
    pub max_wmmse_iters: usize,
    pub restarts: usize,
    /// Central finite-difference step on the surface parameters.
    pub fd_step: f64,
    /// Backtracking contraction factor.
    pub ls_backtrack: f64,
    pub ls_max: usize,
    /// BFGS iteration cap per surface update.
    pub max_ris_iters: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            wsr_tol: 1e-4,
            max_outer_iters: 50,
            max_wmmse_iters: 200,
            restarts: 3,
            fd_step: 1e-6,
            ls_backtrack: 0.5,
            ls_max: 30,
            max_ris_iters: 100,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("optimizer.wsr_tol", self.wsr_tol),
            ("optimizer.fd_step", self.fd_step),
            ("optimizer.ls_backtrack", self.ls_backtrack),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be > 0"));
            }
        }
        if self.wsr_tol >= 1.0 {
            return Err(Error::validation("optimizer.wsr_tol", "must be < 1"));
        }
        if self.ls_backtrack >= 1.0 {
            return Err(Error::validation("optimizer.ls_backtrack", "must be < 1"));
        }
        let counts = [
            ("optimizer.max_outer_iters", self.max_outer_iters),
            ("optimizer.max_wmmse_iters", self.max_wmmse_iters),
            ("optimizer.restarts", self.restarts),
            ("optimizer.ls_max", self.ls_max),
            ("optimizer.max_ris_iters", self.max_ris_iters),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::validation(name, "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// Transmit side: per-AP power budgets (W), antennas per AP, receiver noise
/// power (W).
#[derive(Debug, Clone, PartialEq)]
pub struct TxConfig<T> {
    pub antennas_per_ap: usize,
    pub power: Vec<T>,
    pub noise: T,
}

impl<T: Real> TxConfig<T> {
    /// Same budget at every AP.
    pub fn uniform(aps: usize, antennas_per_ap: usize, power: T, noise: T) -> Self {
        TxConfig {
            antennas_per_ap,
            power: vec![power; aps],
            noise,
        }
    }

    pub fn aps(&self) -> usize {
        self.power.len()
    }

    pub fn tx_dim(&self) -> usize {
        self.aps() * self.antennas_per_ap
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas_per_ap == 0 || self.power.is_empty() {
            return Err(Error::invalid("need at least one AP with one antenna"));
        }
        if self.power.iter().any(|p| !(*p > T::zero())) {
            return Err(Error::invalid("per-AP power budgets must be > 0"));
        }
        if !(self.noise > T::zero()) {
            return Err(Error::invalid("noise power must be > 0"));
        }
        Ok(())
    }
}

pub(crate) fn check_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|u| !(*u >= T::zero())) {
        return Err(Error::invalid("weights must be >= 0"));
    }
    if !(weights.iter().fold(T::zero(), |a, b| a + *b) > T::zero()) {
        return Err(Error::invalid("weights must not all be zero"));
    }
    Ok(())
}
