//! Simulation and joint precoder / reflecting-surface optimization for
//! RIS-aided rate-splitting downlinks, with SDMA and NOMA baselines.
//!
//! The numerical core ([`channel`], [`ris`], [`rates`], [`optimizer`]) is
//! generic over a [`Real`] scalar; the experiment [`harness`] runs in `f64`.
//! Concrete `f64` aliases are exported at the crate root.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod rates;
pub mod ris;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{CMatrix, CVector, Cplx, Real};

pub use channel::{CsiErrorModel, Dimensions, FadingParams, Geometry};
pub use optimizer::OptimizerSettings;
pub use rates::{Scheme, SchemeKind};
pub use ris::RisArchitecture;

pub type C64 = Cplx<f64>;
pub type CMatrix64 = CMatrix<f64>;
pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type ChannelModel64 = channel::ChannelModel<f64>;
pub type RisMatrix64 = ris::RisMatrix<f64>;
pub type Precoder64 = rates::Precoder<f64>;
pub type RateResult64 = rates::RateResult<f64>;
pub type DesignOutput64 = optimizer::DesignOutput<f64>;
