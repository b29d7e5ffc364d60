//! Propagation channels for the AP → user, AP → RIS and RIS → user links.
//!
//! Large-scale fading follows the distance power law `sqrt(zeta0 * d^-eps)`;
//! the direct links are Rayleigh, the two RIS hops are Rician with an
//! all-ones line-of-sight component. Imperfect CSI is modelled by adding
//! i.i.d. circularly-symmetric Gaussian errors to every block.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{cn01, CMatrix, Cplx, Real};

/// System dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub aps: usize,
    pub antennas_per_ap: usize,
    pub users: usize,
    /// Number of surfaces; 0 disables the reflected path.
    pub ris_count: usize,
    /// Elements per surface; 0 disables the reflected path.
    pub elements_per_ris: usize,
}

impl Dimensions {
    /// Total transmit dimension `N * N_t`.
    pub fn tx_dim(&self) -> usize {
        self.aps * self.antennas_per_ap
    }

    /// Total reflecting dimension `L * M`.
    pub fn ris_dim(&self) -> usize {
        self.ris_count * self.elements_per_ris
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("aps", self.aps),
            ("antennas_per_ap", self.antennas_per_ap),
            ("users", self.users),
        ] {
            if v == 0 {
                return Err(Error::validation(name, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Link distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<T> {
    pub d_ar: T,
    pub d_ru: T,
    pub d_au: T,
}

impl<T: Real> Geometry<T> {
    pub fn new(d_ar: T, d_ru: T, d_au: T) -> Result<Self> {
        let g = Geometry { d_ar, d_ru, d_au };
        for (name, d) in [("d_ar", d_ar), ("d_ru", d_ru), ("d_au", d_au)] {
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::validation(name, format!("distance must be > 0, got {d}")));
            }
        }
        Ok(g)
    }

    /// Users sit on a circle around the RIS such that the AP–user distance
    /// is `sqrt(d_ar^2 - d_ru^2)`.
    pub fn from_ris_distances(d_ar: T, d_ru: T) -> Result<Self> {
        if !(d_ar > d_ru) {
            return Err(Error::validation(
                "geometry",
                format!("default AP-user distance needs d_ar > d_ru (got {d_ar} <= {d_ru})"),
            ));
        }
        Self::new(d_ar, d_ru, (d_ar * d_ar - d_ru * d_ru).sqrt())
    }
}

/// Large- and small-scale fading parameters, all linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams<T> {
    /// Power gain at the 1 m reference distance.
    pub zeta0: T,
    pub eps_au: T,
    pub eps_ar: T,
    pub eps_ru: T,
    /// Line-of-sight to scattered power ratio of the RIS hops.
    pub rician_kappa: T,
}

impl<T: Real> FadingParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta0 > T::zero()) {
            return Err(Error::validation("zeta0", "must be > 0"));
        }
        for (name, e) in [
            ("eps_au", self.eps_au),
            ("eps_ar", self.eps_ar),
            ("eps_ru", self.eps_ru),
        ] {
            if !(e > T::zero()) {
                return Err(Error::validation(name, "path-loss exponent must be > 0"));
            }
        }
        if !(self.rician_kappa >= T::zero()) {
            return Err(Error::validation("rician_kappa", "must be >= 0"));
        }
        Ok(())
    }
}

/// `10^(db/10)`.
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// `10^((dbm - 30)/10)` Watts.
pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    db_to_linear(dbm - T::lit(30.0))
}

/// Amplitude gain `sqrt(zeta0 * d^-eps)`.
pub fn pathloss_amplitude<T: Real>(d: T, eps: T, zeta0: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::invalid(format!("distance must be > 0, got {d}")));
    }
    if !(zeta0 > T::zero()) {
        return Err(Error::invalid(format!("zeta0 must be > 0, got {zeta0}")));
    }
    if !(eps > T::zero()) {
        return Err(Error::invalid(format!("path-loss exponent must be > 0, got {eps}")));
    }
    Ok((zeta0 * d.powf(-eps)).sqrt())
}

/// The three channel blocks seen by the users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    /// `N*N_t x K`, column k is the direct channel of user k.
    pub direct: CMatrix<T>,
    /// `L*M x K`, column k is the RIS → user k channel.
    pub ris_user: CMatrix<T>,
    /// `L*M x N*N_t`, the AP → RIS channel.
    pub ap_ris: CMatrix<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn new(direct: CMatrix<T>, ris_user: CMatrix<T>, ap_ris: CMatrix<T>) -> Result<Self> {
        let set = ChannelSet {
            direct,
            ris_user,
            ap_ris,
        };
        set.check_shapes()?;
        Ok(set)
    }

    /// Direct links only; the reflecting blocks have zero rows.
    pub fn direct_only(direct: CMatrix<T>) -> Self {
        let (tx, k) = direct.shape();
        ChannelSet {
            direct,
            ris_user: DMatrix::zeros(0, k),
            ap_ris: DMatrix::zeros(0, tx),
        }
    }

    pub fn tx_dim(&self) -> usize {
        self.direct.nrows()
    }

    pub fn users(&self) -> usize {
        self.direct.ncols()
    }

    pub fn ris_dim(&self) -> usize {
        self.ris_user.nrows()
    }

    /// Same direct channels with the reflected path removed.
    pub fn without_ris(&self) -> Self {
        Self::direct_only(self.direct.clone())
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (tx, k) = self.direct.shape();
        if self.ris_user.ncols() != k {
            return Err(Error::dims(format!(
                "ris_user has {} columns, direct has {k}",
                self.ris_user.ncols()
            )));
        }
        if self.ap_ris.shape() != (self.ris_user.nrows(), tx) {
            return Err(Error::dims(format!(
                "ap_ris is {:?}, expected ({}, {tx})",
                self.ap_ris.shape(),
                self.ris_user.nrows()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.direct, &self.ris_user, &self.ap_ris]
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Check block shapes against the declared system dimensions.
    pub fn check_dims(&self, dims: &Dimensions) -> Result<()> {
        self.check_shapes()?;
        if self.direct.shape() != (dims.tx_dim(), dims.users) || self.ris_dim() != dims.ris_dim() {
            return Err(Error::dims(format!(
                "channel set ({}x{}, ris {}) does not match dimensions {:?}",
                self.tx_dim(),
                self.users(),
                self.ris_dim(),
                dims
            )));
        }
        Ok(())
    }
}

/// Everything needed to draw channel realizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel<T> {
    pub dims: Dimensions,
    pub geometry: Geometry<T>,
    pub fading: FadingParams<T>,
}

impl<T: Real> ChannelModel<T> {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        Geometry::new(self.geometry.d_ar, self.geometry.d_ru, self.geometry.d_au)?;
        self.fading.validate()
    }

    /// Draw one realization. The direct block is drawn first so realizations
    /// with and without the reflected path share it for a given seed.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelSet<T>> {
        self.validate()?;
        let d = &self.dims;
        let f = &self.fading;
        let g = &self.geometry;
        let direct = gen_direct_channels(self, rng)?;
        let ris = d.ris_dim();
        let (ap_ris, ris_user) = if ris == 0 {
            (DMatrix::zeros(0, d.tx_dim()), DMatrix::zeros(0, d.users))
        } else {
            let amp_ar = pathloss_amplitude(g.d_ar, f.eps_ar, f.zeta0)?;
            let amp_ru = pathloss_amplitude(g.d_ru, f.eps_ru, f.zeta0)?;
            let ap_ris = gen_rician_channel(ris, d.tx_dim(), amp_ar, f.rician_kappa, rng)?;
            let ris_user = gen_rician_channel(ris, d.users, amp_ru, f.rician_kappa, rng)?;
            (ap_ris, ris_user)
        };
        Ok(ChannelSet {
            direct,
            ris_user,
            ap_ris,
        })
    }
}

/// Rayleigh direct channels, `N*N_t x K`, entry std = AP–user amplitude gain.
pub fn gen_direct_channels<T: Real, R: Rng + ?Sized>(
    model: &ChannelModel<T>,
    rng: &mut R,
) -> Result<CMatrix<T>> {
    model.dims.validate()?;
    let amp = pathloss_amplitude(model.geometry.d_au, model.fading.eps_au, model.fading.zeta0)?;
    Ok(DMatrix::from_fn(model.dims.tx_dim(), model.dims.users, |_, _| {
        cn01::<T, R>(rng) * amp
    }))
}

/// `amp * (sqrt(k/(1+k)) * 1 + sqrt(1/(1+k)) * H_nlos)` with an all-ones
/// line-of-sight matrix.
pub fn gen_rician_channel<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    amp: T,
    kappa: T,
    rng: &mut R,
) -> Result<CMatrix<T>> {
    if !(kappa >= T::zero()) {
        return Err(Error::invalid(format!("Rician factor must be >= 0, got {kappa}")));
    }
    if !(amp >= T::zero()) || !amp.is_finite() {
        return Err(Error::invalid(format!("amplitude gain must be >= 0, got {amp}")));
    }
    let one = T::one();
    let los = amp * (kappa / (one + kappa)).sqrt();
    let nlos = amp * (one / (one + kappa)).sqrt();
    Ok(DMatrix::from_fn(rows, cols, |_, _| {
        Cplx::new(los, T::zero()) + cn01::<T, R>(rng) * nlos
    }))
}

/// Channel estimation error statistics: `sigma_e2 = sigma_z2 * (1 - alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorModel<T> {
    alpha: T,
    sigma_e2: T,
}

impl<T: Real> CsiErrorModel<T> {
    pub fn new(alpha: T, sigma_z2: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::validation("csi.alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if !(sigma_z2 >= T::zero()) {
            return Err(Error::validation("noise", "noise power must be >= 0"));
        }
        Ok(CsiErrorModel {
            alpha,
            sigma_e2: sigma_z2 * (T::one() - alpha),
        })
    }

    /// Error-free estimates.
    pub fn perfect() -> Self {
        CsiErrorModel {
            alpha: T::one(),
            sigma_e2: T::zero(),
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn sigma_e2(&self) -> T {
        self.sigma_e2
    }
}

/// `truth + E` with `E` i.i.d. `CN(0, sigma_e2)` on all three blocks.
pub fn apply_csi_error<T: Real, R: Rng + ?Sized>(
    truth: &ChannelSet<T>,
    model: &CsiErrorModel<T>,
    rng: &mut R,
) -> ChannelSet<T> {
    let std = model.sigma_e2.sqrt();
    let perturb = |m: &CMatrix<T>, rng: &mut R| m.map(|z| z + cn01::<T, R>(rng) * std);
    if model.sigma_e2 == T::zero() {
        return truth.clone();
    }
    let direct = perturb(&truth.direct, rng);
    let ap_ris = perturb(&truth.ap_ris, rng);
    let ris_user = perturb(&truth.ris_user, rng);
    ChannelSet {
        direct,
        ris_user,
        ap_ris,
    }
}
