//! TOML experiment configuration.
//!
//! Quantities with a natural dB form may be given either way (`power_w` or
//! `power_dbm`, `noise_w` or `noise_dbm`, `zeta0` or `zeta0_db`,
//! `rician_kappa` or `rician_kappa_db`), never both. Unknown keys are
//! rejected. A missing `[optimizer]` table means default settings.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{db_to_linear, dbm_to_watts, ChannelModel, CsiErrorModel, Dimensions, FadingParams, Geometry};
use crate::error::{Error, Result};
use crate::optimizer::{OptimizerSettings, TxConfig};
use crate::rates::{Scheme, SchemeKind};
use crate::ris::RisArchitecture;

/// Surface architecture of an experiment, or no surface at all.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArchSpec {
    NoRis,
    Ris(RisArchitecture),
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchSpec::NoRis => f.write_str("none"),
            ArchSpec::Ris(a) => a.fmt(f),
        }
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(ArchSpec::NoRis),
            other => other.parse().map(ArchSpec::Ris),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub dims: Dimensions,
    /// HRS user groups.
    pub groups: Vec<Vec<usize>>,
    /// Per-AP power budgets, W.
    pub power: Vec<f64>,
    /// Receiver noise power, W.
    pub noise: f64,
    pub geometry: Geometry<f64>,
    pub fading: FadingParams<f64>,
    pub csi: CsiErrorModel<f64>,
    /// Error draws per ergodic evaluation under imperfect CSI.
    pub error_samples: usize,
    pub schemes: Vec<SchemeKind>,
    pub archs: Vec<ArchSpec>,
    pub mc_runs: usize,
    pub n_weights: usize,
    pub seed: u64,
    pub optimizer: OptimizerSettings,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    aps: usize,
    antennas_per_ap: usize,
    users: usize,
    #[serde(default)]
    ris_count: usize,
    #[serde(default)]
    elements_per_ris: usize,
    groups: Option<Vec<Vec<usize>>>,
    power_w: Option<OneOrMany>,
    power_dbm: Option<OneOrMany>,
    noise_w: Option<f64>,
    noise_dbm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    d_ar: f64,
    d_ru: f64,
    /// Defaults to `sqrt(d_ar^2 - d_ru^2)`.
    d_au: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFading {
    zeta0: Option<f64>,
    zeta0_db: Option<f64>,
    eps_au: f64,
    eps_ar: f64,
    eps_ru: f64,
    rician_kappa: Option<f64>,
    rician_kappa_db: Option<f64>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_error_samples() -> usize {
    2000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCsi {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_error_samples")]
    error_samples: usize,
}

impl Default for RawCsi {
    fn default() -> Self {
        RawCsi {
            alpha: default_alpha(),
            error_samples: default_error_samples(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    schemes: Vec<String>,
    archs: Vec<String>,
    mc_runs: usize,
    n_weights: usize,
    seed: u64,
}

impl Default for RawExperiment {
    fn default() -> Self {
        RawExperiment {
            schemes: vec!["rs1".into(), "sdma".into(), "noma".into()],
            archs: vec!["single".into(), "none".into()],
            mc_runs: 50,
            n_weights: 21,
            seed: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    network: RawNetwork,
    geometry: RawGeometry,
    fading: RawFading,
    #[serde(default)]
    csi: RawCsi,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    optimizer: OptimizerSettings,
}

fn exactly_one<T>(field: &str, linear: Option<T>, db: Option<T>) -> Result<Option<(T, bool)>> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::validation(field, "give the linear or the dB form, not both")),
        (Some(v), None) => Ok(Some((v, false))),
        (None, Some(v)) => Ok(Some((v, true))),
        (None, None) => Ok(None),
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(field, format!("must be > 0, got {v}")))
    }
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let n = &raw.network;
        let dims = Dimensions {
            aps: n.aps,
            antennas_per_ap: n.antennas_per_ap,
            users: n.users,
            ris_count: n.ris_count,
            elements_per_ris: n.elements_per_ris,
        };
        for (field, v) in [
            ("network.aps", n.aps),
            ("network.antennas_per_ap", n.antennas_per_ap),
            ("network.users", n.users),
        ] {
            if v == 0 {
                return Err(Error::validation(field, "must be >= 1"));
            }
        }
        dims.validate()?;

        let power = match exactly_one("network.power_w", n.power_w.as_ref(), n.power_dbm.as_ref())? {
            None => return Err(Error::validation("network.power_w", "missing (or power_dbm)")),
            Some((spec, db)) => {
                let values = match spec {
                    OneOrMany::One(v) => vec![*v; n.aps],
                    OneOrMany::Many(v) => v.clone(),
                };
                if values.len() != n.aps {
                    return Err(Error::validation(
                        "network.power_w",
                        format!("{} budgets for {} APs", values.len(), n.aps),
                    ));
                }
                values
                    .into_iter()
                    .map(|v| positive("network.power_w", if db { dbm_to_watts(v) } else { v }))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let noise = match exactly_one("network.noise_w", n.noise_w, n.noise_dbm)? {
            None => return Err(Error::validation("network.noise_w", "missing (or noise_dbm)")),
            Some((v, db)) => positive("network.noise_w", if db { dbm_to_watts(v) } else { v })?,
        };
        let groups = n.groups.clone().unwrap_or_else(|| (0..n.users).map(|k| vec![k]).collect());
        Scheme::Hrs2Layer { groups: groups.clone() }
            .check(n.users)
            .map_err(|e| Error::validation("network.groups", e.to_string()))?;

        let g = &raw.geometry;
        let geometry = match g.d_au {
            Some(d_au) => Geometry::new(g.d_ar, g.d_ru, d_au)?,
            None => Geometry::from_ris_distances(g.d_ar, g.d_ru)?,
        };

        let f = &raw.fading;
        let zeta0 = match exactly_one("fading.zeta0", f.zeta0, f.zeta0_db)? {
            None => return Err(Error::validation("fading.zeta0", "missing (or zeta0_db)")),
            Some((v, db)) => if db { db_to_linear(v) } else { v },
        };
        let rician_kappa = match exactly_one("fading.rician_kappa", f.rician_kappa, f.rician_kappa_db)? {
            None => return Err(Error::validation("fading.rician_kappa", "missing (or rician_kappa_db)")),
            Some((v, db)) => if db { db_to_linear(v) } else { v },
        };
        let fading = FadingParams {
            zeta0,
            eps_au: f.eps_au,
            eps_ar: f.eps_ar,
            eps_ru: f.eps_ru,
            rician_kappa,
        };
        fading.validate()?;

        let csi = CsiErrorModel::new(raw.csi.alpha, noise)?;
        if raw.csi.error_samples == 0 {
            return Err(Error::validation("csi.error_samples", "must be >= 1"));
        }

        let e = &raw.experiment;
        let schemes = e
            .schemes
            .iter()
            .map(|s| s.parse().map_err(|err: Error| Error::validation("experiment.schemes", err.to_string())))
            .collect::<Result<Vec<SchemeKind>>>()?;
        let archs = e
            .archs
            .iter()
            .map(|s| s.parse().map_err(|err: Error| Error::validation("experiment.archs", err.to_string())))
            .collect::<Result<Vec<ArchSpec>>>()?;
        if schemes.is_empty() {
            return Err(Error::validation("experiment.schemes", "must not be empty"));
        }
        if archs.is_empty() {
            return Err(Error::validation("experiment.archs", "must not be empty"));
        }
        if e.mc_runs == 0 {
            return Err(Error::validation("experiment.mc_runs", "must be >= 1"));
        }
        if e.n_weights == 0 {
            return Err(Error::validation("experiment.n_weights", "must be >= 1"));
        }
        raw.optimizer.validate()?;

        let cfg = NetworkConfig {
            dims,
            groups,
            power,
            noise,
            geometry,
            fading,
            csi,
            error_samples: raw.csi.error_samples,
            schemes,
            archs,
            mc_runs: e.mc_runs,
            n_weights: e.n_weights,
            seed: e.seed,
            optimizer: raw.optimizer,
        };
        for a in &cfg.archs {
            cfg.check_arch(a)?;
        }
        Ok(cfg)
    }

    /// Architectures must fit the configured surfaces.
    pub fn check_arch(&self, arch: &ArchSpec) -> Result<()> {
        if let ArchSpec::Ris(a) = arch {
            if self.dims.ris_dim() == 0 {
                return Err(Error::validation(
                    "experiment.archs",
                    format!("'{a}' needs ris_count and elements_per_ris >= 1"),
                ));
            }
            a.group_sizes(self.dims.elements_per_ris)
                .map_err(|e| Error::validation("experiment.archs", e.to_string()))?;
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel<f64> {
        ChannelModel {
            dims: self.dims,
            geometry: self.geometry,
            fading: self.fading,
        }
    }

    pub fn tx(&self) -> TxConfig<f64> {
        TxConfig {
            antennas_per_ap: self.dims.antennas_per_ap,
            power: self.power.clone(),
            noise: self.noise,
        }
    }

    /// Concrete scheme for a family; NOMA starts with user 0 decoded first.
    pub fn scheme(&self, kind: SchemeKind) -> Scheme {
        match kind {
            SchemeKind::Rs1 => Scheme::Rs1Layer,
            SchemeKind::Hrs => Scheme::Hrs2Layer {
                groups: self.groups.clone(),
            },
            SchemeKind::Sdma => Scheme::Sdma,
            SchemeKind::Noma => Scheme::Noma { order: [0, 1] },
        }
    }

    pub fn imperfect_csi(&self) -> bool {
        self.csi.sigma_e2() > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG2A: &str = include_str!("../../../../configs/fig2a.toml");

    #[test]
    fn shipped_fig2a() {
        let c = NetworkConfig::from_toml_str(FIG2A).unwrap();
        assert_eq!(
            c.dims,
            Dimensions {
                aps: 1,
                antennas_per_ap: 2,
                users: 2,
                ris_count: 1,
                elements_per_ris: 20
            }
        );
        assert_eq!(c.power, vec![1.0]);
        assert!((c.noise - 1e-10).abs() < 1e-24);
        assert!((c.fading.rician_kappa - 10f64.powf(0.2)).abs() < 1e-12);
        assert!((c.fading.zeta0 - 1e-3).abs() < 1e-15);
        assert_eq!((c.fading.eps_au, c.fading.eps_ar, c.fading.eps_ru), (3.0, 1.9, 1.7));
        assert_eq!((c.geometry.d_ar, c.geometry.d_ru), (50.0, 10.0));
        assert!(!c.imperfect_csi());
        assert_eq!(c.mc_runs, 50);
        assert_eq!(c.n_weights, 21);
        assert_eq!(c.optimizer, OptimizerSettings::default());
    }

    const MINIMAL: &str = r#"
[network]
aps = 1
antennas_per_ap = 2
users = 2
ris_count = 1
elements_per_ris = 4
power_w = 1.0
noise_dbm = -70

[geometry]
d_ar = 50.0
d_ru = 10.0

[fading]
zeta0_db = -30
eps_au = 3.0
eps_ar = 1.9
eps_ru = 1.7
rician_kappa_db = 2
"#;

    #[test]
    fn defaults_applied() {
        let c = NetworkConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.optimizer, OptimizerSettings::default());
        assert_eq!(c.groups, vec![vec![0], vec![1]]);
        assert_eq!(c.archs, vec![ArchSpec::Ris(RisArchitecture::SingleConnected), ArchSpec::NoRis]);
        assert_eq!(c.schemes, vec![SchemeKind::Rs1, SchemeKind::Sdma, SchemeKind::Noma]);
        assert_eq!(c.error_samples, 2000);
    }

    #[test]
    fn surface_free_network() {
        let no_ris = MINIMAL.replace("ris_count = 1", "ris_count = 0");
        // the default arch list asks for a surface that is not configured
        assert!(NetworkConfig::from_toml_str(&no_ris).unwrap_err().is_validation());
        let c = NetworkConfig::from_toml_str(&format!("{no_ris}\n[experiment]\narchs = [\"none\"]\n")).unwrap();
        assert_eq!(c.dims.ris_dim(), 0);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            MINIMAL.replace("users = 2", "users = 0"),
            MINIMAL.replace("power_w = 1.0", "power_w = 0.0"),
            MINIMAL.replace("power_w = 1.0", "power_w = 1.0\npower_dbm = 30"),
            MINIMAL.replace("d_ru = 10.0", "d_ru = 10.0\nbogus = 1"),
            format!("{MINIMAL}\n[optimizer]\nwsr_tol = 2.0\n"),
            format!("{MINIMAL}\n[csi]\nalpha = 1.5\n"),
            format!("{MINIMAL}\n[experiment]\nschemes = [\"tdma\"]\n"),
            format!("{MINIMAL}\n[experiment]\narchs = [\"group:3+3\"]\n"),
        ];
        for text in &cases {
            let err = NetworkConfig::from_toml_str(text).unwrap_err();
            assert!(err.is_validation(), "{err}");
        }
    }

    #[test]
    fn arch_round_trip() {
        for s in ["none", "single", "fully", "group:4+4"] {
            assert_eq!(s.parse::<ArchSpec>().unwrap().to_string(), s);
        }
        assert!("ring".parse::<ArchSpec>().is_err());
    }
}
