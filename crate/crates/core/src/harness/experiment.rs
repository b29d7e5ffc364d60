//! Monte Carlo rate-region experiments written as CSV.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ArchSpec, NetworkConfig};
use crate::channel::apply_csi_error;
use crate::error::{Error, Result};
use crate::optimizer::{rate_region, DesignProblem, ErgodicEval, RegionSweep};
use crate::rates::SchemeKind;
use crate::ris::RisArchitecture;

/// Column order of the results file.
pub const RESULT_COLUMNS: [&str; 11] = [
    "scheme", "arch", "csi_alpha", "run", "weight_idx", "u1", "u2", "R1", "R2", "wsr", "seed",
];

/// `%g` with 6 significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

/// One sweep point of one run, as written to the results file. Numeric
/// columns hold `%g`-formatted text so files are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub arch: String,
    pub csi_alpha: String,
    pub run: usize,
    pub weight_idx: usize,
    pub u1: String,
    pub u2: String,
    #[serde(rename = "R1")]
    pub r1: String,
    #[serde(rename = "R2")]
    pub r2: String,
    pub wsr: String,
    pub seed: u64,
}

fn rows_of(sweep: &RegionSweep<f64>, scheme: SchemeKind, arch: &ArchSpec, alpha: f64, run: usize, seed: u64) -> Vec<ResultRow> {
    sweep
        .points
        .iter()
        .map(|p| ResultRow {
            scheme: scheme.label().into(),
            arch: arch.to_string(),
            csi_alpha: fmt_g(alpha),
            run,
            weight_idx: p.weight_idx,
            u1: fmt_g(p.u[0]),
            u2: fmt_g(p.u[1]),
            r1: fmt_g(p.rates[0]),
            r2: fmt_g(p.rates[1]),
            wsr: fmt_g(p.wsr),
            seed,
        })
        .collect()
}

/// Rate region of one (scheme, architecture, run). The run's channels are
/// drawn from `seed + run`; the estimate the design sees is the truth plus
/// an error draw from the same stream. Under imperfect CSI the rates are
/// averaged over the error around the estimate.
pub fn run_region(cfg: &NetworkConfig, scheme: SchemeKind, arch: &ArchSpec, run: usize) -> Result<RegionSweep<f64>> {
    cfg.check_arch(arch)?;
    let seed = cfg.seed.wrapping_add(run as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = cfg.channel_model().realize(&mut rng)?;
    let estimate = apply_csi_error(&truth, &cfg.csi, &mut rng);
    let full = DesignProblem::new(
        estimate,
        cfg.tx(),
        cfg.dims.ris_count,
        match arch {
            ArchSpec::Ris(a) => a.clone(),
            ArchSpec::NoRis => RisArchitecture::SingleConnected,
        },
    )?;
    let problem = match arch {
        ArchSpec::NoRis => full.without_ris(),
        ArchSpec::Ris(_) => full,
    };
    let ergodic = cfg.imperfect_csi().then_some(ErgodicEval {
        err: cfg.csi,
        n_samples: cfg.error_samples,
    });
    let embed = scheme == SchemeKind::Rs1 && cfg.dims.users == 2;
    rate_region(
        &problem,
        &cfg.scheme(scheme),
        &cfg.optimizer,
        cfg.n_weights,
        embed,
        ergodic.as_ref(),
        seed,
    )
}

/// Run every (scheme, architecture, run) and stream the rows to `out` in
/// that key order. Tasks run in parallel batches; each finished batch is
/// written and flushed before the next starts.
pub fn run_to_writer<W: Write>(
    cfg: &NetworkConfig,
    schemes: &[SchemeKind],
    archs: &[ArchSpec],
    out: W,
    out_name: &Path,
) -> Result<usize> {
    if cfg.dims.users != 2 {
        return Err(Error::validation("network.users", "rate-region experiments need exactly 2 users"));
    }
    for a in archs {
        cfg.check_arch(a)?;
    }
    let csv_err = |e: csv::Error| Error::Csv {
        path: out_name.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(RESULT_COLUMNS).map_err(csv_err)?;
    let tasks: Vec<(SchemeKind, &ArchSpec, usize)> = schemes
        .iter()
        .flat_map(|&s| archs.iter().flat_map(move |a| (0..cfg.mc_runs).map(move |r| (s, a, r))))
        .collect();
    let batch = rayon::current_num_threads().max(1);
    let mut rows = 0;
    for chunk in tasks.chunks(batch) {
        let done: Vec<Result<Vec<ResultRow>>> = chunk
            .par_iter()
            .map(|&(s, a, r)| {
                let sweep = run_region(cfg, s, a, r)?;
                Ok(rows_of(&sweep, s, a, cfg.csi.alpha(), r, cfg.seed.wrapping_add(r as u64)))
            })
            .collect();
        for result in done {
            for row in result? {
                writer.serialize(&row).map_err(csv_err)?;
                rows += 1;
            }
        }
        writer.flush().map_err(|source| Error::Io {
            path: out_name.to_path_buf(),
            source,
        })?;
    }
    Ok(rows)
}

/// [`run_to_writer`] into a file.
pub fn run_experiment(cfg: &NetworkConfig, schemes: &[SchemeKind], archs: &[ArchSpec], out: &Path) -> Result<usize> {
    let file = File::create(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    run_to_writer(cfg, schemes, archs, file, out)
}
