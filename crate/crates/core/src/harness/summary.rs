//! Ensemble averages of a results file.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::experiment::{fmt_g, ResultRow, RESULT_COLUMNS};
use crate::error::{Error, Result};
use crate::optimizer::{average_sweeps, RegionPoint, RegionSweep};

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "scheme", "arch", "csi_alpha", "weight_idx", "u1", "u2", "R1", "R2", "R1_se", "R2_se", "wsr", "runs",
    "frontier",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub arch: String,
    pub csi_alpha: String,
    pub weight_idx: usize,
    pub u1: String,
    pub u2: String,
    #[serde(rename = "R1")]
    pub r1: String,
    #[serde(rename = "R2")]
    pub r2: String,
    #[serde(rename = "R1_se")]
    pub r1_se: String,
    #[serde(rename = "R2_se")]
    pub r2_se: String,
    pub wsr: String,
    pub runs: usize,
    /// 1 if the averaged point is on the Pareto frontier of its series.
    pub frontier: u8,
}

/// Rows grouped into (series, run) sweeps, series in first-seen order.
struct Series {
    key: (String, String, String),
    runs: Vec<(usize, Vec<RegionPoint<f64>>)>,
}

fn parse_num(s: &str, column: &str, path: &Path) -> Result<f64> {
    s.parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        message: format!("column {column}: '{s}' is not a number"),
    })
}

/// Average `R1`, `R2` and the WSR over runs at matching weight indices and
/// flag the frontier of each averaged (scheme, arch, csi_alpha) series.
pub fn summarize_reader<R: Read, W: Write>(input: R, in_name: &Path, out: W, out_name: &Path) -> Result<usize> {
    let csv_err = |path: &Path, e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| csv_err(in_name, e))?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Csv {
            path: in_name.to_path_buf(),
            message: format!("expected columns {RESULT_COLUMNS:?}, found {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut series: Vec<Series> = Vec::new();
    for rec in reader.deserialize::<ResultRow>() {
        let row = rec.map_err(|e| csv_err(in_name, e))?;
        let point = RegionPoint {
            weight_idx: row.weight_idx,
            u: [parse_num(&row.u1, "u1", in_name)?, parse_num(&row.u2, "u2", in_name)?],
            rates: [parse_num(&row.r1, "R1", in_name)?, parse_num(&row.r2, "R2", in_name)?],
            wsr: parse_num(&row.wsr, "wsr", in_name)?,
        };
        let key = (row.scheme, row.arch, row.csi_alpha);
        let pos = match series.iter().position(|s| s.key == key) {
            Some(p) => p,
            None => {
                series.push(Series { key, runs: vec![] });
                series.len() - 1
            }
        };
        let runs = &mut series[pos].runs;
        match runs.iter_mut().find(|(r, _)| *r == row.run) {
            Some((_, pts)) => pts.push(point),
            None => runs.push((row.run, vec![point])),
        }
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(SUMMARY_COLUMNS).map_err(|e| csv_err(out_name, e))?;
    let mut written = 0;
    for s in &series {
        let sweeps: Vec<RegionSweep<f64>> = s
            .runs
            .iter()
            .map(|(_, pts)| RegionSweep { points: pts.clone() })
            .collect();
        let avg = average_sweeps(&sweeps).map_err(|e| Error::Csv {
            path: in_name.to_path_buf(),
            message: format!("series {}/{}/{}: {e}", s.key.0, s.key.1, s.key.2),
        })?;
        for p in avg {
            let row = SummaryRow {
                scheme: s.key.0.clone(),
                arch: s.key.1.clone(),
                csi_alpha: s.key.2.clone(),
                weight_idx: p.weight_idx,
                u1: fmt_g(p.u[0]),
                u2: fmt_g(p.u[1]),
                r1: fmt_g(p.mean[0]),
                r2: fmt_g(p.mean[1]),
                r1_se: fmt_g(p.std_err[0]),
                r2_se: fmt_g(p.std_err[1]),
                wsr: fmt_g(p.wsr),
                runs: sweeps.len(),
                frontier: u8::from(p.on_frontier),
            };
            writer.serialize(&row).map_err(|e| csv_err(out_name, e))?;
            written += 1;
        }
    }
    writer.flush().map_err(|source| Error::Io {
        path: out_name.to_path_buf(),
        source,
    })?;
    Ok(written)
}

pub fn summarize(input: &Path, output: &Path) -> Result<usize> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let inp = std::fs::File::open(input).map_err(io(input))?;
    let out = std::fs::File::create(output).map_err(io(output))?;
    summarize_reader(inp, input, out, output)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "scheme,arch,csi_alpha,run,weight_idx,u1,u2,R1,R2,wsr,seed\n";

    fn run(text: &str) -> Result<String> {
        let mut out = Vec::new();
        summarize_reader(text.as_bytes(), Path::new("in.csv"), &mut out, Path::new("out.csv"))?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn single_run_passes_through() {
        let input = format!(
            "{HEAD}sdma,none,1,0,0,1,0,2,0.5,2,1\nsdma,none,1,0,1,0,1,0.4,0.3,0.3,1\nsdma,none,1,0,2,1,0,2,0,2,1\n"
        );
        let out = run(&input).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], SUMMARY_COLUMNS.join(","));
        assert_eq!(lines[1], "sdma,none,1,0,1,0,2,0.5,0,0,2,1,1");
        assert_eq!(lines[2], "sdma,none,1,1,0,1,0.4,0.3,0,0,0.3,1,0");
        assert_eq!(lines[3], "sdma,none,1,2,1,0,2,0,0,0,2,1,0");
    }

    #[test]
    fn identical_runs_average_to_either() {
        let a = "rs1,single,0.9,0,0,0.5,0.5,1.5,2.5,2,1\n";
        let b = "rs1,single,0.9,1,0,0.5,0.5,1.5,2.5,2,2\n";
        let out = run(&format!("{HEAD}{a}{b}")).unwrap();
        assert_eq!(out.lines().nth(1).unwrap(), "rs1,single,0.9,0,0.5,0.5,1.5,2.5,0,0,2,2,1");
    }

    #[test]
    fn schema_mismatch() {
        let err = run("scheme,arch\nrs1,none\n").unwrap_err();
        assert!(matches!(err, Error::Csv { .. }), "{err}");
        let err = run(&format!("{HEAD}rs1,none,1,0,0,x,0,1,1,1,1\n")).unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }
}
