use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use risrsma::harness::{run_experiment, run_to_writer, summarize, ArchSpec, NetworkConfig};
use risrsma::{Error, SchemeKind};

#[derive(Parser)]
#[command(name = "risrsma", version, about = "RIS-aided rate-splitting rate-region experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo rate-region experiment and write per-run CSV rows.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of rs1,sdma,noma,hrs.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<SchemeKind>>,
        /// single, fully, group:<sizes> or none; repeatable.
        #[arg(long)]
        arch: Vec<ArchSpec>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mc_runs: Option<usize>,
        /// Output CSV; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average a results file over runs and flag the frontier points.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate a configuration file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            schemes,
            arch,
            seed,
            mc_runs,
            out,
        } => {
            let mut cfg = NetworkConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = mc_runs {
                if n == 0 {
                    return Err(Error::Validation {
                        field: "--mc-runs".into(),
                        message: "must be >= 1".into(),
                    });
                }
                cfg.mc_runs = n;
            }
            let schemes = schemes.unwrap_or_else(|| cfg.schemes.clone());
            let archs = if arch.is_empty() { cfg.archs.clone() } else { arch };
            let rows = match &out {
                Some(path) => run_experiment(&cfg, &schemes, &archs, path)?,
                None => {
                    let stdout = std::io::stdout().lock();
                    run_to_writer(&cfg, &schemes, &archs, stdout, "<stdout>".as_ref())?
                }
            };
            eprintln!("wrote {rows} rows");
        }
        Command::Summarize { input, out } => {
            let rows = summarize(&input, &out)?;
            eprintln!("wrote {rows} summary rows to {}", out.display());
        }
        Command::ValidateConfig { config } => {
            let cfg = NetworkConfig::load(&config)?;
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "ok: {} AP(s) x {} antennas, {} users, {} x {} RIS elements, {} runs x {} weights",
                cfg.dims.aps,
                cfg.dims.antennas_per_ap,
                cfg.dims.users,
                cfg.dims.ris_count,
                cfg.dims.elements_per_ris,
                cfg.mc_runs,
                cfg.n_weights
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
