use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "kernelcomp",
    version,
    about = "Covariance completion on serrated domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical completion of a matrix observed on a domain.
    Complete {
        matrix: PathBuf,
        domain: PathBuf,
        /// `ascending`, `descending` or a comma-separated separator permutation.
        #[arg(long, default_value = "ascending")]
        order: String,
        /// Completed matrix CSV; diagnostics go next to it as `.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the canonical completion from fragment observations.
    Estimate {
        fragments: PathBuf,
        domain: PathBuf,
        /// `fve:<fraction>`, `fixed:<r>[,<r>...]` or `schedule:<alpha>,<beta>`.
        #[arg(long, default_value = "fve:0.95")]
        rule: String,
        #[arg(long, default_value_t = kernelcomp::estimation::DEFAULT_MIN_COUNT)]
        min_count: usize,
        /// Estimate CSV; the report goes next to it as `.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Test whether the completion is unique.
    CheckUnique {
        matrix: PathBuf,
        domain: PathBuf,
        #[arg(long, default_value_t = kernelcomp::DEFAULT_UNIQUENESS_TOL)]
        tol: f64,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write completions perturbed by random contractions.
    Perturb {
        matrix: PathBuf,
        domain: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect experiment reports into RRE plot data.
    ExportPlot {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> kernelcomp::Result<()> {
    let Ok(raw) = std::env::var("KERNELCOMP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        kernelcomp::Error::InvalidInput(format!(
            "KERNELCOMP_THREADS={raw:?} is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| kernelcomp::Error::InvalidInput(e.to_string()))
}

fn run(cli: Cli) -> kernelcomp::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Complete {
            matrix,
            domain,
            order,
            out,
        } => commands::complete(&matrix, &domain, &order, &out),
        Command::Estimate {
            fragments,
            domain,
            rule,
            min_count,
            out,
        } => commands::estimate(&fragments, &domain, &rule, min_count, &out),
        Command::Simulate { config, out_dir } => commands::simulate(&config, &out_dir),
        Command::CheckUnique {
            matrix,
            domain,
            tol,
            out,
        } => commands::check_unique(&matrix, &domain, tol, out.as_deref()),
        Command::Perturb {
            matrix,
            domain,
            norm,
            seed,
            count,
            out,
        } => commands::perturb(&matrix, &domain, norm, seed, count, &out),
        Command::ExportPlot { reports, out } => {
            let refs: Vec<&Path> = reports.iter().map(PathBuf::as_path).collect();
            commands::export_plot(&refs, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
