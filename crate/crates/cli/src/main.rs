//! `anderson-lab`: runs the numerical experiments of anderson-core and
//! records every artifact in a hashed manifest.
//!
//! Exit codes: 0 success, 1 numerical failure or failed checks, 2 usage or
//! configuration error.

mod config;
mod manifest;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anderson_core::Error;
use clap::{Parser, Subcommand};

use config::{RunConfig, OUT_ENV};
use manifest::{RunManifest, Status};

#[derive(Parser)]
#[command(
    name = "anderson-lab",
    version,
    about = "Numerical laboratory for the 2D and 1D Anderson Hamiltonian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the environment and the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single noise seed, replacing `noise.seeds`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample and renormalize the noise; writes fields and Besov block norms.
    Noise,
    /// Low eigenpairs with residuals and the ground state positivity check.
    Spectrum,
    /// Nodal domains, the Courant check and doubling indices.
    Nodal,
    /// The quasiconformal factorization of one eigenfunction on a disc.
    Qc,
    /// Spectral inequality probe and the staged null-control drive (1D).
    Control,
    /// The acceptance suite; one line per criterion.
    Verify,
    /// Summarize an earlier run and re-hash its artifacts.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Noise => "noise",
            Command::Spectrum => "spectrum",
            Command::Nodal => "nodal",
            Command::Qc => "qc",
            Command::Control => "control",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

fn output_dir(cli: &Cli, cfg: &RunConfig, subcommand: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("anderson-lab-out").join(subcommand))
}

fn report(dir: &Path) -> Result<ExitCode, Error> {
    let m = RunManifest::read(dir)?;
    println!("{} {} ({}): {:?}", m.tool, m.version, m.subcommand, m.status);
    if let Some(f) = &m.failure {
        println!("failed in stage {}: {}", f.stage, f.error);
    }
    for c in &m.checks {
        println!("{c}");
    }
    for s in &m.stages {
        println!("stage {:<28} {:>9.3}s", s.stage, s.seconds);
    }
    let stale = m.stale_artifacts(dir);
    println!("{} artifacts, {} stale", m.artifacts.len(), stale.len());
    for name in &stale {
        println!("stale {name}");
    }
    Ok(if stale.is_empty() && m.status == Status::Ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.noise.seeds = vec![seed];
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out = output_dir(&cli, &cfg, name);
    if let Command::Report = cli.command {
        return report(&out).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            ExitCode::from(2)
        });
    }
    if let Err(e) = cfg.validate(name) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match runner::run(name, &cfg, &out) {
        Ok(m) => {
            for c in &m.checks {
                if name != "verify" {
                    println!("{c}");
                }
            }
            if let Some(f) = &m.failure {
                eprintln!("error in stage {}: {}", f.stage, f.error);
            }
            println!("{} artifacts in {}", m.artifacts.len(), out.display());
            match m.status {
                Status::Ok => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
