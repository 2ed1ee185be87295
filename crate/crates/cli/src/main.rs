//! `wulff`: runs flows, invariant checks, Alexandrov–Fenchel batteries,
//! spectra and the mixed-volume oracle from a TOML configuration.
//!
//! Exit codes: 0 success or convergence, 1 configuration error or failed
//! check, 2 timeout, 3 convexity lost. `summary.txt` is written to the output
//! directory on every path.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Session;
use config::{RunConfig, DEFAULT_OUT};
use output::Summary;

#[derive(Parser, Debug)]
#[command(name = "wulff", version, about = "Anisotropic curvature flow toward Wulff shapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Suppress progress and report output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate the flow from the configured body.
    Run,
    /// Run the invariant suite on the configured anisotropy and body.
    Check,
    /// Alexandrov–Fenchel slack over seeded random bodies.
    Af,
    /// First eigenvalue of the linearized operator and the predicted rate.
    Spectrum,
    /// Compare surface-integral mixed volumes with the Monte-Carlo oracle.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Check => "check",
            Command::Af => "af",
            Command::Spectrum => "spectrum",
            Command::Oracle => "oracle",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Err(e) = limit_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let loaded = load(&cli);
    let out = cli.out.clone().unwrap_or_else(|| match &loaded {
        Ok(cfg) => cfg.output.dir.clone(),
        Err(_) => PathBuf::from(DEFAULT_OUT),
    });
    let mut summary = Summary::new(cli.command.name());
    let code = match loaded {
        Err(e) => {
            summary.set("status", "config_error");
            summary.set("reason", format!("{e:#}"));
            eprintln!("error: {e:#}");
            1
        }
        Ok(config) => {
            let mut session = Session { config, out: out.clone(), quiet: cli.quiet, summary };
            let code = std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))
                .and_then(|_| dispatch(cli.command, &mut session))
                .unwrap_or_else(|e| {
                    session.summary.set("status", "error");
                    session.summary.set("reason", format!("{e:#}"));
                    eprintln!("error: {e:#}");
                    1
                });
            summary = session.summary;
            code
        }
    };
    summary.set("exit_code", code);
    if let Err(e) = summary.write(&out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("--config PATH is required")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: Command, s: &mut Session) -> Result<u8> {
    s.summary.set("seed", s.config.seed);
    match command {
        Command::Run => commands::run(s),
        Command::Check => commands::check(s),
        Command::Af => commands::af(s),
        Command::Spectrum => commands::spectrum(s),
        Command::Oracle => commands::oracle(s),
    }
}

/// Caps the rayon pool at `WULFF_THREADS` when set.
fn limit_threads() -> Result<()> {
    let Ok(raw) = std::env::var("WULFF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().with_context(|| format!("WULFF_THREADS = {raw:?} is not a count"))?;
    anyhow::ensure!(threads >= 1, "WULFF_THREADS must be at least 1");
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}
