mod cache;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::cache::Cache;
use crate::commands::{Job, UsageError};
use crate::config::{cache_dir, expand_argv, out_dir, Params};
use crate::output::Manifest;

/// Bifurcation currents, Lyapunov exponents and multiplier curves for
/// quadratic rational maps.
#[derive(Parser, Debug)]
#[command(name = "biflab", version, args_override_self = true)]
struct Cli {
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Lyapunov exponent of a map
    Lyap,
    /// Cycles of exact period n with their multipliers
    Spectrum,
    /// Points of Per_n(w) on the Per_1(eta) line
    Percurve,
    /// Centers of period-n hyperbolic components of the Mandelbrot set
    Centers,
    /// Bifurcation field and its discrete ddc on a slice grid
    GridBif,
    /// Theta-averaged Per_n masses in a region
    ThetaAvg,
    /// Potential gap between center measures and the bifurcation measure
    Levin,
    /// Guided holomorphic disc from a center
    Trace,
    /// nu2(n) and N2(n) up to nmax
    Counts,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lyap => "lyap",
            Command::Spectrum => "spectrum",
            Command::Percurve => "percurve",
            Command::Centers => "centers",
            Command::GridBif => "grid-bif",
            Command::ThetaAvg => "theta-avg",
            Command::Levin => "levin",
            Command::Trace => "trace",
            Command::Counts => "counts",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.params.threads {
        if t == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let out = out_dir(&cli.params);
    let manifest = Manifest::new(cli.command.name(), serde_json::to_value(&cli.params)?);
    let mut job = Job {
        cache: Cache::new(cache_dir(&cli.params)),
        params: cli.params,
        out,
        manifest,
    };
    match cli.command {
        Command::Lyap => commands::lyap(&mut job)?,
        Command::Spectrum => commands::spectrum(&mut job)?,
        Command::Percurve => commands::percurve(&mut job)?,
        Command::Centers => commands::centers(&mut job)?,
        Command::GridBif => commands::grid_bif(&mut job)?,
        Command::ThetaAvg => commands::theta_avg(&mut job)?,
        Command::Levin => commands::levin(&mut job)?,
        Command::Trace => commands::trace(&mut job)?,
        Command::Counts => commands::counts(&mut job)?,
    }
    job.manifest.finish(&job.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let argv = match expand_argv(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(core) = e.chain().find_map(|c| c.downcast_ref::<biflab_core::Error>()) {
                eprintln!("error: {}: {e:#}", core.kind());
                ExitCode::from(3)
            } else if e.chain().any(|c| c.is::<UsageError>()) {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}
