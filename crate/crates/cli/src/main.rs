//! `adawave`: domain-adapted lifting wavelets and WSPM detection from the
//! command line.
//!
//! Exit status is 0 on success, 2 for bad arguments and 1 for everything
//! else. Each successful run ends with one `summary key=value ...` line.

mod commands;
mod config;
mod experiment;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use adawave::Error;
use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::experiment::Experiment;
use crate::util::Summary;

#[derive(Parser, Debug)]
#[command(name = "adawave", version, about, args_override_self = true)]
struct Cli {
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file of flags; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a random multiresolution hierarchy on a mask and save it.
    BuildHierarchy(BuildHierarchyArgs),
    /// Forward transform of a volume into a coefficient pyramid.
    Fwd(FwdArgs),
    /// Inverse transform of a pyramid back to a volume.
    Inv(InvArgs),
    /// Render one primal or dual basis function.
    Synthesize(SynthesizeArgs),
    /// Hard-threshold denoising, optionally averaged over hierarchies.
    Denoise(DenoiseArgs),
    /// Check the biorthogonality identities of every level.
    Verify(VerifyArgs),
    /// Wavelet-domain activation detection on a 4D series.
    Wspm(WspmArgs),
    /// Synthetic experiments that write CSV for plotting.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Compare two VXL1 files value by value.
    DiffVol(DiffVolArgs),
    /// Write a mask of concentric annuli.
    RingMask(RingMaskArgs),
    /// Write a piecewise-smooth test image on a planar mask.
    Phantom(PhantomArgs),
    /// Write a simulated block-design series with its design and contrast.
    SimulateFmri(SimulateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildHierarchy(_) => "build-hierarchy",
            Command::Fwd(_) => "fwd",
            Command::Inv(_) => "inv",
            Command::Synthesize(_) => "synthesize",
            Command::Denoise(_) => "denoise",
            Command::Verify(_) => "verify",
            Command::Wspm(_) => "wspm",
            Command::Experiment(e) => match e {
                Experiment::Roc(_) => "experiment-roc",
                Experiment::Sparsity(_) => "experiment-sparsity",
                Experiment::Averaging(_) => "experiment-averaging",
                Experiment::Invariance(_) => "experiment-invariance",
            },
            Command::DiffVol(_) => "diff-vol",
            Command::RingMask(_) => "ring-mask",
            Command::Phantom(_) => "phantom",
            Command::SimulateFmri(_) => "simulate-fmri",
        }
    }
}

fn run(command: &Command, s: &mut Summary) -> Result<u8> {
    match command {
        Command::BuildHierarchy(a) => build_hierarchy_cmd(a, s),
        Command::Fwd(a) => fwd(a, s),
        Command::Inv(a) => inv(a, s),
        Command::Synthesize(a) => synthesize(a, s),
        Command::Denoise(a) => denoise(a, s),
        Command::Verify(a) => verify(a, s),
        Command::Wspm(a) => wspm(a, s),
        Command::Experiment(e) => experiment::run(e, s),
        Command::DiffVol(a) => diff_vol(a, s),
        Command::RingMask(a) => ring_mask(a, s),
        Command::Phantom(a) => phantom(a, s),
        Command::SimulateFmri(a) => simulate(a, s),
    }
}

/// 2 when the library rejected an argument, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let usage = e
        .chain()
        .filter_map(|c| c.downcast_ref::<Error>())
        .any(|c| matches!(c, Error::Argument(_) | Error::Domain(_)));
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let args = match config::splice(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut summary = Summary::new(cli.command.name());
    if let Some(c) = &cli.config {
        summary.add("config", c.display());
    }
    match run(&cli.command, &mut summary) {
        Ok(code) => {
            println!("{}", summary.line());
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn repeated_flags_take_the_last_value() {
        let cli = Cli::try_parse_from(["adawave", "verify", "--mask", "m.vxl", "--levels", "2", "--levels", "4"]).unwrap();
        match cli.command {
            Command::Verify(v) => assert_eq!(v.hier.levels, 4),
            _ => unreachable!(),
        }
        let cli = Cli::try_parse_from(["adawave", "experiment", "roc", "--out", "a", "--trials", "1", "--trials", "3"]).unwrap();
        match cli.command {
            Command::Experiment(Experiment::Roc(r)) => assert_eq!(r.trials, 3),
            _ => unreachable!(),
        }
    }

    #[test]
    fn argument_errors_map_to_two() {
        let e: anyhow::Error = Error::Argument("x".into()).into();
        assert_eq!(exit_code(&e.context("while loading")), 2);
        let e: anyhow::Error = Error::Parse("x".into()).into();
        assert_eq!(exit_code(&e), 1);
    }
}
