use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twophase::harness::{self, Exit, Overrides, Preset, RunConfig};

/// Relaxation-limit experiments for isothermal two-phase flow.
///
/// Exit status: 0 pass, 1 error, 2 a check failed, 3 inconclusive pre-check.
#[derive(Parser)]
#[command(name = "twophase", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the relaxation solver once and write fields, series and a report.
    Run,
    /// Measure the convergence rate over `sweep.eps_list`.
    Sweep,
    /// Check the subcharacteristic condition, entropy convexity and ρ_eq monotonicity.
    ValidateEos,
    /// `run` with the riemann preset.
    Riemann,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat dotted-key TOML). Defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "TWOPHASE_OUT_DIR")]
    out: Option<PathBuf>,
    /// Override solver.eps.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Override grid.n_cells.
    #[arg(long, global = true)]
    cells: Option<usize>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

fn load(common: &Common, preset: Option<Preset>) -> Result<RunConfig, harness::HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => harness::load_config(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        eps: common.eps,
        cells: common.cells,
        out: common.out.clone(),
        preset,
    })?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Exit::Error.code() as u8
            } else {
                0
            });
        }
    };
    let preset = matches!(cli.command, Command::Riemann).then_some(Preset::Riemann);
    let result = load(&cli.common, preset).and_then(|cfg| match cli.command {
        Command::Run | Command::Riemann => harness::cmd_run(&cfg),
        Command::Sweep => harness::cmd_sweep(&cfg),
        Command::ValidateEos => harness::cmd_validate_eos(&cfg),
    });
    match result {
        Ok(outcome) => {
            if outcome.exit == Exit::Error {
                for line in &outcome.summary {
                    eprintln!("{line}");
                }
            } else if !cli.common.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
            }
            if !cli.common.quiet {
                println!("manifest: {}", outcome.manifest.display());
            }
            ExitCode::from(outcome.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::Error.code() as u8)
        }
    }
}
