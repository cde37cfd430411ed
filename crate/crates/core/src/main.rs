use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hfbeam::error::{Error, Result};
use hfbeam::harness::{run, Command, Overrides, RunConfig};
use hfbeam::validation::study::StudyMode;

#[derive(Parser)]
#[command(name = "hfbeam", version, about = "Gaussian beam superposition for the high-frequency wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Launch and propagate the beam families; writes beams.csv.
    Propagate(Flags),
    /// Lagrangian superposition on a grid; writes field.csv.
    Superpose(Flags),
    /// Phase-space level-set superposition (1D); writes eulerian_field.csv and level_set.csv.
    Eulerian(Flags),
    /// Error and residual rates over an eps list; writes conv_report.csv and summary.json.
    Convergence(Flags),
    /// Radial 3D example at the focus; writes caustic_table.csv.
    SphericalExample(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Lagrangian,
    Eulerian,
}

#[derive(Args)]
struct Flags {
    /// JSON configuration file (flat keys; unknown keys are rejected).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    /// Final time T.
    #[arg(long)]
    t: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Beam order (1 or 2).
    #[arg(long)]
    k: Option<u8>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Integrator invariant tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HFBEAM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("HFBEAM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    let (cmd, f) = match cli.command {
        Cmd::Propagate(f) => (Command::Propagate, f),
        Cmd::Superpose(f) => (Command::Superpose, f),
        Cmd::Eulerian(f) => (Command::Eulerian, f),
        Cmd::Convergence(f) => (Command::Convergence, f),
        Cmd::SphericalExample(f) => (Command::SphericalExample, f),
    };
    let base = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        eps: f.eps,
        t: f.t,
        out: f.out,
        k: f.k,
        beta: f.beta,
        preset: f.preset,
        mode: f.mode.map(|m| match m {
            ModeArg::Lagrangian => StudyMode::Lagrangian,
            ModeArg::Eulerian => StudyMode::Eulerian,
        }),
        tol: f.tol,
    };
    let cfg = base.resolve(cmd, &overrides)?;
    let manifest = run(cmd, &cfg)?;
    println!("{}: wrote {} to {}", manifest.command, manifest.outputs.join(", "), cfg.out);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hfbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
