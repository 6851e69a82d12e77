//! `spline-couple`: runs the heat benchmark, overhead sweeps, beam load
//! round trips and standalone RBF mappings, writing CSV.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{HeatTransport, KernelArg, Side};
use config::{FileConfig, List};

#[derive(Debug, Parser)]
#[command(
    name = "spline-couple",
    version,
    about = "Spline-based interface coupling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partitioned heat conduction benchmark.
    Heat(HeatArgs),
    /// Communication overhead sweep over refinements and degrees.
    Overhead(OverheadArgs),
    /// Load round trips on the vertical beam interface.
    Beam(BeamArgs),
    /// RBF mapping between two point-cloud files.
    Map(MapArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; standard output if omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Exit with status 1 when an acceptance tolerance is violated.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Debug, Args)]
pub struct HeatArgs {
    #[command(flatten)]
    common: Common,
    /// Spline degree of both subdomains.
    #[arg(long = "p")]
    degree: Option<usize>,
    /// Spans per direction on the Dirichlet side.
    #[arg(long = "rD")]
    spans_dirichlet: Option<usize>,
    /// Spans per direction on the Neumann side.
    #[arg(long = "rN")]
    spans_neumann: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// End time.
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Under-relaxation factor in (0, 1].
    #[arg(long)]
    omega: Option<f64>,
    /// Sub-iteration convergence tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// `inproc` (both sides in this process) or `socket`.
    #[arg(long)]
    transport: Option<HeatTransport>,
    /// `host:port`; the Dirichlet side listens, the Neumann side connects.
    #[arg(long)]
    endpoint: Option<String>,
    /// `dirichlet` or `neumann` in socket mode.
    #[arg(long)]
    side: Option<Side>,
}

#[derive(Debug, Args)]
pub struct OverheadArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated refinements.
    #[arg(long)]
    r: Option<List<u64>>,
    /// Comma-separated degrees.
    #[arg(long = "p")]
    degree: Option<List<u64>>,
    /// Time steps per session.
    #[arg(long)]
    steps: Option<u64>,
    /// `inproc` or `loopback` (TCP).
    #[arg(long)]
    transport: Option<String>,
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "p")]
    degree: Option<usize>,
    #[arg(long = "structure-spans")]
    structure_spans: Option<usize>,
    #[arg(long = "fluid-spans")]
    fluid_spans: Option<usize>,
    /// Fluid vertices along width and height, e.g. `5,9`.
    #[arg(long = "fluid-grid")]
    fluid_grid: Option<List<usize>>,
    /// `tps` or `gaussian:<shape>`.
    #[arg(long)]
    kernel: Option<KernelArg>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    common: Common,
    /// Source cloud with data columns.
    from: PathBuf,
    /// Target cloud, coordinates only.
    to: PathBuf,
    #[arg(long)]
    kernel: Option<KernelArg>,
    /// Spatial dimension; defaults to the column count of the target file.
    #[arg(long)]
    dim: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = match &cli.command {
        Command::Heat(a) => &a.common,
        Command::Overhead(a) => &a.common,
        Command::Beam(a) => &a.common,
        Command::Map(a) => &a.common,
    };
    let cfg = FileConfig::load(common.config.as_deref())?;
    let output: Option<PathBuf> = cfg.resolve_opt(common.output.clone(), "output")?;
    let check = common.check || cfg.get("check")?.unwrap_or(false);
    let output = output.as_deref();
    let violations = match &cli.command {
        Command::Heat(a) => commands::heat(a, &cfg, output)?,
        Command::Overhead(a) => commands::overhead(a, &cfg, output)?,
        Command::Beam(a) => commands::beam(a, &cfg, output)?,
        Command::Map(a) => commands::map(a, &cfg, output)?,
    };
    if check {
        for v in &violations {
            eprintln!("check failed: {v}");
        }
    }
    Ok(!check || violations.is_empty())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
