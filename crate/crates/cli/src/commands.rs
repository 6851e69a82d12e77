use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use spline_coupling::beam::{run_all, BeamSetup};
use spline_coupling::bus::{run_overhead_session, run_side, Participant, Socket, TransportKind};
use spline_coupling::heat::{run_benchmark, side_rows, BenchmarkConfig, HeatRow, ManufacturedSolution, SubdomainKind};
use spline_coupling::rbf::{check_consistency, Kernel, MappingMatrix, VertexCloud};
use spline_coupling::wire::{knot_padding, Mode, OverheadParams, OverheadReport, Role};

use crate::config::{FileConfig, List};
use crate::{BeamArgs, HeatArgs, MapArgs, OverheadArgs};

/// Tolerance violations found in `--check` mode.
pub type Violations = Vec<String>;

const HEAT_L2_TOL: f64 = 1e-10;
const HEAT_FLUX_TOL: f64 = 1e-12;
const BEAM_TOL: f64 = 1e-12;
const MAP_ROW_SUM_TOL: f64 = 1e-9;
const CONNECT_TIMEOUT: Duration = Duration::from_secs(30);

/// `tps` (alias `thin-plate`) or `gaussian:<shape>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelArg(pub Kernel);

impl FromStr for KernelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "tps" || s == "thin-plate" => Ok(KernelArg(Kernel::ThinPlate)),
            Some(("gaussian", shape)) => {
                let shape: f64 = shape.parse().map_err(|_| format!("bad Gaussian shape {shape:?}"))?;
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err("Gaussian shape must be positive".into());
                }
                Ok(KernelArg(Kernel::Gaussian { shape }))
            }
            _ => Err(format!("unknown kernel {s:?}; use tps or gaussian:<shape>")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Dirichlet,
    Neumann,
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dirichlet" => Ok(Side::Dirichlet),
            "neumann" => Ok(Side::Neumann),
            _ => Err(format!("unknown side {s:?}; use dirichlet or neumann")),
        }
    }
}

/// How heat participants are connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatTransport {
    InProc,
    Socket,
}

impl FromStr for HeatTransport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(HeatTransport::InProc),
            "socket" => Ok(HeatTransport::Socket),
            _ => Err(format!("unknown transport {s:?}; use inproc or socket")),
        }
    }
}

pub struct SweepTransport(pub TransportKind);

impl FromStr for SweepTransport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(SweepTransport(TransportKind::InProc)),
            "loopback" => Ok(SweepTransport(TransportKind::Loopback)),
            _ => Err(format!("unknown transport {s:?}; use inproc or loopback")),
        }
    }
}

fn csv_writer(output: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match output {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// Shortest round-trip scientific form; empty when absent.
fn sci(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Time stamps without accumulated round-off, e.g. `0.3` for `3 * 0.1`.
fn time_stamp(t: f64) -> String {
    ((t * 1e12).round() / 1e12).to_string()
}

pub fn heat(args: &HeatArgs, cfg: &FileConfig, output: Option<&Path>) -> Result<Violations> {
    let defaults = BenchmarkConfig::default();
    let config = BenchmarkConfig {
        degree: cfg.resolve(args.degree, "p", defaults.degree)?,
        spans_dirichlet: cfg.resolve(args.spans_dirichlet, "rD", defaults.spans_dirichlet)?,
        spans_neumann: cfg.resolve(args.spans_neumann, "rN", defaults.spans_neumann)?,
        dt: cfg.resolve(args.dt, "dt", defaults.dt)?,
        t_end: cfg.resolve(args.t_end, "T", defaults.t_end)?,
        solution: ManufacturedSolution {
            alpha: cfg.resolve(args.alpha, "alpha", defaults.solution.alpha)?,
            beta: cfg.resolve(args.beta, "beta", defaults.solution.beta)?,
        },
        tolerance: cfg.resolve(args.tolerance, "tolerance", defaults.tolerance)?,
        relaxation: cfg.resolve(args.omega, "omega", defaults.relaxation)?,
        max_iterations: cfg.resolve(args.max_iter, "max-iter", defaults.max_iterations)?,
    };
    ensure!(config.degree >= 2, "degree must be at least 2");
    ensure!(config.dt > 0.0 && config.dt.is_finite(), "dt must be positive");
    ensure!(
        config.relaxation > 0.0 && config.relaxation <= 1.0,
        "omega must lie in (0, 1]"
    );
    ensure!(config.tolerance > 0.0, "tolerance must be positive");
    config.validate()?;
    config.steps()?;

    let transport = cfg.resolve(args.transport, "transport", HeatTransport::InProc)?;
    let rows = match transport {
        HeatTransport::InProc => run_benchmark(&config)?.rows,
        HeatTransport::Socket => {
            let endpoint: String = cfg
                .resolve_opt(args.endpoint.clone(), "endpoint")?
                .context("socket transport needs --endpoint host:port")?;
            let side: Side = cfg
                .resolve_opt(args.side, "side")?
                .context("socket transport needs --side")?;
            heat_socket(&config, &endpoint, side)?
        }
    };

    let mut out = csv_writer(output)?;
    out.write_record([
        "time",
        "l2_error_dirichlet",
        "l2_error_neumann",
        "flux_error",
        "iterations",
        "bytes",
    ])?;
    let mut violations = Vec::new();
    for row in &rows {
        out.write_record([
            time_stamp(row.time),
            sci(row.l2_error_dirichlet),
            sci(row.l2_error_neumann),
            sci(row.flux_error),
            row.iterations.to_string(),
            row.bytes.to_string(),
        ])?;
        for (name, v, tol) in [
            ("Dirichlet L2 error", row.l2_error_dirichlet, HEAT_L2_TOL),
            ("Neumann L2 error", row.l2_error_neumann, HEAT_L2_TOL),
            ("flux error", row.flux_error, HEAT_FLUX_TOL),
        ] {
            if let Some(v) = v.filter(|v| v.is_nan() || *v > tol) {
                violations.push(format!("t = {}: {name} {v:e} exceeds {tol:e}", time_stamp(row.time)));
            }
        }
    }
    out.flush()?;
    Ok(violations)
}

/// One side of a heat run over TCP; the Dirichlet side listens.
fn heat_socket(config: &BenchmarkConfig, endpoint: &str, side: Side) -> Result<Vec<HeatRow>> {
    let scheme = config.scheme()?;
    match side {
        Side::Dirichlet => {
            let mut solver = config.dirichlet_solver()?;
            let socket = Socket::listen(endpoint).with_context(|| format!("listening on {endpoint}"))?;
            let mut p = Participant::new("dirichlet", Role::Dirichlet, solver.description(), 1, socket)?;
            let transcript = run_side(&mut p, &mut solver, &scheme)?;
            Ok(side_rows(&solver.history, &transcript, SubdomainKind::Dirichlet))
        }
        Side::Neumann => {
            let mut solver = config.neumann_solver()?;
            let socket =
                Socket::connect(endpoint, CONNECT_TIMEOUT).with_context(|| format!("connecting to {endpoint}"))?;
            let mut p = Participant::new("neumann", Role::Neumann, solver.description(), 1, socket)?;
            let transcript = run_side(&mut p, &mut solver, &scheme)?;
            Ok(side_rows(&solver.history, &transcript, SubdomainKind::Neumann))
        }
    }
}

pub fn overhead(args: &OverheadArgs, cfg: &FileConfig, output: Option<&Path>) -> Result<Violations> {
    let refinements = cfg
        .resolve(args.r.clone(), "r", List(vec![2, 4, 8, 16, 32, 64, 128]))?
        .0;
    let degrees = cfg.resolve(args.degree.clone(), "p", List(vec![2, 3, 4, 5]))?.0;
    let steps = cfg.resolve(args.steps, "steps", 1u64)?;
    let transport = cfg.resolve(
        args.transport.as_deref().map(str::to_string),
        "transport",
        "inproc".into(),
    )?;
    let SweepTransport(kind) = transport.parse().map_err(anyhow::Error::msg)?;
    ensure!(steps > 0, "steps must be positive");
    ensure!(
        refinements.iter().chain(&degrees).all(|&v| v > 0),
        "refinements and degrees must be positive"
    );

    let mut out = csv_writer(output)?;
    out.write_record([
        "mode",
        "r",
        "p",
        "steps",
        "measured_bytes",
        "measured_kib",
        "theoretical_bytes",
        "theoretical_kib",
        "nan_entries",
        "discrepancy_bytes",
        "discrepancy_kib",
        "step_time_s",
    ])?;
    let mut violations = Vec::new();
    for mode in [Mode::Vertex, Mode::Spline] {
        for &p in &degrees {
            for &r in &refinements {
                let params = OverheadParams {
                    steps,
                    ..OverheadParams::surface_grid(r, p)
                };
                let cell = run_overhead_session(mode, &params, kind)?;
                let rep = cell.report;
                let name = match mode {
                    Mode::Vertex => "vertex",
                    Mode::Spline => "spline",
                };
                out.write_record([
                    name.to_string(),
                    r.to_string(),
                    p.to_string(),
                    steps.to_string(),
                    rep.measured_bytes.to_string(),
                    OverheadReport::kib(rep.measured_bytes).to_string(),
                    rep.theoretical_bytes.to_string(),
                    OverheadReport::kib(rep.theoretical_bytes).to_string(),
                    rep.nan_entries.to_string(),
                    rep.discrepancy_bytes.to_string(),
                    (rep.discrepancy_bytes as f64 / 1024.0).to_string(),
                    cell.step_time.as_secs_f64().to_string(),
                ])?;
                let expected_nans = match mode {
                    Mode::Vertex => 0,
                    Mode::Spline => knot_padding(&params),
                };
                if rep.nan_entries != expected_nans || rep.discrepancy_bytes != 8 * expected_nans as i64 {
                    violations.push(format!(
                        "{name} (r={r}, p={p}): {} B measured against {} B predicted with {} NaN entries",
                        rep.measured_bytes, rep.theoretical_bytes, rep.nan_entries
                    ));
                }
            }
        }
    }
    out.flush()?;
    Ok(violations)
}

pub fn beam(args: &BeamArgs, cfg: &FileConfig, output: Option<&Path>) -> Result<Violations> {
    let d = BeamSetup::default();
    let grid = cfg
        .resolve(
            args.fluid_grid.clone(),
            "fluid-grid",
            List(vec![d.fluid_grid.0, d.fluid_grid.1]),
        )?
        .0;
    let [gx, gy] = grid[..] else {
        bail!("fluid-grid takes two counts, e.g. 5,9");
    };
    let setup = BeamSetup {
        degree: cfg.resolve(args.degree, "p", d.degree)?,
        structure_spans: cfg.resolve(args.structure_spans, "structure-spans", d.structure_spans)?,
        fluid_spans: cfg.resolve(args.fluid_spans, "fluid-spans", d.fluid_spans)?,
        fluid_grid: (gx, gy),
        kernel: cfg.resolve(args.kernel, "kernel", KernelArg(d.kernel))?.0,
    };
    ensure!(setup.degree >= 1, "degree must be positive");
    ensure!(
        setup.structure_spans > 0 && setup.fluid_spans > 0,
        "span counts must be positive"
    );
    ensure!(
        gx >= 2 && gy >= 2,
        "fluid grid needs at least two vertices per direction"
    );

    let mut out = csv_writer(output)?;
    out.write_record(["strategy", "load", "forward_error", "round_trip_error"])?;
    let mut violations = Vec::new();
    for r in run_all(&setup)? {
        out.write_record([
            r.strategy.name().to_string(),
            r.load.name().to_string(),
            sci(Some(r.forward_error)),
            sci(Some(r.round_trip_error)),
        ])?;
        let worst = r.forward_error.max(r.round_trip_error);
        if worst.is_nan() || worst > BEAM_TOL {
            violations.push(format!(
                "{} with {} load: error {worst:e} exceeds {BEAM_TOL:e}",
                r.strategy.name(),
                r.load.name()
            ));
        }
    }
    out.flush()?;
    Ok(violations)
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Column count of the first data line of a cloud file.
fn columns(text: &str) -> usize {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map_or(0, |l| l.split_whitespace().count())
}

pub fn map(args: &MapArgs, cfg: &FileConfig, output: Option<&Path>) -> Result<Violations> {
    let kernel = cfg.resolve(args.kernel, "kernel", KernelArg(Kernel::ThinPlate))?.0;
    let to_text = read(&args.to)?;
    let dim = cfg.resolve(args.dim, "dim", columns(&to_text))?;
    ensure!(dim > 0, "target cloud {} has no vertices", args.to.display());
    let from =
        VertexCloud::from_text(&read(&args.from)?, dim).with_context(|| format!("in {}", args.from.display()))?;
    let to = VertexCloud::from_text(&to_text, dim).with_context(|| format!("in {}", args.to.display()))?;
    let data = from.data().with_context(|| {
        format!(
            "{} carries no data columns after {dim} coordinates",
            args.from.display()
        )
    })?;
    let m = MappingMatrix::build(&from, &to, kernel)?;
    let mapped = to.attach(m.apply(data)?)?;
    let deviation = check_consistency(&m);

    let text = mapped.to_text();
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    eprintln!("row-sum deviation: {deviation:e}");
    let mut violations = Vec::new();
    if deviation.is_nan() || deviation > MAP_ROW_SUM_TOL {
        violations.push(format!("row-sum deviation {deviation:e} exceeds {MAP_ROW_SUM_TOL:e}"));
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_names() {
        assert_eq!("tps".parse::<KernelArg>().unwrap().0, Kernel::ThinPlate);
        assert_eq!(
            "gaussian:2.5".parse::<KernelArg>().unwrap().0,
            Kernel::Gaussian { shape: 2.5 }
        );
        assert!("gaussian:-1".parse::<KernelArg>().is_err());
        assert!("multiquadric".parse::<KernelArg>().is_err());
    }

    #[test]
    fn column_count_skips_comments() {
        assert_eq!(columns("# x y\n\n 0 1 2\n"), 3);
        assert_eq!(columns("# only comments\n"), 0);
    }
}
