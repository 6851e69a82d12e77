//! Partitioned heat conduction on `[0,1]² ∪ [1,2]x[0,1]`, coupled along
//! `x = 1` with a Dirichlet-Neumann fixed point, verified against a
//! manufactured solution.

mod participants;
mod subdomain;

pub use participants::{strip_basis, strip_block, strip_flux, DirichletSolver, NeumannSolver, StepErrors};
pub use subdomain::{assemble, HeatSubdomain, InterfaceData, Operators, SubdomainKind};

use crate::bus::{run_coupled, CouplingScheme, InProc, Participant, Transcript};
use crate::error::{Error, Result};
use crate::quadrature::span_rule;
use crate::spline::SplineField;
use crate::wire::Role;

/// `u = 1 + x² + αy² + βt`, which solves `u_t = Δu + f` with constant
/// `f = β - 2 - 2α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        Self { alpha: 3.0, beta: 1.3 }
    }
}

impl ManufacturedSolution {
    pub fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        1.0 + x * x + self.alpha * y * y + self.beta * t
    }

    pub fn source(&self) -> f64 {
        self.beta - 2.0 - 2.0 * self.alpha
    }

    /// `∂u/∂x`.
    pub fn flux_x(&self, x: f64) -> f64 {
        2.0 * x
    }
}

/// Below this L2 norm of the exact flux, errors are reported absolutely.
pub const FLUX_FLOOR: f64 = 1e-14;

/// Relative L2 error of an interface flux curve against `exact`, with
/// `p + 1` Gauss points per span of the curve.
pub fn flux_error(flux: &SplineField, exact: impl Fn(f64) -> f64) -> Result<f64> {
    if flux.basis().param_dim() != 1 || flux.dim() != 1 {
        return Err(Error::argument("flux must be a scalar curve"));
    }
    let kv = flux.basis().direction(0);
    let (mut err, mut norm) = (0.0, 0.0);
    for (y, w) in span_rule(kv, kv.degree() + 1) {
        let q = exact(y);
        let e = flux.eval(&[y])?[0] - q;
        err += w * e * e;
        norm += w * q * q;
    }
    let (err, norm) = (err.sqrt(), norm.sqrt());
    Ok(if norm < FLUX_FLOOR { err } else { err / norm })
}

/// Per-step flux errors of a run's applied interface fluxes.
pub fn flux_error_series(fluxes: &[SplineField], exact: impl Fn(f64) -> f64 + Copy) -> Result<Vec<f64>> {
    fluxes.iter().map(|f| flux_error(f, exact)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    pub degree: usize,
    pub spans_dirichlet: usize,
    pub spans_neumann: usize,
    pub dt: f64,
    pub t_end: f64,
    pub solution: ManufacturedSolution,
    pub tolerance: f64,
    pub relaxation: f64,
    pub max_iterations: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            spans_dirichlet: 2,
            spans_neumann: 4,
            dt: 0.1,
            t_end: 1.0,
            solution: ManufacturedSolution::default(),
            // the flux is a derivative of the interface data and amplifies
            // the iteration error, so iterate close to round-off
            tolerance: 1e-14,
            relaxation: 0.5,
            max_iterations: 100,
        }
    }
}

impl BenchmarkConfig {
    /// Number of time steps; `t_end` must be a whole multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::argument("time step and end time must be positive"));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::argument(format!(
                "end time {} is not a multiple of dt {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        let (a, b) = (self.spans_dirichlet, self.spans_neumann);
        if a == 0 || b == 0 {
            return Err(Error::argument("refinements must be positive"));
        }
        if a % b != 0 && b % a != 0 {
            return Err(Error::unsupported(format!(
                "interface refinements {a} and {b} are not nested (neither divides the other)"
            )));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Result<CouplingScheme> {
        Ok(CouplingScheme {
            steps: self.steps()?,
            tolerance: self.tolerance,
            relaxation: self.relaxation,
            max_iterations: self.max_iterations,
        })
    }

    pub fn dirichlet_solver(&self) -> Result<DirichletSolver> {
        self.validate()?;
        DirichletSolver::new(HeatSubdomain::new(
            SubdomainKind::Dirichlet,
            (0.0, 1.0),
            self.degree,
            self.spans_dirichlet,
            self.solution,
            self.dt,
        )?)
    }

    pub fn neumann_solver(&self) -> Result<NeumannSolver> {
        self.validate()?;
        NeumannSolver::new(HeatSubdomain::new(
            SubdomainKind::Neumann,
            (1.0, 2.0),
            self.degree,
            self.spans_neumann,
            self.solution,
            self.dt,
        )?)
    }
}

/// One output row per time step. Columns belonging to a participant that
/// did not run in this process are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatRow {
    pub time: f64,
    pub l2_error_dirichlet: Option<f64>,
    pub l2_error_neumann: Option<f64>,
    pub flux_error: Option<f64>,
    pub iterations: usize,
    /// Cumulative overhead bytes crossing the interface, both directions.
    pub bytes: u64,
}

#[derive(Debug)]
pub struct BenchmarkReport {
    pub rows: Vec<HeatRow>,
    pub leader: Transcript,
    pub follower: Transcript,
    pub dirichlet: DirichletSolver,
    pub neumann: NeumannSolver,
}

impl std::fmt::Debug for DirichletSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSolver")
            .field("history", &self.history)
            .finish_non_exhaustive()
    }
}

impl std::fmt::Debug for NeumannSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannSolver")
            .field("history", &self.history)
            .finish_non_exhaustive()
    }
}

/// Rows for one side of a run, e.g. one process of a socket run.
pub fn side_rows(history: &[StepErrors], transcript: &Transcript, kind: SubdomainKind) -> Vec<HeatRow> {
    history
        .iter()
        .zip(&transcript.steps)
        .map(|(h, s)| HeatRow {
            time: h.time,
            l2_error_dirichlet: (kind == SubdomainKind::Dirichlet).then_some(h.l2_error),
            l2_error_neumann: (kind == SubdomainKind::Neumann).then_some(h.l2_error),
            flux_error: h.flux_error,
            iterations: s.iterations,
            bytes: s.bytes_sent + s.bytes_received,
        })
        .collect()
}

/// Runs both subdomains in-process on two threads.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let scheme = config.scheme()?;
    let mut dirichlet = config.dirichlet_solver()?;
    let mut neumann = config.neumann_solver()?;
    let (ta, tb) = InProc::pair();
    let mut pd = Participant::new("dirichlet", Role::Dirichlet, dirichlet.description(), 1, ta)?;
    let mut pn = Participant::new("neumann", Role::Neumann, neumann.description(), 1, tb)?;
    let (leader, follower) = run_coupled(&scheme, (&mut pd, &mut dirichlet), (&mut pn, &mut neumann))?;
    let rows = dirichlet
        .history
        .iter()
        .zip(&neumann.history)
        .zip(&leader.steps)
        .map(|((d, n), s)| HeatRow {
            time: d.time,
            l2_error_dirichlet: Some(d.l2_error),
            l2_error_neumann: Some(n.l2_error),
            flux_error: n.flux_error,
            iterations: s.iterations,
            bytes: s.bytes_sent + s.bytes_received,
        })
        .collect();
    Ok(BenchmarkReport {
        rows,
        leader,
        follower,
        dirichlet,
        neumann,
    })
}
