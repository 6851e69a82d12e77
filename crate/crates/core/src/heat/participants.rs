//! The two heat subdomains as coupling participants.
//!
//! The Dirichlet side sends a two-row "strip" field: a spline of degree 1
//! across the interface whose rows are the coefficient line next to the
//! interface and the interface line itself, placed so that the strip has
//! exactly the sender's trace and normal derivative on the interface. The
//! Neumann side differentiates it to obtain the flux and replies with its
//! own interface temperature.

use nalgebra::DMatrix;

use super::flux_error;
use super::subdomain::{HeatSubdomain, InterfaceData, SubdomainKind};
use crate::bus::{InterfaceDescription, Solver};
use crate::coupling::{build_space_transform, transfer_control_data, SplineSpaceTransform};
use crate::error::{Error, Result};
use crate::spline::{KnotVector, Side, SplineField, TensorBasis};

/// Degree-1-by-`p` basis on `[a, 1] x [0, 1]` carrying a field's trace and
/// normal derivative at `x = 1`.
pub fn strip_basis(sub: &HeatSubdomain) -> Result<TensorBasis> {
    let kv = sub.basis().direction(0);
    let ders = kv.eval_basis_derivatives(1.0, 1)?;
    let slope = *ders.rows[1].last().expect("derivative window is nonempty");
    let width = 1.0 / slope;
    let across = KnotVector::new(vec![1.0 - width, 1.0 - width, 1.0, 1.0], 1)?;
    Ok(TensorBasis::surface(across, sub.interface_knots().clone()))
}

/// Coefficient block of the strip for the field `f` of a Dirichlet subdomain.
pub fn strip_block(f: &SplineField) -> DMatrix<f64> {
    let basis = f.basis();
    let nx = basis.direction(0).len();
    let ny = basis.direction(1).len();
    DMatrix::from_fn(2 * ny, f.dim(), |r, k| {
        let (i, j) = (r / ny, r % ny);
        f.coefficients()[(basis.flat_index(&[nx - 2 + i, j]), k)]
    })
}

/// Normal derivative along the interface carried by a strip field.
pub fn strip_flux(strip: &SplineField) -> Result<SplineField> {
    strip.boundary_derivative(0, Side::End)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepErrors {
    pub time: f64,
    pub l2_error: f64,
    /// Relative flux error of the applied interface flux; Neumann side only.
    pub flux_error: Option<f64>,
}

pub struct DirichletSolver {
    sub: HeatSubdomain,
    strip: TensorBasis,
    /// Peer trace coefficients to the iteration space: the coarser of the
    /// two interface spaces, so every datum component affects the reply.
    to_datum: Option<SplineSpaceTransform>,
    /// Iteration space to own interface coefficients.
    to_own: Option<SplineSpaceTransform>,
    pub history: Vec<StepErrors>,
}

impl DirichletSolver {
    pub fn new(sub: HeatSubdomain) -> Result<Self> {
        if sub.kind() != SubdomainKind::Dirichlet {
            return Err(Error::argument("expected the Dirichlet subdomain"));
        }
        let strip = strip_basis(&sub)?;
        Ok(Self {
            sub,
            strip,
            to_datum: None,
            to_own: None,
            history: Vec::new(),
        })
    }

    pub fn description(&self) -> InterfaceDescription {
        InterfaceDescription::Spline(self.strip.clone())
    }

    pub fn subdomain(&self) -> &HeatSubdomain {
        &self.sub
    }
}

impl Solver for DirichletSolver {
    fn connect(&mut self, _: &InterfaceDescription, remote: &InterfaceDescription) -> Result<()> {
        let InterfaceDescription::Spline(peer) = remote else {
            return Err(Error::unsupported(
                "the Neumann side must describe its interface as a spline",
            ));
        };
        let own = TensorBasis::curve(self.sub.interface_knots().clone());
        let coarse = if own.len() <= peer.len() { &own } else { peer };
        self.to_datum = Some(build_space_transform(peer, coarse)?);
        self.to_own = Some(build_space_transform(coarse, &own)?);
        Ok(())
    }

    fn initial_datum(&self) -> DMatrix<f64> {
        let trace = self.sub.interface_trace().expect("surface field has a trace");
        let t = self.to_own.as_ref().expect("connected before the first step");
        let back = build_space_transform(t.target(), t.source()).expect("nested interface spaces");
        transfer_control_data(&back, trace.coefficients()).expect("transform matches the interface")
    }

    fn datum_from_reply(&self, reply: DMatrix<f64>) -> Result<DMatrix<f64>> {
        let t = self
            .to_datum
            .as_ref()
            .ok_or_else(|| Error::protocol("reply before connect"))?;
        transfer_control_data(t, &reply)
    }

    /// The interface endpoints lie on the outer boundary, where both sides
    /// prescribe the same known data; open knot vectors interpolate there.
    fn constrain_datum(&self, step: usize, mut datum: DMatrix<f64>) -> DMatrix<f64> {
        let t = (step + 1) as f64 * self.sub.dt();
        let g = self.sub.solution();
        let last = datum.nrows() - 1;
        datum[(0, 0)] = g.u(1.0, 0.0, t);
        datum[(last, 0)] = g.u(1.0, 1.0, t);
        datum
    }

    fn solve(&mut self, _: usize, received: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let t = self
            .to_own
            .as_ref()
            .ok_or_else(|| Error::protocol("solve before connect"))?;
        let trace = SplineField::new(t.target().clone(), transfer_control_data(t, received)?)?;
        let field = self.sub.solve_step(InterfaceData::Temperature(&trace))?;
        Ok(strip_block(&field))
    }

    fn complete_step(&mut self, _: usize) -> Result<()> {
        self.sub.commit()?;
        self.history.push(StepErrors {
            time: self.sub.time(),
            l2_error: self.sub.l2_error()?,
            flux_error: None,
        });
        Ok(())
    }
}

pub struct NeumannSolver {
    sub: HeatSubdomain,
    strip: Option<TensorBasis>,
    pending_flux: Option<SplineField>,
    /// Flux applied in each committed step.
    pub fluxes: Vec<SplineField>,
    pub history: Vec<StepErrors>,
}

impl NeumannSolver {
    pub fn new(sub: HeatSubdomain) -> Result<Self> {
        if sub.kind() != SubdomainKind::Neumann {
            return Err(Error::argument("expected the Neumann subdomain"));
        }
        Ok(Self {
            sub,
            strip: None,
            pending_flux: None,
            fluxes: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn description(&self) -> InterfaceDescription {
        InterfaceDescription::Spline(TensorBasis::curve(self.sub.interface_knots().clone()))
    }

    pub fn subdomain(&self) -> &HeatSubdomain {
        &self.sub
    }
}

impl Solver for NeumannSolver {
    fn connect(&mut self, _: &InterfaceDescription, remote: &InterfaceDescription) -> Result<()> {
        match remote {
            InterfaceDescription::Spline(b) if b.param_dim() == 2 && b.direction(0).degree() == 1 => {
                let (ours, theirs) = (self.sub.interface_knots(), b.direction(1));
                if !(ours.is_nested_in(theirs) || theirs.is_nested_in(ours)) {
                    return Err(Error::unsupported("interface knot vectors are not nested"));
                }
                self.strip = Some(b.clone());
                Ok(())
            }
            _ => Err(Error::unsupported("the Dirichlet side must send a strip spline")),
        }
    }

    fn initial_datum(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.sub.interface_knots().len(), 1)
    }

    fn solve(&mut self, _: usize, received: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let basis = self
            .strip
            .clone()
            .ok_or_else(|| Error::protocol("solve before connect"))?;
        let flux = strip_flux(&SplineField::new(basis, received.clone())?)?;
        let field = self.sub.solve_step(InterfaceData::Flux(&flux))?;
        self.pending_flux = Some(flux);
        Ok(field.boundary_trace(0, Side::Start)?.coefficients().clone())
    }

    fn complete_step(&mut self, _: usize) -> Result<()> {
        self.sub.commit()?;
        let flux = self
            .pending_flux
            .take()
            .ok_or_else(|| Error::protocol("step completed without a flux"))?;
        let q = self.sub.solution().flux_x(1.0);
        self.history.push(StepErrors {
            time: self.sub.time(),
            l2_error: self.sub.l2_error()?,
            flux_error: Some(flux_error(&flux, |_| q)?),
        });
        self.fluxes.push(flux);
        Ok(())
    }
}
