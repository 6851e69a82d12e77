//! Galerkin B-spline discretization of `u_t = Δu + f` on one rectangle with
//! backward Euler in time.

use nalgebra::DMatrix;

use super::ManufacturedSolution;
use crate::error::{Error, Result};
use crate::linalg::Factorization;
use crate::quadrature::{span_rule, tensor_rule};
use crate::spline::{l2_project_fn, KnotVector, Sampling, Side, SplineField, TensorBasis};

/// Mass, stiffness and source-load operators of a basis.
#[derive(Debug, Clone)]
pub struct Operators {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub load: DMatrix<f64>,
}

/// Assembles with `p + 1` Gauss points per direction and element; `source`
/// is a constant right-hand side.
pub fn assemble(basis: &TensorBasis, source: f64) -> Result<Operators> {
    let n = basis.len();
    let order = basis.degrees().into_iter().max().unwrap_or(0) + 1;
    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    let mut load = DMatrix::zeros(n, 1);
    for (xi, w) in tensor_rule(basis, order) {
        let vals = basis.eval_nonzero_gradients(&xi)?;
        for (a, va, ga) in &vals {
            load[(*a, 0)] += w * source * va;
            for (b, vb, gb) in &vals {
                mass[(*a, *b)] += w * va * vb;
                stiffness[(*a, *b)] += w * ga.iter().zip(gb).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    Ok(Operators { mass, stiffness, load })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainKind {
    /// Receives the interface temperature.
    Dirichlet,
    /// Receives the interface flux.
    Neumann,
}

/// Data imposed on the interface edge for one solve.
#[derive(Debug, Clone)]
pub enum InterfaceData<'a> {
    /// Temperature trace on the subdomain's own interface knot vector.
    Temperature(&'a SplineField),
    /// Outward normal derivative `∂u/∂x` of the neighbouring Dirichlet
    /// subdomain along the interface, on any knot vector spanning `[0, 1]`.
    Flux(&'a SplineField),
}

/// One rectangular subdomain `[x0, x1] x [0, 1]` with the interface on its
/// edge at `x = 1`.
#[derive(Debug, Clone)]
pub struct HeatSubdomain {
    kind: SubdomainKind,
    basis: TensorBasis,
    solution: ManufacturedSolution,
    dt: f64,
    ops: Operators,
    system: DMatrix<f64>,
    free: Vec<usize>,
    free_lu: Factorization,
    coeffs: DMatrix<f64>,
    pending: Option<DMatrix<f64>>,
    step: usize,
}

impl HeatSubdomain {
    pub fn new(
        kind: SubdomainKind,
        x_range: (f64, f64),
        degree: usize,
        spans: usize,
        solution: ManufacturedSolution,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::argument(format!("time step must be positive, got {dt}")));
        }
        if degree < 2 {
            return Err(Error::argument("heat subdomains need degree 2 or higher"));
        }
        let interface_x = match kind {
            SubdomainKind::Dirichlet => x_range.1,
            SubdomainKind::Neumann => x_range.0,
        };
        if interface_x != 1.0 {
            return Err(Error::argument("the interface edge must sit at x = 1"));
        }
        let basis = TensorBasis::surface(
            KnotVector::uniform(degree, spans, x_range.0, x_range.1)?,
            KnotVector::uniform(degree, spans, 0.0, 1.0)?,
        );
        let ops = assemble(&basis, solution.source())?;
        let system = &ops.mass + dt * &ops.stiffness;
        let [nx, ny] = [basis.direction(0).len(), basis.direction(1).len()];
        let mut fixed = vec![false; basis.len()];
        for i in 0..nx {
            for j in 0..ny {
                let outer_x = match kind {
                    // every edge of the Dirichlet subdomain is prescribed
                    SubdomainKind::Dirichlet => i == 0 || i == nx - 1,
                    SubdomainKind::Neumann => i == nx - 1,
                };
                if outer_x || j == 0 || j == ny - 1 {
                    fixed[basis.flat_index(&[i, j])] = true;
                }
            }
        }
        let free: Vec<usize> = (0..basis.len()).filter(|&k| !fixed[k]).collect();
        let free_lu = Factorization::new(system.select_rows(&free).select_columns(&free))?;
        let initial = l2_project_fn(|x| vec![solution.u(x[0], x[1], 0.0)], 1, &basis, Sampling::Gauss)?;
        Ok(Self {
            kind,
            basis,
            solution,
            dt,
            ops,
            system,
            free,
            free_lu,
            coeffs: initial.coefficients().clone(),
            pending: None,
            step: 0,
        })
    }

    pub fn kind(&self) -> SubdomainKind {
        self.kind
    }

    pub fn solution(&self) -> ManufacturedSolution {
        self.solution
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn field(&self) -> SplineField {
        SplineField::new(self.basis.clone(), self.coeffs.clone()).expect("coefficients match the basis")
    }

    /// Knot vector along the interface.
    pub fn interface_knots(&self) -> &KnotVector {
        self.basis.direction(1)
    }

    fn interface_side(&self) -> Side {
        match self.kind {
            SubdomainKind::Dirichlet => Side::End,
            SubdomainKind::Neumann => Side::Start,
        }
    }

    /// Temperature along the interface of the committed state.
    pub fn interface_trace(&self) -> Result<SplineField> {
        self.field().boundary_trace(0, self.interface_side())
    }

    /// Solves the next time step without committing it and returns the
    /// candidate field.
    pub fn solve_step(&mut self, interface: InterfaceData<'_>) -> Result<SplineField> {
        let t = (self.step + 1) as f64 * self.dt;
        let n = self.basis.len();
        let [nx, ny] = [self.basis.direction(0).len(), self.basis.direction(1).len()];
        let mut values = DMatrix::zeros(n, 1);

        let g = self.solution;
        let x_kv = self.basis.direction(0).clone();
        let y_kv = self.basis.direction(1).clone();
        let (x0, x1) = x_kv.domain();
        let bottom = project_edge(&x_kv, |x| g.u(x, 0.0, t))?;
        let top = project_edge(&x_kv, |x| g.u(x, 1.0, t))?;
        for i in 0..nx {
            values[(self.basis.flat_index(&[i, 0]), 0)] = bottom[i];
            values[(self.basis.flat_index(&[i, ny - 1]), 0)] = top[i];
        }
        let outer_x = if self.kind == SubdomainKind::Dirichlet { x0 } else { x1 };
        let outer_i = if self.kind == SubdomainKind::Dirichlet {
            0
        } else {
            nx - 1
        };
        let outer = project_edge(&y_kv, |y| g.u(outer_x, y, t))?;
        for (j, v) in outer.iter().enumerate() {
            values[(self.basis.flat_index(&[outer_i, j]), 0)] = *v;
        }

        let mut rhs = &self.ops.mass * &self.coeffs + self.dt * &self.ops.load;
        match (self.kind, interface) {
            (SubdomainKind::Dirichlet, InterfaceData::Temperature(trace)) => {
                if trace.basis().directions() != [y_kv.clone()] || trace.dim() != 1 {
                    return Err(Error::argument(
                        "interface temperature is not on the interface knot vector",
                    ));
                }
                for j in 0..ny {
                    values[(self.basis.flat_index(&[nx - 1, j]), 0)] = trace.coefficients()[(j, 0)];
                }
            }
            (SubdomainKind::Neumann, InterfaceData::Flux(flux)) => {
                let load = neumann_load(&y_kv, flux)?;
                for j in 0..ny {
                    rhs[(self.basis.flat_index(&[0, j]), 0)] += self.dt * load[j];
                }
            }
            _ => return Err(Error::argument("interface data does not match the subdomain kind")),
        }

        // eliminate prescribed coefficients
        let coupled = &self.system * &values;
        let b = DMatrix::from_fn(self.free.len(), 1, |r, _| {
            rhs[(self.free[r], 0)] - coupled[(self.free[r], 0)]
        });
        let sol = self.free_lu.solve(&b)?;
        let mut next = values;
        for (r, &k) in self.free.iter().enumerate() {
            next[(k, 0)] = sol[(r, 0)];
        }
        let field = SplineField::new(self.basis.clone(), next.clone())?;
        self.pending = Some(next);
        Ok(field)
    }

    /// Accepts the last solve as the new state.
    pub fn commit(&mut self) -> Result<()> {
        let next = self
            .pending
            .take()
            .ok_or_else(|| Error::argument("no solved step to commit"))?;
        self.coeffs = next;
        self.step += 1;
        Ok(())
    }

    /// `‖u_h - u_exact‖` in L2 over the subdomain at the committed time.
    pub fn l2_error(&self) -> Result<f64> {
        let t = self.time();
        let field = self.field();
        let order = self.basis.degrees().into_iter().max().unwrap_or(0) + 3;
        let mut sum = 0.0;
        for (x, w) in tensor_rule(&self.basis, order) {
            let e = field.eval(&x)?[0] - self.solution.u(x[0], x[1], t);
            sum += w * e * e;
        }
        Ok(sum.sqrt())
    }
}

fn project_edge(kv: &KnotVector, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let field = l2_project_fn(|s| vec![f(s[0])], 1, &TensorBasis::curve(kv.clone()), Sampling::Gauss)?;
    Ok(field.coefficients().iter().copied().collect())
}

/// `∫_Γ -q N_j dy` for the interface basis: the Neumann subdomain's outward
/// normal is `-x`, so its normal derivative is the negated flux.
fn neumann_load(y_kv: &KnotVector, flux: &SplineField) -> Result<Vec<f64>> {
    let fkv = flux.basis().direction(0);
    if flux.basis().param_dim() != 1 || flux.dim() != 1 || fkv.domain() != y_kv.domain() {
        return Err(Error::argument(
            "interface flux must be a scalar curve on the interface",
        ));
    }
    // integrate on the finer of the two nested span structures
    let quad_kv = if fkv.is_nested_in(y_kv) || fkv.span_count() <= y_kv.span_count() {
        y_kv
    } else {
        fkv
    };
    let order = y_kv.degree().max(fkv.degree()) + 1;
    let mut load = vec![0.0; y_kv.len()];
    for (y, w) in span_rule(quad_kv, order) {
        let q = flux.eval(&[y])?[0];
        let b = y_kv.eval_basis(y)?;
        for (k, v) in b.values.iter().enumerate() {
            load[b.first + k] -= w * q * v;
        }
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_identities() {
        let basis = TensorBasis::surface(
            KnotVector::uniform(2, 3, 0.0, 1.0).unwrap(),
            KnotVector::uniform(2, 3, 0.0, 1.0).unwrap(),
        );
        let ops = assemble(&basis, 1.0).unwrap();
        let ones = DMatrix::from_element(basis.len(), 1, 1.0);
        assert!((&ops.stiffness * &ones).amax() < 1e-12);
        assert!(((ones.transpose() * &ops.mass * &ones)[(0, 0)] - 1.0).abs() < 1e-12);
        // u = x has Greville-abscissa coefficients
        let g = basis.greville_points();
        let ux = DMatrix::from_fn(basis.len(), 1, |i, _| g[i][0]);
        assert!(((ux.transpose() * &ops.stiffness * &ux)[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((&ops.mass - ops.mass.transpose()).amax() < 1e-15);
    }

    #[test]
    fn rejects_bad_steps() {
        let s = ManufacturedSolution::default();
        assert!(HeatSubdomain::new(SubdomainKind::Dirichlet, (0.0, 1.0), 2, 2, s, 0.0).is_err());
        assert!(HeatSubdomain::new(SubdomainKind::Neumann, (0.0, 1.0), 2, 2, s, 0.1).is_err());
    }

    #[test]
    fn exact_interface_data_reproduce_the_solution() {
        let s = ManufacturedSolution::default();
        let mut d = HeatSubdomain::new(SubdomainKind::Dirichlet, (0.0, 1.0), 2, 2, s, 0.1).unwrap();
        let trace = l2_project_fn(
            |y| vec![s.u(1.0, y[0], 0.1)],
            1,
            &TensorBasis::curve(d.interface_knots().clone()),
            Sampling::Gauss,
        )
        .unwrap();
        d.solve_step(InterfaceData::Temperature(&trace)).unwrap();
        d.commit().unwrap();
        assert!(d.l2_error().unwrap() < 1e-10);

        let mut n = HeatSubdomain::new(SubdomainKind::Neumann, (1.0, 2.0), 2, 4, s, 0.1).unwrap();
        let flux = SplineField::constant(TensorBasis::uniform(1, 2, 2).unwrap(), &[2.0]).unwrap();
        n.solve_step(InterfaceData::Flux(&flux)).unwrap();
        n.commit().unwrap();
        assert!(n.l2_error().unwrap() < 1e-10);
    }

    #[test]
    fn stationary_case_stays_put() {
        let s = ManufacturedSolution { alpha: 0.0, beta: 0.0 };
        let mut d = HeatSubdomain::new(SubdomainKind::Dirichlet, (0.0, 1.0), 2, 2, s, 0.1).unwrap();
        let start = d.field();
        for _ in 0..3 {
            let trace = d.interface_trace().unwrap();
            d.solve_step(InterfaceData::Temperature(&trace)).unwrap();
            d.commit().unwrap();
        }
        assert!((d.field().coefficients() - start.coefficients()).amax() < 1e-12);
    }
}
