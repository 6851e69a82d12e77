//! Load transfer on a flat beam interface patch, for checking that the
//! three coupling strategies carry loads from a fluid-like side to a
//! structure-like side and back without loss.
//!
//! The patch is `[0, W] x [0, H]` in in-plane coordinates `(x, y)`, with
//! parameters `(s, ξ) = (x / W, y / H)`. Loads are 3-vectors.

use nalgebra::DMatrix;

use crate::coupling::{
    build_space_transform, sample_spline_displacement, transfer_control_data, transfer_spline_vertex_force,
    transfer_vertex_vertex, Queries,
};
use crate::error::{Error, Result};
use crate::quadrature::tensor_rule;
use crate::rbf::{Kernel, MappingMatrix, VertexCloud};
use crate::spline::{l2_project_fn, l2_project_samples, Sampling, SplineField, TensorBasis};

pub const WIDTH: f64 = 0.5;
pub const HEIGHT: f64 = 1.0;
pub const CONSTANT_LOAD: f64 = 5e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load {
    /// `5e3 e_z`.
    Constant,
    /// `-ξ e_z`, growing along the height.
    Linear,
    Zero,
}

impl Load {
    pub fn at(&self, x: f64, y: f64) -> [f64; 3] {
        let _ = x;
        match self {
            Load::Constant => [0.0, 0.0, CONSTANT_LOAD],
            Load::Linear => [0.0, 0.0, -y / HEIGHT],
            Load::Zero => [0.0; 3],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Load::Constant => "constant",
            Load::Linear => "linear",
            Load::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    VertexVertex,
    SplineVertex,
    SplineSpline,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::VertexVertex, Strategy::SplineVertex, Strategy::SplineSpline];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::VertexVertex => "vertex-vertex",
            Strategy::SplineVertex => "spline-vertex",
            Strategy::SplineSpline => "spline-spline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSetup {
    pub degree: usize,
    /// Structure spline spans per direction.
    pub structure_spans: usize,
    /// Fluid spline spans per direction (spline-spline only); must nest
    /// with `structure_spans`.
    pub fluid_spans: usize,
    /// Fluid vertex grid along width and height.
    pub fluid_grid: (usize, usize),
    pub kernel: Kernel,
}

impl Default for BeamSetup {
    fn default() -> Self {
        Self {
            degree: 2,
            structure_spans: 4,
            fluid_spans: 8,
            fluid_grid: (5, 9),
            kernel: Kernel::ThinPlate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    pub strategy: Strategy,
    pub load: Load,
    /// Structure-side load against the exact load at the structure sites.
    pub forward_error: f64,
    /// Fluid-side load after going to the structure and back.
    pub round_trip_error: f64,
}

/// Relative sup-norm difference, absolute when the reference vanishes.
pub fn relative_error(got: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let diff = (got - reference).amax();
    let scale = reference.amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

impl BeamSetup {
    pub fn structure_basis(&self) -> Result<TensorBasis> {
        TensorBasis::uniform(2, self.degree, self.structure_spans)
    }

    pub fn fluid_basis(&self) -> Result<TensorBasis> {
        TensorBasis::uniform(2, self.degree, self.fluid_spans)
    }

    /// Affine map from parameters to in-plane coordinates as a spline field.
    pub fn geometry(&self, basis: &TensorBasis) -> Result<SplineField> {
        l2_project_fn(|p| vec![WIDTH * p[0], HEIGHT * p[1]], 2, basis, Sampling::Greville)
    }

    /// Fluid vertices: a regular grid with interior points shifted off any
    /// structure site, in in-plane coordinates.
    pub fn fluid_vertices(&self) -> Result<DMatrix<f64>> {
        let (nx, ny) = self.fluid_grid;
        if nx < 2 || ny < 2 {
            return Err(Error::argument("fluid grid needs at least 2 x 2 vertices"));
        }
        let mut pts = DMatrix::zeros(nx * ny, 2);
        for i in 0..nx {
            for j in 0..ny {
                let mut s = i as f64 / (nx - 1) as f64;
                let mut t = j as f64 / (ny - 1) as f64;
                if i > 0 && i < nx - 1 {
                    s += 0.013 * ((i + 2 * j) % 3) as f64 - 0.013;
                }
                if j > 0 && j < ny - 1 {
                    t += 0.011 * ((2 * i + j) % 3) as f64 - 0.011;
                }
                pts[(i * ny + j, 0)] = WIDTH * s;
                pts[(i * ny + j, 1)] = HEIGHT * t;
            }
        }
        Ok(pts)
    }

    /// Structure sites in in-plane coordinates: Gauss points of the
    /// structure basis, with quadrature weights.
    fn structure_sites(&self) -> Result<(DMatrix<f64>, Vec<Vec<f64>>)> {
        let basis = self.structure_basis()?;
        let order = self.degree + 1;
        let params: Vec<Vec<f64>> = tensor_rule(&basis, order).into_iter().map(|(p, _)| p).collect();
        let pts = DMatrix::from_fn(params.len(), 2, |r, c| {
            params[r][c] * if c == 0 { WIDTH } else { HEIGHT }
        });
        Ok((pts, params))
    }

    pub fn run(&self, strategy: Strategy, load: Load) -> Result<RoundTrip> {
        let fluid_pts = self.fluid_vertices()?;
        let fluid_load = sample_load(load, &fluid_pts);
        let (forward_error, back) = match strategy {
            Strategy::VertexVertex => {
                let structure = VertexCloud::new(self.structure_sites()?.0)?;
                let fluid = VertexCloud::new(fluid_pts.clone())?;
                let to_structure = MappingMatrix::build(&fluid, &structure, self.kernel)?;
                let to_fluid = MappingMatrix::build(&structure, &fluid, self.kernel)?;
                let s_load = transfer_vertex_vertex(&to_structure, &fluid_load)?;
                let fwd = relative_error(&s_load, &sample_load(load, structure.points()));
                (fwd, transfer_vertex_vertex(&to_fluid, &s_load)?)
            }
            Strategy::SplineVertex => {
                let (sites, params) = self.structure_sites()?;
                let fluid = VertexCloud::with_data(fluid_pts.clone(), fluid_load.clone())?;
                let at_sites = transfer_spline_vertex_force(&fluid, &sites, self.kernel)?;
                let samples: Vec<(Vec<f64>, Vec<f64>)> = params
                    .into_iter()
                    .enumerate()
                    .map(|(r, p)| (p, at_sites.row(r).iter().copied().collect()))
                    .collect();
                let basis = self.structure_basis()?;
                let s_field = l2_project_samples(&samples, &basis)?;
                let fwd = self.field_error(&s_field, load)?;
                let geometry = self.geometry(&basis)?;
                let back = sample_spline_displacement(
                    &s_field,
                    Queries::Physical {
                        geometry: &geometry,
                        points: &fluid_pts,
                    },
                )?;
                (fwd, back)
            }
            Strategy::SplineSpline => {
                let f_basis = self.fluid_basis()?;
                let s_basis = self.structure_basis()?;
                let f_field = l2_project_fn(
                    |p| load.at(WIDTH * p[0], HEIGHT * p[1]).to_vec(),
                    3,
                    &f_basis,
                    Sampling::Gauss,
                )?;
                let forward = build_space_transform(&f_basis, &s_basis)?;
                let backward = build_space_transform(&s_basis, &f_basis)?;
                let s_field = SplineField::new(s_basis, transfer_control_data(&forward, f_field.coefficients())?)?;
                let fwd = self.field_error(&s_field, load)?;
                let back_field = SplineField::new(
                    f_basis.clone(),
                    transfer_control_data(&backward, s_field.coefficients())?,
                )?;
                let geometry = self.geometry(&f_basis)?;
                let back = sample_spline_displacement(
                    &back_field,
                    Queries::Physical {
                        geometry: &geometry,
                        points: &fluid_pts,
                    },
                )?;
                (fwd, back)
            }
        };
        Ok(RoundTrip {
            strategy,
            load,
            forward_error,
            round_trip_error: relative_error(&back, &fluid_load),
        })
    }

    /// Error of a structure load field at the structure sites.
    fn field_error(&self, field: &SplineField, load: Load) -> Result<f64> {
        let (pts, params) = self.structure_sites()?;
        let got = sample_spline_displacement(field, Queries::Parametric(&params))?;
        Ok(relative_error(&got, &sample_load(load, &pts)))
    }
}

fn sample_load(load: Load, pts: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(pts.nrows(), 3);
    for r in 0..pts.nrows() {
        let v = load.at(pts[(r, 0)], pts[(r, 1)]);
        for k in 0..3 {
            out[(r, k)] = v[k];
        }
    }
    out
}

/// Every strategy against every load of the verification set.
pub fn run_all(setup: &BeamSetup) -> Result<Vec<RoundTrip>> {
    let mut out = Vec::new();
    for load in [Load::Constant, Load::Linear, Load::Zero] {
        for strategy in Strategy::ALL {
            out.push(setup.run(strategy, load)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_load_stays_zero() {
        for s in Strategy::ALL {
            let r = BeamSetup::default().run(s, Load::Zero).unwrap();
            assert_eq!((r.forward_error, r.round_trip_error), (0.0, 0.0), "{s:?}");
        }
    }

    #[test]
    fn relative_error_guard() {
        let z = DMatrix::zeros(2, 3);
        let one = DMatrix::from_element(2, 3, 1e-3);
        assert_eq!(relative_error(&one, &z), 1e-3);
        assert_eq!(relative_error(&z, &one), 1.0);
    }
}
