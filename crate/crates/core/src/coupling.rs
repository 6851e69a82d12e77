//! Interface transfer operators for the three coupling strategies:
//! vertex-vertex (RBF mapping), spline-vertex (RBF fit for loads, spline
//! sampling for displacements) and spline-spline (exact transforms between
//! nested spline spaces).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{kron, Factorization};
use crate::quadrature::span_rule;
use crate::rbf::{Kernel, MappingMatrix, RbfInterpolant, VertexCloud};
use crate::spline::{insertion_matrix, KnotVector, SplineField, TensorBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleLabel {
    FluidLike,
    StructureLike,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Vertices(VertexCloud),
    Spline(SplineField),
}

/// One participant's view of the coupling interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSide {
    pub representation: Representation,
    pub role: RoleLabel,
}

impl InterfaceSide {
    pub fn parametric_domain(&self) -> Option<Vec<(f64, f64)>> {
        match &self.representation {
            Representation::Spline(f) => Some(f.basis().directions().iter().map(KnotVector::domain).collect()),
            Representation::Vertices(_) => None,
        }
    }
}

/// Linear map from coefficients on `source` to coefficients on `target`,
/// applied to every physical component separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpaceTransform {
    source: TensorBasis,
    target: TensorBasis,
    block: DMatrix<f64>,
}

impl SplineSpaceTransform {
    pub fn source(&self) -> &TensorBasis {
        &self.source
    }

    pub fn target(&self) -> &TensorBasis {
        &self.target
    }

    /// Scalar `n_target x n_source` block shared by all components.
    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn is_identity(&self) -> bool {
        self.block.is_square() && self.block == DMatrix::identity(self.block.nrows(), self.block.ncols())
    }
}

/// Builds the transform between two spline spaces whose knot vectors are,
/// direction by direction, identical or nested.
pub fn build_space_transform(source: &TensorBasis, target: &TensorBasis) -> Result<SplineSpaceTransform> {
    if source.param_dim() != target.param_dim() {
        return Err(Error::unsupported("spline spaces differ in parametric dimension"));
    }
    let mut block = DMatrix::identity(1, 1);
    for (ks, kt) in source.directions().iter().zip(target.directions()) {
        let t = direction_transform(ks, kt)?;
        block = kron(&block, &t);
    }
    Ok(SplineSpaceTransform {
        source: source.clone(),
        target: target.clone(),
        block,
    })
}

fn direction_transform(source: &KnotVector, target: &KnotVector) -> Result<DMatrix<f64>> {
    if source.degree() != target.degree() {
        return Err(Error::unsupported(format!(
            "degree mismatch: {} vs {}",
            source.degree(),
            target.degree()
        )));
    }
    if source == target {
        Ok(DMatrix::identity(source.len(), source.len()))
    } else if source.is_nested_in(target) {
        let mut kv = source.clone();
        let mut t = DMatrix::identity(source.len(), source.len());
        for u in source.missing_from(target) {
            let (next, a) = insertion_matrix(&kv, u)?;
            t = a * t;
            kv = next;
        }
        Ok(t)
    } else if target.is_nested_in(source) {
        projection_1d(source, target)
    } else {
        Err(Error::unsupported("knot vectors are neither identical nor nested"))
    }
}

/// L2 projection from the finer `source` space onto the nested coarser
/// `target`: `M_tt^{-1} M_ts`, integrated on the source spans.
fn projection_1d(source: &KnotVector, target: &KnotVector) -> Result<DMatrix<f64>> {
    let (nt, ns) = (target.len(), source.len());
    let mut m_tt = DMatrix::zeros(nt, nt);
    let mut m_ts = DMatrix::zeros(nt, ns);
    for (x, w) in span_rule(source, source.degree() + 1) {
        let bt = target.eval_basis(x)?;
        let bs = source.eval_basis(x)?;
        for (a, va) in bt.values.iter().enumerate() {
            for (b, vb) in bt.values.iter().enumerate() {
                m_tt[(bt.first + a, bt.first + b)] += w * va * vb;
            }
            for (b, vb) in bs.values.iter().enumerate() {
                m_ts[(bt.first + a, bs.first + b)] += w * va * vb;
            }
        }
    }
    Factorization::new(m_tt)?.solve(&m_ts)
}

/// Applies a space transform to a control block (`n_source x d`).
pub fn transfer_control_data(t: &SplineSpaceTransform, coefficients: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if coefficients.nrows() != t.block.ncols() {
        return Err(Error::argument(format!(
            "control block has {} rows, transform expects {}",
            coefficients.nrows(),
            t.block.ncols()
        )));
    }
    Ok(&t.block * coefficients)
}

/// Moves a whole field through a transform; rational fields are refused.
pub fn transfer_field(t: &SplineSpaceTransform, field: &SplineField) -> Result<SplineField> {
    if field.weights().is_some() {
        return Err(Error::unsupported("control-data transfer of a rational field"));
    }
    if field.basis() != &t.source {
        return Err(Error::argument("field is not defined on the transform's source space"));
    }
    SplineField::new(t.target.clone(), transfer_control_data(t, field.coefficients())?)
}

pub fn transfer_vertex_vertex(m: &MappingMatrix, source_data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.apply(source_data)
}

/// Fits an RBF interpolant to the fluid loads and evaluates it at the given
/// structure sites (one site per row).
pub fn transfer_spline_vertex_force(fluid: &VertexCloud, sites: &DMatrix<f64>, kernel: Kernel) -> Result<DMatrix<f64>> {
    if sites.ncols() != fluid.dim() {
        return Err(Error::argument(
            "evaluation sites and fluid vertices differ in dimension",
        ));
    }
    let interp = RbfInterpolant::build(fluid, kernel)?;
    let m = interp.lambda().ncols();
    let mut out = DMatrix::zeros(sites.nrows(), m);
    for j in 0..sites.nrows() {
        let x: Vec<f64> = sites.row(j).iter().copied().collect();
        for (k, v) in interp.eval(&x)?.into_iter().enumerate() {
            out[(j, k)] = v;
        }
    }
    Ok(out)
}

/// Where the fluid side wants a spline field sampled.
#[derive(Debug, Clone, Copy)]
pub enum Queries<'a> {
    Parametric(&'a [Vec<f64>]),
    /// Physical points, mapped to parameters through `geometry`, a field on
    /// the same parametric domain.
    Physical {
        geometry: &'a SplineField,
        points: &'a DMatrix<f64>,
    },
}

const INVERSION_TOL: f64 = 1e-12;
const INVERSION_MAX_ITER: usize = 50;
const INVERSION_ACCEPT: f64 = 1e-10;

/// Evaluates `field` at each query, one output row per query.
pub fn sample_spline_displacement(field: &SplineField, queries: Queries<'_>) -> Result<DMatrix<f64>> {
    let params = match queries {
        Queries::Parametric(p) => p.to_vec(),
        Queries::Physical { geometry, points } => {
            if geometry.basis().directions().iter().map(KnotVector::domain).ne(field
                .basis()
                .directions()
                .iter()
                .map(KnotVector::domain))
            {
                return Err(Error::argument(
                    "geometry and field live on different parametric domains",
                ));
            }
            (0..points.nrows())
                .map(|i| {
                    let x: Vec<f64> = points.row(i).iter().copied().collect();
                    invert_point(geometry, &x)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut out = DMatrix::zeros(params.len(), field.dim());
    for (i, xi) in params.iter().enumerate() {
        for (k, v) in field.eval(xi)?.into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}

/// Closest-point inversion `geometry(ξ) = x` by damped Gauss-Newton.
pub fn invert_point(geometry: &SplineField, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != geometry.dim() {
        return Err(Error::argument(format!(
            "query has {} coordinates, geometry has {}",
            x.len(),
            geometry.dim()
        )));
    }
    let domains: Vec<(f64, f64)> = geometry.basis().directions().iter().map(KnotVector::domain).collect();
    let misfit = |xi: &[f64]| -> Result<(Vec<f64>, f64)> {
        let g = geometry.eval(xi)?;
        let r: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((r, norm))
    };
    let mut xi = geometry
        .basis()
        .greville_points()
        .into_iter()
        .map(|g| misfit(&g).map(|(_, n)| (g, n)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(g, _)| g)
        .expect("a basis has at least one Greville point");
    let (mut r, mut norm) = misfit(&xi)?;
    for _ in 0..INVERSION_MAX_ITER {
        if norm <= INVERSION_TOL {
            break;
        }
        let j = geometry.gradient(&xi)?;
        let rv = DMatrix::from_column_slice(r.len(), 1, &r);
        let jtj = j.transpose() * &j;
        let Ok(lu) = Factorization::new(jtj) else { break };
        let step = lu.solve(&(j.transpose() * rv))?;
        let mut damping = 1.0;
        let mut improved = false;
        while damping > 1e-6 {
            let trial: Vec<f64> = xi
                .iter()
                .zip(step.iter())
                .zip(&domains)
                .map(|((v, s), (lo, hi))| (v - damping * s).clamp(*lo, *hi))
                .collect();
            let (tr, tn) = misfit(&trial)?;
            if tn < norm {
                let moved = trial.iter().zip(&xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                xi = trial;
                r = tr;
                norm = tn;
                improved = moved > INVERSION_TOL;
                break;
            }
            damping *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm > INVERSION_ACCEPT {
        return Err(Error::Numerical {
            message: format!("point inversion stalled with residual {norm:e}"),
            condition: f64::NAN,
        });
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_bases_give_identity() {
        let b = TensorBasis::uniform(2, 2, 3).unwrap();
        let t = build_space_transform(&b, &b).unwrap();
        assert!(t.is_identity());
    }

    #[test]
    fn refinement_keeps_the_field() {
        let coarse = TensorBasis::uniform(2, 2, 2).unwrap();
        let fine = coarse.refine_uniform(1);
        let c = DMatrix::from_fn(coarse.len(), 1, |i, _| (i as f64 * 0.7).sin());
        let f = SplineField::new(coarse.clone(), c.clone()).unwrap();
        let t = build_space_transform(&coarse, &fine).unwrap();
        let g = transfer_field(&t, &f).unwrap();
        for xi in [[0.1, 0.2], [0.5, 0.5], [0.93, 0.01]] {
            assert!((f.eval(&xi).unwrap()[0] - g.eval(&xi).unwrap()[0]).abs() < 1e-12);
        }
        let back = build_space_transform(&fine, &coarse).unwrap();
        let c2 = transfer_control_data(&back, g.coefficients()).unwrap();
        assert!((c2 - c).abs().max() < 1e-10);
    }

    #[test]
    fn rejects_unsupported_pairs() {
        let a = TensorBasis::uniform(1, 2, 2).unwrap();
        let b = TensorBasis::uniform(1, 3, 2).unwrap();
        let c = TensorBasis::uniform(1, 2, 3).unwrap();
        assert!(matches!(build_space_transform(&a, &b), Err(Error::Unsupported(_))));
        assert!(matches!(build_space_transform(&a, &c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn physical_queries_invert_the_geometry() {
        let basis = TensorBasis::uniform(2, 2, 3).unwrap();
        let geo = crate::spline::l2_project_fn(
            |xi| vec![0.5 * xi[0] + 0.1 * xi[1] * xi[1], xi[1]],
            2,
            &basis,
            Default::default(),
        )
        .unwrap();
        let xi = [0.3, 0.8];
        let x = geo.eval(&xi).unwrap();
        let found = invert_point(&geo, &x).unwrap();
        assert!((found[0] - xi[0]).abs() < 1e-9 && (found[1] - xi[1]).abs() < 1e-9);
        let far = invert_point(&geo, &[5.0, 5.0]);
        assert!(matches!(far, Err(Error::Numerical { .. })));
    }
}
