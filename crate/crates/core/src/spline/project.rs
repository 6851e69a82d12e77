//! Least-squares fitting of data into a spline space.

use nalgebra::DMatrix;

use super::field::{SplineField, TensorBasis};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::quadrature::tensor_rule;

/// Where a callable source is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Square collocation at the tensor Greville grid.
    #[default]
    Greville,
    /// Quadrature-weighted least squares at `p + 1` Gauss points per span,
    /// i.e. the discrete L² projection.
    Gauss,
}

/// Dense collocation matrix `B[r, c] = N_c(points[r])`.
pub fn collocation_matrix(basis: &TensorBasis, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut b = DMatrix::zeros(points.len(), basis.len());
    for (r, xi) in points.iter().enumerate() {
        for (c, v) in basis.eval_nonzero(xi)? {
            b[(r, c)] = v;
        }
    }
    Ok(b)
}

/// Best fit of scattered `(xi, value)` samples in `target`.
pub fn l2_project_samples(samples: &[(Vec<f64>, Vec<f64>)], target: &TensorBasis) -> Result<SplineField> {
    let Some((_, first)) = samples.first() else {
        return Err(Error::argument("no samples to project"));
    };
    let d = first.len();
    if samples.len() < target.len() {
        return Err(Error::argument(format!(
            "{} samples cannot determine {} coefficients",
            samples.len(),
            target.len()
        )));
    }
    if samples.iter().any(|(_, v)| v.len() != d) {
        return Err(Error::argument("samples have inconsistent value dimension"));
    }
    let points: Vec<Vec<f64>> = samples.iter().map(|(x, _)| x.clone()).collect();
    let b = collocation_matrix(target, &points)?;
    let rhs = DMatrix::from_fn(samples.len(), d, |r, k| samples[r].1[k]);
    SplineField::new(target.clone(), least_squares(&b, &rhs)?)
}

/// Fits the callable `f` (returning `dim` components) into `target`.
pub fn l2_project_fn<F>(f: F, dim: usize, target: &TensorBasis, sampling: Sampling) -> Result<SplineField>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = match sampling {
        Sampling::Greville => {
            let pts = target.greville_points();
            let n = pts.len();
            (pts, vec![1.0; n])
        }
        Sampling::Gauss => {
            let order = target.degrees().into_iter().max().unwrap_or(0) + 1;
            tensor_rule(target, order).into_iter().unzip()
        }
    };
    let mut b = collocation_matrix(target, &points)?;
    let mut rhs = DMatrix::zeros(points.len(), dim);
    for (r, xi) in points.iter().enumerate() {
        let v = f(xi);
        if v.len() != dim {
            return Err(Error::argument(format!(
                "source returned {} components, expected {dim}",
                v.len()
            )));
        }
        let s = weights[r].sqrt();
        for k in 0..dim {
            rhs[(r, k)] = s * v[k];
        }
        b.row_mut(r).scale_mut(s);
    }
    SplineField::new(target.clone(), least_squares(&b, &rhs)?)
}

/// Projects an existing field onto `target` by quadrature-weighted least
/// squares over the union of both span structures.
pub fn l2_project_field(source: &SplineField, target: &TensorBasis) -> Result<SplineField> {
    let quad_basis = finer_breakpoints(source.basis(), target)?;
    let order = source
        .basis()
        .degrees()
        .into_iter()
        .chain(target.degrees())
        .max()
        .unwrap_or(0)
        + 1;
    let rule = tensor_rule(&quad_basis, order);
    let mut b = DMatrix::zeros(rule.len(), target.len());
    let mut rhs = DMatrix::zeros(rule.len(), source.dim());
    for (r, (xi, w)) in rule.iter().enumerate() {
        let s = w.sqrt();
        for (c, v) in target.eval_nonzero(xi)? {
            b[(r, c)] = s * v;
        }
        for (k, v) in source.eval(xi)?.into_iter().enumerate() {
            rhs[(r, k)] = s * v;
        }
    }
    SplineField::new(target.clone(), least_squares(&b, &rhs)?)
}

/// A degree-0 basis whose spans are the common refinement of the two bases.
fn finer_breakpoints(a: &TensorBasis, b: &TensorBasis) -> Result<TensorBasis> {
    if a.param_dim() != b.param_dim() {
        return Err(Error::argument("parametric dimensions differ"));
    }
    let dirs = a
        .directions()
        .iter()
        .zip(b.directions())
        .map(|(ka, kb)| {
            if ka.domain() != kb.domain() {
                return Err(Error::argument("parametric domains differ"));
            }
            let mut pts = ka.breakpoints();
            pts.extend(kb.breakpoints());
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            super::KnotVector::new(pts, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorBasis::new(dirs)
}
