use nalgebra::DMatrix;

use super::knots::{BasisWindow, KnotVector};
use crate::error::{Error, Result};
use crate::linalg::kron;

/// Tensor product of one or two knot vectors.
///
/// Coefficients are ordered with the first direction slowest: basis
/// function `(i0, i1)` has flat index `i0 * n1 + i1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    directions: Vec<KnotVector>,
}

/// Which end of a parametric direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Start,
    End,
}

impl TensorBasis {
    pub fn new(directions: Vec<KnotVector>) -> Result<Self> {
        if directions.is_empty() || directions.len() > 2 {
            return Err(Error::argument(format!(
                "parametric dimension must be 1 or 2, got {}",
                directions.len()
            )));
        }
        Ok(Self { directions })
    }

    pub fn curve(kv: KnotVector) -> Self {
        Self { directions: vec![kv] }
    }

    pub fn surface(u: KnotVector, v: KnotVector) -> Self {
        Self { directions: vec![u, v] }
    }

    /// Uniform open basis with `spans` spans of degree `degree` on the unit
    /// interval in each of `param_dim` directions.
    pub fn uniform(param_dim: usize, degree: usize, spans: usize) -> Result<Self> {
        let kv = KnotVector::uniform(degree, spans, 0.0, 1.0)?;
        Self::new(vec![kv; param_dim])
    }

    pub fn directions(&self) -> &[KnotVector] {
        &self.directions
    }

    pub fn direction(&self, i: usize) -> &KnotVector {
        &self.directions[i]
    }

    pub fn param_dim(&self) -> usize {
        self.directions.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.directions.iter().map(KnotVector::len).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.directions.iter().map(KnotVector::degree).collect()
    }

    /// Total number of tensor-product basis functions.
    pub fn len(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.directions.iter())
            .fold(0, |acc, (&i, kv)| acc * kv.len() + i)
    }

    /// Evaluates the nonzero tensor-product basis functions at `xi`.
    pub fn eval_nonzero(&self, xi: &[f64]) -> Result<Vec<(usize, f64)>> {
        self.check_point(xi)?;
        let windows = self
            .directions
            .iter()
            .zip(xi)
            .map(|(kv, &u)| kv.eval_basis(u))
            .collect::<Result<Vec<BasisWindow>>>()?;
        Ok(self.combine(&windows))
    }

    fn combine(&self, windows: &[BasisWindow]) -> Vec<(usize, f64)> {
        match windows {
            [w] => w.values.iter().enumerate().map(|(k, &v)| (w.first + k, v)).collect(),
            [w0, w1] => {
                let n1 = self.directions[1].len();
                let mut out = Vec::with_capacity(w0.values.len() * w1.values.len());
                for (a, &va) in w0.values.iter().enumerate() {
                    for (b, &vb) in w1.values.iter().enumerate() {
                        out.push(((w0.first + a) * n1 + w1.first + b, va * vb));
                    }
                }
                out
            }
            _ => unreachable!("parametric dimension is 1 or 2"),
        }
    }

    /// Nonzero basis values and first parametric derivatives at `xi`:
    /// entries are `(index, value, [d/dxi_0, d/dxi_1])`.
    pub fn eval_nonzero_gradients(&self, xi: &[f64]) -> Result<Vec<(usize, f64, Vec<f64>)>> {
        self.check_point(xi)?;
        let ders = self
            .directions
            .iter()
            .zip(xi)
            .map(|(kv, &u)| kv.eval_basis_derivatives(u, 1.min(kv.degree())))
            .collect::<Result<Vec<_>>>()?;
        let slope = |w: &super::knots::DerivativeWindow, j: usize| w.rows.get(1).map_or(0.0, |r| r[j]);
        Ok(match ders.as_slice() {
            [w] => (0..w.rows[0].len())
                .map(|j| (w.first + j, w.rows[0][j], vec![slope(w, j)]))
                .collect(),
            [w0, w1] => {
                let n1 = self.directions[1].len();
                let mut out = Vec::new();
                for a in 0..w0.rows[0].len() {
                    for b in 0..w1.rows[0].len() {
                        let (v0, v1) = (w0.rows[0][a], w1.rows[0][b]);
                        out.push((
                            (w0.first + a) * n1 + w1.first + b,
                            v0 * v1,
                            vec![slope(w0, a) * v1, v0 * slope(w1, b)],
                        ));
                    }
                }
                out
            }
            _ => unreachable!("parametric dimension is 1 or 2"),
        })
    }

    pub fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.param_dim() {
            return Err(Error::argument(format!(
                "parametric point has {} coordinates, basis has {}",
                xi.len(),
                self.param_dim()
            )));
        }
        for (kv, &u) in self.directions.iter().zip(xi) {
            let (lo, hi) = kv.domain();
            if !(lo..=hi).contains(&u) {
                return Err(Error::Domain { value: u, lo, hi });
            }
        }
        Ok(())
    }

    /// Lifts a 1D operator on direction `dir` to the full tensor index space.
    pub(crate) fn lift(&self, dir: usize, op: &DMatrix<f64>) -> DMatrix<f64> {
        let sizes = self.sizes();
        let before: usize = sizes[..dir].iter().product();
        let after: usize = sizes[dir + 1..].iter().product();
        kron(
            &DMatrix::identity(before, before),
            &kron(op, &DMatrix::identity(after, after)),
        )
    }

    pub(crate) fn with_direction(&self, dir: usize, kv: KnotVector) -> Self {
        let mut directions = self.directions.clone();
        directions[dir] = kv;
        Self { directions }
    }

    /// Tensor grid of Greville abscissae in flat-index order.
    pub fn greville_points(&self) -> Vec<Vec<f64>> {
        let g: Vec<Vec<f64>> = self.directions.iter().map(KnotVector::greville).collect();
        match g.as_slice() {
            [g0] => g0.iter().map(|&u| vec![u]).collect(),
            [g0, g1] => g0.iter().flat_map(|&u| g1.iter().map(move |&v| vec![u, v])).collect(),
            _ => unreachable!("parametric dimension is 1 or 2"),
        }
    }

    /// Uniform refinement: every nonempty span is bisected `levels` times in
    /// every direction.
    pub fn refine_uniform(&self, levels: usize) -> TensorBasis {
        let mut out = self.clone();
        for _ in 0..levels {
            for dir in 0..out.param_dim() {
                let mut kv = out.directions[dir].clone();
                for m in out.directions[dir].span_midpoints() {
                    kv = kv.with_knot(m).expect("midpoint of a nonempty span is insertable");
                }
                out.directions[dir] = kv;
            }
        }
        out
    }
}

/// Single-knot insertion as a linear map on coefficients: returns the
/// refined knot vector and the `(n + 1) x n` matrix.
pub fn insertion_matrix(kv: &KnotVector, u: f64) -> Result<(KnotVector, DMatrix<f64>)> {
    let refined = kv.with_knot(u)?;
    let p = kv.degree();
    let n = kv.len();
    let t = kv.knots();
    let k = kv.find_span(u)?;
    let mut a = DMatrix::zeros(n + 1, n);
    for i in 0..=n {
        if i + p <= k {
            a[(i, i)] = 1.0;
        } else if i > k {
            a[(i, i - 1)] = 1.0;
        } else {
            let alpha = (u - t[i]) / (t[i + p] - t[i]);
            a[(i, i)] = alpha;
            a[(i, i - 1)] = 1.0 - alpha;
        }
    }
    Ok((refined, a))
}

/// A vector-valued tensor-product spline, optionally rational.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineField {
    basis: TensorBasis,
    coefficients: DMatrix<f64>,
    weights: Option<Vec<f64>>,
}

impl SplineField {
    pub fn new(basis: TensorBasis, coefficients: DMatrix<f64>) -> Result<Self> {
        Self::build(basis, coefficients, None)
    }

    pub fn rational(basis: TensorBasis, coefficients: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::build(basis, coefficients, Some(weights))
    }

    fn build(basis: TensorBasis, coefficients: DMatrix<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if coefficients.nrows() != basis.len() {
            return Err(Error::argument(format!(
                "{} coefficient rows for {} basis functions",
                coefficients.nrows(),
                basis.len()
            )));
        }
        if !(1..=3).contains(&coefficients.ncols()) {
            return Err(Error::argument(format!(
                "field dimension must be 1, 2 or 3, got {}",
                coefficients.ncols()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != basis.len() {
                return Err(Error::argument("weight count differs from basis size"));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::argument("weights must be strictly positive"));
            }
        }
        Ok(Self {
            basis,
            coefficients,
            weights,
        })
    }

    /// Field whose coefficients all equal `value`.
    pub fn constant(basis: TensorBasis, value: &[f64]) -> Result<Self> {
        let n = basis.len();
        let coefficients = DMatrix::from_fn(n, value.len(), |_, j| value[j]);
        Self::new(basis, coefficients)
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let terms = self.basis.eval_nonzero(xi)?;
        let d = self.dim();
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for (i, b) in terms {
            let w = self.weight(i);
            den += b * w;
            for (k, acc) in num.iter_mut().enumerate() {
                *acc += b * w * self.coefficients[(i, k)];
            }
        }
        if self.weights.is_some() {
            num.iter_mut().for_each(|v| *v /= den);
        }
        Ok(num)
    }

    /// Parametric Jacobian: a `d x d̂` block.
    pub fn gradient(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let terms = self.basis.eval_nonzero_gradients(xi)?;
        let d = self.dim();
        let dh = self.basis.param_dim();
        let mut num = vec![0.0; d];
        let mut dnum = DMatrix::zeros(d, dh);
        let mut den = 0.0;
        let mut dden = vec![0.0; dh];
        for (i, b, db) in terms {
            let w = self.weight(i);
            den += b * w;
            for (j, g) in db.iter().enumerate() {
                dden[j] += g * w;
            }
            for k in 0..d {
                let c = self.coefficients[(i, k)] * w;
                num[k] += b * c;
                for (j, g) in db.iter().enumerate() {
                    dnum[(k, j)] += g * c;
                }
            }
        }
        if self.weights.is_none() {
            return Ok(dnum);
        }
        Ok(DMatrix::from_fn(d, dh, |k, j| {
            (dnum[(k, j)] - num[k] / den * dden[j]) / den
        }))
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Inserts `u` once into direction `dir`; the field is unchanged as a
    /// function.
    pub fn insert_knot(&self, dir: usize, u: f64) -> Result<SplineField> {
        if dir >= self.basis.param_dim() {
            return Err(Error::argument(format!("no parametric direction {dir}")));
        }
        let (kv, a) = insertion_matrix(self.basis.direction(dir), u)?;
        let op = self.basis.lift(dir, &a);
        let basis = self.basis.with_direction(dir, kv);
        match &self.weights {
            None => SplineField::new(basis, &op * &self.coefficients),
            Some(w) => {
                // insert on homogeneous coordinates (w c, w), then project back
                let wv = DMatrix::from_column_slice(w.len(), 1, w);
                let homog = DMatrix::from_fn(w.len(), self.dim(), |i, k| w[i] * self.coefficients[(i, k)]);
                let new_w = &op * wv;
                let new_h = &op * homog;
                let coeffs = DMatrix::from_fn(new_h.nrows(), new_h.ncols(), |i, k| new_h[(i, k)] / new_w[(i, 0)]);
                SplineField::rational(basis, coeffs, new_w.iter().copied().collect())
            }
        }
    }

    /// Restriction of a surface field to the boundary curve where
    /// direction `dir` sits at `side`.
    pub fn boundary_trace(&self, dir: usize, side: Side) -> Result<SplineField> {
        let rows = self.boundary_rows(dir, side)?;
        let other = self.basis.direction(1 - dir).clone();
        let coeffs = DMatrix::from_fn(rows.len(), self.dim(), |r, k| self.coefficients[(rows[r], k)]);
        match &self.weights {
            None => SplineField::new(TensorBasis::curve(other), coeffs),
            Some(w) => SplineField::rational(TensorBasis::curve(other), coeffs, rows.iter().map(|&r| w[r]).collect()),
        }
    }

    /// Parametric derivative along `dir`, evaluated on the boundary curve
    /// where `dir` sits at `side`, as a curve field on the other direction.
    pub fn boundary_derivative(&self, dir: usize, side: Side) -> Result<SplineField> {
        if self.weights.is_some() {
            return Err(Error::unsupported("boundary derivative of a rational field"));
        }
        let kv = self.basis.direction(dir);
        if kv.degree() == 0 {
            return Err(Error::argument("piecewise-constant direction has no derivative"));
        }
        let (lo, hi) = kv.domain();
        let at = if side == Side::Start { lo } else { hi };
        let ders = kv.eval_basis_derivatives(at, 1)?;
        let n_other = self.basis.direction(1 - dir).len();
        let mut coeffs = DMatrix::zeros(n_other, self.dim());
        for (j, &slope) in ders.rows[1].iter().enumerate() {
            let rows = self.boundary_rows_at(dir, ders.first + j)?;
            for (r, &row) in rows.iter().enumerate() {
                for k in 0..self.dim() {
                    coeffs[(r, k)] += slope * self.coefficients[(row, k)];
                }
            }
        }
        SplineField::new(TensorBasis::curve(self.basis.direction(1 - dir).clone()), coeffs)
    }

    fn boundary_rows(&self, dir: usize, side: Side) -> Result<Vec<usize>> {
        let n = self.basis.direction(dir).len();
        self.boundary_rows_at(dir, if side == Side::Start { 0 } else { n - 1 })
    }

    /// Flat indices of the coefficient line with index `i` in direction `dir`.
    fn boundary_rows_at(&self, dir: usize, i: usize) -> Result<Vec<usize>> {
        if self.basis.param_dim() != 2 || dir > 1 {
            return Err(Error::argument("boundary curves exist only on surface fields"));
        }
        let n_other = self.basis.direction(1 - dir).len();
        Ok((0..n_other)
            .map(|j| {
                if dir == 0 {
                    self.basis.flat_index(&[i, j])
                } else {
                    self.basis.flat_index(&[j, i])
                }
            })
            .collect())
    }
}
