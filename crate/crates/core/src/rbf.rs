//! Radial basis function interpolation with a linear polynomial tail, and
//! the dense mapping matrices built from it.
//!
//! For data `σ` at centers `x_i` the interpolant is
//! `I(x) = Σ λ_i φ(|x - x_i|) + β_0 + β_Lᵀ x`, with `Σ λ_i = 0` and
//! `Σ λ_i x_i = 0`. All components share one factorization of the
//! saddle-point matrix `[Φ P; Pᵀ 0]`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Factorization;

/// Radial kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Kernel {
    /// `r² log r` in two dimensions, `r³` otherwise; `φ(0) = 0`.
    #[default]
    ThinPlate,
    /// `exp(-(ε r)²)`.
    Gaussian { shape: f64 },
}

impl Kernel {
    pub fn eval(&self, r: f64, dim: usize) -> f64 {
        match *self {
            Kernel::ThinPlate if r == 0.0 => 0.0,
            Kernel::ThinPlate if dim == 2 => r * r * r.ln(),
            Kernel::ThinPlate => r * r * r,
            Kernel::Gaussian { shape } => (-(shape * r).powi(2)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { shape } if !(shape > 0.0 && shape.is_finite()) => {
                Err(Error::argument("Gaussian shape parameter must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered interface vertices with optional per-vertex data.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexCloud {
    points: DMatrix<f64>,
    data: Option<DMatrix<f64>>,
}

/// Minimum separation below which two vertices count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

impl VertexCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::argument("vertex cloud must contain at least one point"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("vertex coordinates must be finite"));
        }
        if let Some((a, b)) = coincident_pair(&points) {
            return Err(Error::argument(format!("vertices {a} and {b} coincide")));
        }
        Ok(Self { points, data: None })
    }

    pub fn with_data(points: DMatrix<f64>, data: DMatrix<f64>) -> Result<Self> {
        let cloud = Self::new(points)?;
        cloud.attach(data)
    }

    pub fn attach(mut self, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != self.points.nrows() {
            return Err(Error::argument(format!(
                "{} data rows for {} vertices",
                data.nrows(),
                self.points.nrows()
            )));
        }
        self.data = Some(data);
        Ok(self)
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn data(&self) -> Option<&DMatrix<f64>> {
        self.data.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Reads the plain-text cloud format: one vertex per line, `dim`
    /// coordinates followed by any number of data columns. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str, dim: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::format(format!("not a number: {t:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let Some(first) = rows.first() else {
            return Err(Error::format("point cloud file has no vertices"));
        };
        let width = first.len();
        if width < dim {
            return Err(Error::format(format!("rows have {width} columns, need at least {dim}")));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::format(format!(
                "row {i} has {} columns, expected {width}",
                rows[i].len()
            )));
        }
        let n = rows.len();
        let points = DMatrix::from_fn(n, dim, |r, c| rows[r][c]);
        let cloud = Self::new(points)?;
        if width == dim {
            Ok(cloud)
        } else {
            cloud.attach(DMatrix::from_fn(n, width - dim, |r, c| rows[r][dim + c]))
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let mut vals: Vec<String> = self.points.row(i).iter().map(|v| format!("{v:?}")).collect();
            if let Some(d) = &self.data {
                vals.extend(d.row(i).iter().map(|v| format!("{v:?}")));
            }
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }
}

/// Finds two rows closer than [`COINCIDENCE_TOL`] with a sweep along the
/// first coordinate.
fn coincident_pair(points: &DMatrix<f64>) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.sort_by(|&a, &b| points[(a, 0)].total_cmp(&points[(b, 0)]));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if points[(b, 0)] - points[(a, 0)] > COINCIDENCE_TOL {
                break;
            }
            let dist = (0..points.ncols())
                .map(|c| (points[(a, c)] - points[(b, c)]).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist <= COINCIDENCE_TOL {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}

/// Saddle-point system for a set of centers, factorized once.
struct SaddleSystem {
    centers: DMatrix<f64>,
    centroid: Vec<f64>,
    kernel: Kernel,
    lu: Factorization,
}

impl SaddleSystem {
    fn new(centers: &DMatrix<f64>, kernel: Kernel) -> Result<Self> {
        kernel.validate()?;
        let (n, dim) = centers.shape();
        if n < dim + 1 {
            return Err(Error::argument(format!(
                "{n} centers cannot determine a linear tail in {dim} dimensions"
            )));
        }
        let centroid: Vec<f64> = (0..dim).map(|c| centers.column(c).mean()).collect();
        // linear tail in coordinates relative to the centroid
        let poly = DMatrix::from_fn(n, dim + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                centers[(r, c - 1)] - centroid[c - 1]
            }
        });
        let sv = poly.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if smin <= 1e-10 * smax {
            return Err(Error::argument(
                "degenerate geometry: centers are collinear or coplanar, the linear tail is undetermined",
            ));
        }
        let size = n + dim + 1;
        let mut a = DMatrix::zeros(size, size);
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(dist(centers, i, centers, j), dim);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            for c in 0..=dim {
                a[(i, n + c)] = poly[(i, c)];
                a[(n + c, i)] = poly[(i, c)];
            }
        }
        let lu = Factorization::new(a)?;
        Ok(Self {
            centers: centers.clone(),
            centroid,
            kernel,
            lu,
        })
    }

    /// Row of the evaluation operator at `x`: kernel values, then `1`, then
    /// centered coordinates.
    fn eval_row(&self, x: &[f64]) -> Vec<f64> {
        let (n, dim) = self.centers.shape();
        let mut row = Vec::with_capacity(n + dim + 1);
        for i in 0..n {
            let r = x
                .iter()
                .zip(self.centers.row(i).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            row.push(self.kernel.eval(r, dim));
        }
        row.push(1.0);
        row.extend((0..dim).map(|c| x[c] - self.centroid[c]));
        row
    }
}

fn dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols())
        .map(|c| (a[(i, c)] - b[(j, c)]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Solved RBF interpolant for `m` data components.
#[derive(Debug, Clone)]
pub struct RbfInterpolant {
    centers: DMatrix<f64>,
    centroid: Vec<f64>,
    kernel: Kernel,
    lambda: DMatrix<f64>,
    /// Tail coefficients in centered coordinates: row 0 constant, rows 1.. linear.
    tail: DMatrix<f64>,
    condition: f64,
}

impl RbfInterpolant {
    pub fn build(cloud: &VertexCloud, kernel: Kernel) -> Result<Self> {
        let data = cloud
            .data()
            .ok_or_else(|| Error::argument("vertex cloud carries no data to interpolate"))?;
        let sys = SaddleSystem::new(cloud.points(), kernel)?;
        let (n, dim) = cloud.points().shape();
        let m = data.ncols();
        let mut rhs = DMatrix::zeros(n + dim + 1, m);
        rhs.rows_mut(0, n).copy_from(data);
        let sol = sys.lu.solve(&rhs)?;
        Ok(Self {
            centers: sys.centers,
            centroid: sys.centroid,
            kernel,
            lambda: sol.rows(0, n).into_owned(),
            tail: sol.rows(n, dim + 1).into_owned(),
            condition: sys.lu.condition(),
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (n, dim) = self.centers.shape();
        if x.len() != dim {
            return Err(Error::argument(format!(
                "point has {} coordinates, expected {dim}",
                x.len()
            )));
        }
        let m = self.lambda.ncols();
        let mut out = vec![0.0; m];
        for i in 0..n {
            let r = (0..dim)
                .map(|c| (x[c] - self.centers[(i, c)]).powi(2))
                .sum::<f64>()
                .sqrt();
            let phi = self.kernel.eval(r, dim);
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.lambda[(i, k)] * phi;
            }
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.tail[(0, k)];
            for (c, (xc, mc)) in x.iter().zip(&self.centroid).enumerate() {
                *o += self.tail[(c + 1, k)] * (xc - mc);
            }
        }
        Ok(out)
    }

    /// RBF coefficients, one column per component.
    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Constant tail coefficient per component in absolute coordinates.
    pub fn beta0(&self) -> Vec<f64> {
        (0..self.lambda.ncols())
            .map(|k| {
                self.tail[(0, k)]
                    - (0..self.centroid.len())
                        .map(|c| self.tail[(c + 1, k)] * self.centroid[c])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Linear tail coefficients: a `dim x m` block.
    pub fn beta_linear(&self) -> DMatrix<f64> {
        self.tail.rows(1, self.centroid.len()).into_owned()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    /// 1-norm condition estimate of the saddle-point matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// Dense linear operator from source-vertex data to target-vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    entries: DMatrix<f64>,
    row_sum_deviation: f64,
    col_sum_deviation: f64,
}

impl MappingMatrix {
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("mapping matrix entries must be finite"));
        }
        Ok(Self {
            row_sum_deviation: row_deviation(&entries),
            col_sum_deviation: row_deviation(&entries.transpose()),
            entries,
        })
    }

    /// Consistent RBF mapping: entry `(j, i)` is the weight of source datum
    /// `i` in the interpolated value at target point `j`.
    pub fn build(from: &VertexCloud, to: &VertexCloud, kernel: Kernel) -> Result<Self> {
        if from.dim() != to.dim() {
            return Err(Error::argument("source and target clouds differ in dimension"));
        }
        let sys = SaddleSystem::new(from.points(), kernel)?;
        let n = from.len();
        let size = n + from.dim() + 1;
        // the saddle-point matrix is symmetric, so E A^-1 = (A^-1 E^T)^T
        let mut eval_t = DMatrix::zeros(size, to.len());
        for j in 0..to.len() {
            let row = sys.eval_row(&to.point(j));
            for (c, v) in row.into_iter().enumerate() {
                eval_t[(c, j)] = v;
            }
        }
        let weights = sys.lu.solve(&eval_t)?;
        Self::from_entries(weights.rows(0, n).transpose())
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn row_sum_deviation(&self) -> f64 {
        self.row_sum_deviation
    }

    pub fn col_sum_deviation(&self) -> f64 {
        self.col_sum_deviation
    }

    pub fn transpose(&self) -> Result<Self> {
        Self::from_entries(self.entries.transpose())
    }

    pub fn apply(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.nrows() != self.entries.ncols() {
            return Err(Error::argument(format!(
                "mapping expects {} source rows, got {}",
                self.entries.ncols(),
                data.nrows()
            )));
        }
        Ok(&self.entries * data)
    }
}

fn row_deviation(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
}

/// Maximum `|Σ_i M_ji - 1|` over rows; zero for a consistent mapping.
pub fn check_consistency(m: &MappingMatrix) -> f64 {
    m.row_sum_deviation
}

/// Maximum `|Σ_j M_ji - 1|` over columns; zero for a conservative mapping.
pub fn check_conservative(m: &MappingMatrix) -> f64 {
    m.col_sum_deviation
}
