//! Dense direct solves with partial pivoting and a 1-norm condition estimate.
//!
//! Interface systems stay in the 10²..10³ unknown range, so the inverse used
//! for the condition estimate is computed explicitly.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{Error, Result};

/// Systems whose estimated 1-norm condition exceeds this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e15;

/// LU factorization of a square matrix together with its condition estimate.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
}

impl Factorization {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::argument(format!(
                "expected a square system, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let norm = one_norm(&matrix);
        let lu = matrix.lu();
        let condition = match lu.try_inverse() {
            Some(inv) => norm * one_norm(&inv),
            None => f64::INFINITY,
        };
        if !condition.is_finite() || condition > SINGULAR_CONDITION {
            return Err(Error::Numerical {
                message: "singular or rank-deficient system".into(),
                condition,
            });
        }
        Ok(Self { lu, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu.solve(rhs).ok_or_else(|| Error::Numerical {
            message: "LU back-substitution failed".into(),
            condition: self.condition,
        })
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.lu.try_inverse().ok_or_else(|| Error::Numerical {
            message: "matrix not invertible".into(),
            condition: self.condition,
        })
    }
}

/// Solves `A x = b` for square `A` or the normal equations for tall `A`.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::argument(format!(
            "underdetermined system: {} equations for {} unknowns",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == a.ncols() {
        Factorization::new(a.clone())?.solve(b)
    } else {
        let at = a.transpose();
        Factorization::new(&at * a)?.solve(&(at * b))
    }
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}
