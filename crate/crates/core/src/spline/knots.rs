//! Open knot vectors and Cox–de Boor basis evaluation.

use crate::error::{Error, Result};

/// Nonzero basis functions at a parameter: `values[k]` belongs to basis
/// function `first + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWindow {
    pub first: usize,
    pub values: Vec<f64>,
}

/// Derivatives of the nonzero basis functions: `rows[k][j]` is the `k`-th
/// derivative of basis function `first + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeWindow {
    pub first: usize,
    pub rows: Vec<Vec<f64>>,
}

/// A clamped (open) knot vector with its degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::argument(format!(
                "knot vector of length {} too short for degree {p}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::argument("knot vector contains non-finite values"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::argument("knots must be non-decreasing"));
        }
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        if hi <= lo {
            return Err(Error::argument("knot vector spans an empty domain"));
        }
        let start = knots.iter().take_while(|&&k| k == lo).count();
        let end = knots.iter().rev().take_while(|&&k| k == hi).count();
        if start != p + 1 || end != p + 1 {
            return Err(Error::argument(format!(
                "open knot vector needs end multiplicity {} (found {start} and {end})",
                p + 1
            )));
        }
        let mut run = 1;
        for w in knots[start - 1..knots.len() - end + 1].windows(2) {
            run = if w[1] == w[0] { run + 1 } else { 1 };
            if run > p.max(1) && w[1] != hi {
                return Err(Error::argument(format!(
                    "interior knot {} has multiplicity above degree {p}",
                    w[1]
                )));
            }
        }
        Ok(Self { knots, degree })
    }

    /// Open uniform knot vector on `[lo, hi]` with `spans` equal spans.
    pub fn uniform(degree: usize, spans: usize, lo: f64, hi: f64) -> Result<Self> {
        if spans == 0 {
            return Err(Error::argument("need at least one span"));
        }
        let mut knots = vec![lo; degree + 1];
        for s in 1..spans {
            knots.push(lo + (hi - lo) * s as f64 / spans as f64);
        }
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        Self::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Distinct breakpoints including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Number of nonempty spans.
    pub fn span_count(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Index `i` with `knots[i] <= u < knots[i+1]`; `u` equal to the last
    /// knot maps to the last nonempty span.
    pub fn find_span(&self, u: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&u) {
            return Err(Error::Domain { value: u, lo, hi });
        }
        let n = self.len();
        if u >= self.knots[n] {
            return Ok(n - 1);
        }
        // knots[p] <= u < knots[n]; upper bound search over the interior
        let p = self.degree;
        let idx = self.knots[p..=n].partition_point(|&k| k <= u);
        Ok(p + idx - 1)
    }

    /// Values of the `p + 1` basis functions that are nonzero at `u`.
    pub fn eval_basis(&self, u: f64) -> Result<BasisWindow> {
        let span = self.find_span(u)?;
        Ok(BasisWindow {
            first: span - self.degree,
            values: self.basis_at_span(span, u),
        })
    }

    fn basis_at_span(&self, span: usize, u: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - t[span + 1 - j];
            right[j] = t[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Basis values and derivatives up to `order` at `u`.
    pub fn eval_basis_derivatives(&self, u: f64, order: usize) -> Result<DerivativeWindow> {
        let p = self.degree;
        if order > p {
            return Err(Error::argument(format!("derivative order {order} exceeds degree {p}")));
        }
        let span = self.find_span(u)?;
        let t = &self.knots;

        // ndu: basis values in the upper triangle, knot differences in the lower
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - t[span + 1 - j];
            right[j] = t[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=order {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if rk >= 0 {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            row.iter_mut().for_each(|v| *v *= factor);
            factor *= (p - k) as f64;
        }
        Ok(DerivativeWindow {
            first: span - p,
            rows: ders,
        })
    }

    /// Greville abscissae: the `i`-th entry averages `knots[i+1..=i+p]`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.len())
            .map(|i| {
                if p == 0 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }

    /// Knot vector with `u` inserted once; errors if `u` is not strictly
    /// interior or already has multiplicity `p`.
    pub fn with_knot(&self, u: f64) -> Result<Self> {
        let (lo, hi) = self.domain();
        if !(u > lo && u < hi) {
            return Err(Error::argument(format!(
                "knot {u} must lie strictly inside ({lo}, {hi})"
            )));
        }
        if self.multiplicity(u) + 1 > self.degree.max(1) {
            return Err(Error::argument(format!(
                "inserting {u} would exceed multiplicity {}",
                self.degree
            )));
        }
        let pos = self.knots.partition_point(|&k| k <= u);
        let mut knots = self.knots.clone();
        knots.insert(pos, u);
        Ok(Self {
            knots,
            degree: self.degree,
        })
    }

    /// Midpoints of every nonempty span.
    pub fn span_midpoints(&self) -> Vec<f64> {
        self.breakpoints().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// True when every knot of `self` (with multiplicity) occurs in `other`.
    pub fn is_nested_in(&self, other: &KnotVector) -> bool {
        if self.degree != other.degree || self.domain() != other.domain() {
            return false;
        }
        let mut j = 0;
        for &k in &self.knots {
            while j < other.knots.len() && other.knots[j] < k {
                j += 1;
            }
            if j == other.knots.len() || other.knots[j] != k {
                return false;
            }
            j += 1;
        }
        true
    }

    /// Knots of `finer` that are missing from `self`, with multiplicity.
    pub(crate) fn missing_from(&self, finer: &KnotVector) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0;
        for &k in &finer.knots {
            if i < self.knots.len() && self.knots[i] == k {
                i += 1;
            } else {
                out.push(k);
            }
        }
        out
    }
}
