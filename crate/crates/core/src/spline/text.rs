//! Plain-text spline exchange format.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! spline <param_dim> <dim> [rational]
//! knots <degree> <k_0> <k_1> ... <k_m>      # one line per direction
//! coefficients <n_total>
//! <c_1> ... <c_dim> [<weight>]              # n_total rows, flat-index order
//! ```
//!
//! Reals are written in Rust's shortest round-trip form, so writing and
//! reading a field reproduces every bit.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{KnotVector, SplineField, TensorBasis};
use crate::error::{Error, Result};

pub fn to_text(field: &SplineField) -> String {
    let mut out = String::new();
    let rational = field.weights().is_some();
    let _ = writeln!(
        out,
        "spline {} {}{}",
        field.basis().param_dim(),
        field.dim(),
        if rational { " rational" } else { "" }
    );
    for kv in field.basis().directions() {
        let _ = write!(out, "knots {}", kv.degree());
        for k in kv.knots() {
            let _ = write!(out, " {k:?}");
        }
        out.push('\n');
    }
    let c = field.coefficients();
    let _ = writeln!(out, "coefficients {}", c.nrows());
    for r in 0..c.nrows() {
        let mut row: Vec<String> = c.row(r).iter().map(|v| format!("{v:?}")).collect();
        if let Some(w) = field.weights() {
            row.push(format!("{:?}", w[r]));
        }
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn from_text(text: &str) -> Result<SplineField> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::format("empty spline file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (param_dim, dim, rational) = match h.as_slice() {
        ["spline", pd, d] => (parse_usize(pd)?, parse_usize(d)?, false),
        ["spline", pd, d, "rational"] => (parse_usize(pd)?, parse_usize(d)?, true),
        _ => return Err(Error::format(format!("bad header line: {header:?}"))),
    };
    let mut dirs = Vec::with_capacity(param_dim);
    for _ in 0..param_dim {
        let line = lines.next().ok_or_else(|| Error::format("missing knots line"))?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some("knots") {
            return Err(Error::format(format!("expected knots line, got {line:?}")));
        }
        let degree = parse_usize(tok.next().ok_or_else(|| Error::format("missing degree"))?)?;
        let knots = tok.map(parse_f64).collect::<Result<Vec<_>>>()?;
        dirs.push(KnotVector::new(knots, degree)?);
    }
    let basis = TensorBasis::new(dirs)?;
    let line = lines.next().ok_or_else(|| Error::format("missing coefficients line"))?;
    let count = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["coefficients", n] => parse_usize(n)?,
        _ => return Err(Error::format(format!("expected coefficients line, got {line:?}"))),
    };
    if count != basis.len() {
        return Err(Error::format(format!(
            "{count} coefficient rows declared for {} basis functions",
            basis.len()
        )));
    }
    let width = dim + usize::from(rational);
    let mut coeffs = DMatrix::zeros(count, dim);
    let mut weights = Vec::new();
    for r in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::format("truncated coefficient block"))?;
        let vals = line.split_whitespace().map(parse_f64).collect::<Result<Vec<_>>>()?;
        if vals.len() != width {
            return Err(Error::format(format!(
                "coefficient row {r} has {} values, expected {width}",
                vals.len()
            )));
        }
        for k in 0..dim {
            coeffs[(r, k)] = vals[k];
        }
        if rational {
            weights.push(vals[dim]);
        }
    }
    if let Some(extra) = lines.next() {
        return Err(Error::format(format!("trailing content: {extra:?}")));
    }
    if rational {
        SplineField::rational(basis, coeffs, weights)
    } else {
        SplineField::new(basis, coeffs)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::format(format!("not an integer: {s:?}")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::format(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_handwritten_fixture() {
        let text = "\
# bilinear patch
spline 2 2
knots 1 0 0 1 1
knots 1 0 0 1 1
coefficients 4
0 0
0 1
1 0
1 1
";
        let f = from_text(text).unwrap();
        assert_eq!(f.eval(&[0.25, 0.5]).unwrap(), vec![0.25, 0.5]);
        assert_eq!(from_text(&to_text(&f)).unwrap(), f);
    }

    #[test]
    fn rational_round_trip_is_bit_exact() {
        let kv = KnotVector::new(vec![0., 0., 0., 1., 1., 1.], 2).unwrap();
        let c = DMatrix::from_row_slice(3, 2, &[1., 0., 1., 1., 0., 1.]);
        let f = SplineField::rational(TensorBasis::curve(kv), c, vec![1.0, 0.1f64.sqrt(), 1.0]).unwrap();
        let g = from_text(&to_text(&f)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn malformed_inputs() {
        assert!(from_text("").is_err());
        assert!(from_text("spline 1 1\nknots 1 0 0 1 1\ncoefficients 3\n0\n1\n2\n").is_err());
        assert!(from_text("spline 1 1\nknots 1 0 0 1 1\ncoefficients 2\n0\n").is_err());
        assert!(from_text("spline 1 1\nknots 1 0 0 1 1\ncoefficients 2\n0\nx\n").is_err());
    }
}
