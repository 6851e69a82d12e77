//! Gauss–Legendre rules mapped onto knot spans.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::spline::{KnotVector, TensorBasis};

/// `(point, weight)` pairs of an `order`-point rule on every nonempty span.
pub fn span_rule(kv: &KnotVector, order: usize) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order).expect("quadrature order must be positive");
    let rule = GaussLegendre::new(order);
    let mut out = Vec::new();
    for w in kv.breakpoints().windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        // nodes come out in descending order
        let mut span: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, wt)| (mid + half * x, half * wt))
            .collect();
        span.sort_by(|l, r| l.0.total_cmp(&r.0));
        out.extend(span);
    }
    out
}

/// Tensor-product rule over all spans of `basis`, flattened with the first
/// direction slowest.
pub fn tensor_rule(basis: &TensorBasis, order: usize) -> Vec<(Vec<f64>, f64)> {
    let rules: Vec<Vec<(f64, f64)>> = basis.directions().iter().map(|kv| span_rule(kv, order)).collect();
    match rules.as_slice() {
        [r0] => r0.iter().map(|&(x, w)| (vec![x], w)).collect(),
        [r0, r1] => r0
            .iter()
            .flat_map(|&(x, wx)| r1.iter().map(move |&(y, wy)| (vec![x, y], wx * wy)))
            .collect(),
        _ => unreachable!("parametric dimension is 1 or 2"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let kv = KnotVector::uniform(2, 3, 0.0, 2.0).unwrap();
        let rule = span_rule(&kv, 3);
        assert_eq!(rule.len(), 9);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(5)).sum();
        assert!((integral - 64.0 / 6.0).abs() < 1e-12);
        assert!(rule.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
