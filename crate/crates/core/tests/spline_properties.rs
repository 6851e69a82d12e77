use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::spline::{text, KnotVector, SplineField, TensorBasis};

/// Textbook recursive definition, with the last basis function closed at the
/// right end of the domain.
fn reference_basis(knots: &[f64], p: usize, i: usize, u: f64) -> f64 {
    let hi = *knots.last().unwrap();
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        if u == hi {
            return if b == hi && a < b { 1.0 } else { 0.0 };
        }
        return if a <= u && u < b { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (u - knots[i]) / d1 * reference_basis(knots, p - 1, i, u);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - u) / d2 * reference_basis(knots, p - 1, i + 1, u);
    }
    v
}

/// Open knot vector on [0, 1] from sorted interior breakpoints.
fn open_knots(p: usize, mut interior: Vec<f64>) -> Vec<f64> {
    interior.sort_by(f64::total_cmp);
    interior.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut k = vec![0.0; p + 1];
    k.extend(interior);
    k.extend(vec![1.0; p + 1]);
    k
}

fn knot_vector() -> impl Strategy<Value = KnotVector> {
    (1usize..=4, prop::collection::vec(0.01f64..0.99, 0..6))
        .prop_map(|(p, interior)| KnotVector::new(open_knots(p, interior), p).unwrap())
}

fn surface_field() -> impl Strategy<Value = SplineField> {
    (knot_vector(), knot_vector(), 1usize..=3).prop_flat_map(|(u, v, d)| {
        let basis = TensorBasis::surface(u, v);
        let n = basis.len();
        prop::collection::vec(-1.0f64..1.0, n * d)
            .prop_map(move |c| SplineField::new(basis.clone(), DMatrix::from_vec(n, d, c)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn basis_matches_recursive_definition(kv in knot_vector(), u in 0.0f64..=1.0) {
        let w = kv.eval_basis(u).unwrap();
        let n = kv.len();
        for i in 0..n {
            let expect = reference_basis(kv.knots(), kv.degree(), i, u);
            let got = if i >= w.first && i < w.first + w.values.len() { w.values[i - w.first] } else { 0.0 };
            prop_assert!((got - expect).abs() < 1e-12, "i={i} got {got} expected {expect}");
        }
    }

    #[test]
    fn tensor_basis_partitions_unity(u in knot_vector(), v in knot_vector(), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let basis = TensorBasis::surface(u, v);
        let sum: f64 = basis.eval_nonzero(&[x, y]).unwrap().iter().map(|(_, v)| v).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let grad: f64 = basis.eval_nonzero_gradients(&[x, y]).unwrap().iter().map(|(_, _, g)| g[0] + g[1]).sum();
        prop_assert!(grad.abs() < 1e-9);
    }

    #[test]
    fn knot_insertion_preserves_field(f in surface_field(), dir in 0usize..2, t in 0.02f64..0.98, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let g = f.insert_knot(dir, t).unwrap();
        prop_assert_eq!(g.basis().len(), f.basis().len() + g.basis().sizes()[1 - dir] );
        let a = f.eval(&[x, y]).unwrap();
        let b = g.eval(&[x, y]).unwrap();
        for (a, b) in a.iter().zip(&b) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact(f in surface_field()) {
        let back = text::from_text(&text::to_text(&f)).unwrap();
        prop_assert_eq!(back.basis(), f.basis());
        prop_assert_eq!(back.coefficients(), f.coefficients());
    }
}

#[test]
fn greville_points_reproduce_linear_geometry() {
    let kv = KnotVector::new(open_knots(3, vec![0.2, 0.5, 0.7]), 3).unwrap();
    let g = kv.greville();
    let basis = TensorBasis::curve(kv);
    let f = SplineField::new(basis, DMatrix::from_column_slice(g.len(), 1, &g)).unwrap();
    for i in 0..=20 {
        let u = i as f64 / 20.0;
        assert!((f.eval(&[u]).unwrap()[0] - u).abs() < 1e-14);
    }
}
