use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::coupling::{build_space_transform, transfer_control_data, transfer_field};
use spline_coupling::spline::{KnotVector, SplineField, TensorBasis};
use spline_coupling::Error;

/// A coarse basis and a nested refinement obtained by adding random knots.
fn nested_pair() -> impl Strategy<Value = (TensorBasis, TensorBasis)> {
    (1usize..=2, 1usize..=4, 1usize..=4).prop_flat_map(|(k, p, r)| {
        let coarse = TensorBasis::uniform(k, p, r).unwrap();
        prop::collection::vec(prop::collection::btree_set(1u32..64, 0..5), k).prop_map(move |extra| {
            let dirs = coarse
                .directions()
                .iter()
                .zip(&extra)
                .map(|(kv, add)| {
                    let mut fine = kv.clone();
                    for &a in add {
                        let u = a as f64 / 64.0;
                        if fine.multiplicity(u) < fine.degree() {
                            fine = fine.with_knot(u).unwrap();
                        }
                    }
                    fine
                })
                .collect();
            (coarse.clone(), TensorBasis::new(dirs).unwrap())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn refine_then_coarsen_is_identity(
        (coarse, fine) in nested_pair(),
        vals in prop::collection::vec(-1.0f64..1.0, 150),
        x in prop::array::uniform2(0.0f64..=1.0),
    ) {
        let n = coarse.len();
        let c = DMatrix::from_fn(n, 2, |i, j| vals[(2 * i + j) % vals.len()]);
        let up = build_space_transform(&coarse, &fine).unwrap();
        let down = build_space_transform(&fine, &coarse).unwrap();
        let fine_c = transfer_control_data(&up, &c).unwrap();
        let back = transfer_control_data(&down, &fine_c).unwrap();
        prop_assert!((&back - &c).amax() < 1e-10);

        // refinement leaves the field itself unchanged
        let f = SplineField::new(coarse.clone(), c).unwrap();
        let g = transfer_field(&up, &f).unwrap();
        let xi = &x[..coarse.param_dim()];
        let (a, b) = (f.eval(xi).unwrap(), g.eval(xi).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

#[test]
fn crossing_refinements_are_rejected() {
    let a = TensorBasis::curve(KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0], 2).unwrap());
    let b = TensorBasis::curve(KnotVector::new(vec![0.0, 0.0, 0.0, 0.25, 1.0, 1.0, 1.0], 2).unwrap());
    assert!(matches!(build_space_transform(&a, &b), Err(Error::Unsupported(_))));
}
