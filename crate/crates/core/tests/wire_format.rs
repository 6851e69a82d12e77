use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::spline::{KnotVector, TensorBasis};
use spline_coupling::wire::{decode_knot_matrix, encode_knot_matrix, Payload, Role, WireFrame};

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn knot_matrix_frame_matches_golden_bytes() {
    let basis = TensorBasis::uniform(2, 2, 2).unwrap();
    let bytes = WireFrame::knots(Role::Fluid, &basis).encode();
    assert_eq!(bytes, fixture("knot_matrix_r2_p2.bin"));
    let back = WireFrame::decode(&bytes).unwrap();
    assert_eq!(back.basis.as_ref(), Some(&basis));
}

#[test]
fn control_frame_matches_golden_bytes() {
    let basis = TensorBasis::uniform(1, 1, 2).unwrap();
    let block = DMatrix::from_column_slice(3, 1, &[1.5, -2.0, 0.25]);
    let bytes = WireFrame::control(Role::Neumann, Some(&basis), block.clone()).encode();
    assert_eq!(bytes, fixture("control_curve.bin"));
    assert_eq!(WireFrame::decode(&bytes).unwrap().payload, Payload::Control(block));
}

#[test]
fn vertex_and_status_frames_match_golden_bytes() {
    let pts = DMatrix::from_row_slice(2, 3, &[0.0, 0.25, 0.0, 0.5, 1.0, -0.125]);
    assert_eq!(WireFrame::vertices(Role::Fluid, pts).encode(), fixture("vertices.bin"));
    let status = fixture("status_converged.bin");
    assert_eq!(WireFrame::status(Role::Dirichlet, true).encode(), status);
    assert_eq!(WireFrame::decode(&status).unwrap().payload, Payload::Converged);
}

fn knot_vector() -> impl Strategy<Value = KnotVector> {
    (1usize..=5, prop::collection::btree_set(1u32..200, 0..8)).prop_map(|(p, set)| {
        let mut k = vec![0.0; p + 1];
        k.extend(set.into_iter().map(|v| v as f64 / 200.0));
        k.extend(vec![1.0; p + 1]);
        KnotVector::new(k, p).unwrap()
    })
}

fn basis() -> impl Strategy<Value = TensorBasis> {
    prop::collection::vec(knot_vector(), 1..=2).prop_map(|d| TensorBasis::new(d).unwrap())
}

fn role() -> impl Strategy<Value = Role> {
    prop_oneof![
        Just(Role::Fluid),
        Just(Role::Structure),
        Just(Role::Dirichlet),
        Just(Role::Neumann)
    ]
}

fn any_bits() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(f64::from_bits)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn knot_matrix_round_trips(b in basis()) {
        let m = encode_knot_matrix(&b);
        prop_assert_eq!(decode_knot_matrix(&m, &b.degrees()).unwrap(), b);
    }

    #[test]
    fn knot_frames_round_trip_bit_exact(b in basis(), r in role()) {
        let bytes = WireFrame::knots(r, &b).encode();
        let back = WireFrame::decode(&bytes).unwrap();
        prop_assert_eq!(back.basis.as_ref(), Some(&b));
        prop_assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn data_frames_round_trip_bit_exact(
        r in role(),
        rows in 1usize..20,
        cols in 1usize..4,
        vals in prop::collection::vec(any_bits(), 80),
        vertex in any::<bool>(),
    ) {
        let block = DMatrix::from_fn(rows, cols, |i, j| vals[i * cols + j]);
        let frame = if vertex { WireFrame::vertices(r, block) } else { WireFrame::control(r, None, block) };
        let bytes = frame.encode();
        prop_assert_eq!(bytes.len(), 18 + 8 * rows * cols);
        prop_assert_eq!(WireFrame::decode(&bytes).unwrap().encode(), bytes.clone());
        // truncation anywhere is rejected
        prop_assert!(WireFrame::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
