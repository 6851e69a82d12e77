use std::net::TcpListener;
use std::time::Duration;

use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::bus::{InProc, InterfaceDescription, Participant, Socket, Transport};
use spline_coupling::spline::TensorBasis;
use spline_coupling::wire::Role;

fn description() -> impl Strategy<Value = InterfaceDescription> {
    prop_oneof![
        (1usize..=2, 1usize..=4, 1usize..=6)
            .prop_map(|(k, p, r)| InterfaceDescription::Spline(TensorBasis::uniform(k, p, r).unwrap())),
        (1usize..12, prop::collection::vec(-1.0f64..1.0, 36)).prop_map(|(n, v)| {
            InterfaceDescription::Vertices(DMatrix::from_fn(n, 3, |i, j| v[i * 3 + j] + i as f64))
        }),
    ]
}

fn block(rows: usize, cols: usize, tag: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| tag + i as f64 * 0.5 - j as f64)
}

/// Runs `steps` exchanges; returns the data each side saw last and both
/// participants for inspection.
fn session<T: Transport + 'static>(
    ta: T,
    tb: T,
    da: InterfaceDescription,
    db: InterfaceDescription,
    comps: usize,
    steps: usize,
) -> (Participant, Participant, Vec<DMatrix<f64>>) {
    let mut a = Participant::new("a", Role::Fluid, da, comps, ta).unwrap();
    let mut b = Participant::new("b", Role::Structure, db, comps, tb).unwrap();
    let peer = std::thread::spawn(move || {
        b.handshake().unwrap();
        for s in 0..steps {
            b.exchange_step(&block(b.local().rows(), comps, -(s as f64))).unwrap();
        }
        b
    });
    a.handshake().unwrap();
    let mut got = Vec::new();
    for s in 0..steps {
        got.push(a.exchange_step(&block(a.local().rows(), comps, s as f64)).unwrap());
    }
    (a, peer.join().unwrap(), got)
}

fn knot_reals(d: &InterfaceDescription) -> u64 {
    match d {
        InterfaceDescription::Spline(b) => {
            let k = b.param_dim() as u64;
            let widest = b.directions().iter().map(|kv| kv.knots().len()).max().unwrap() as u64;
            k * k * widest
        }
        InterfaceDescription::Vertices(_) => 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn byte_counts_are_symmetric(da in description(), db in description(), comps in 1usize..=3, steps in 1usize..6) {
        let (ta, tb) = InProc::pair();
        let (a, b, got) = session(ta, tb, da.clone(), db.clone(), comps, steps);
        prop_assert_eq!(a.sent(), b.received());
        prop_assert_eq!(b.sent(), a.received());
        prop_assert_eq!(got.last().unwrap().shape(), (db.rows(), comps));
        let expect_a = 8 * (knot_reals(&da) + (steps * da.rows() * comps) as u64);
        prop_assert_eq!(a.sent().overhead_bytes(), expect_a);
        let expect_b = 8 * (knot_reals(&db) + (steps * db.rows() * comps) as u64);
        prop_assert_eq!(b.sent().overhead_bytes(), expect_b);
    }
}

#[test]
fn socket_and_inproc_sessions_agree() {
    let da = InterfaceDescription::Spline(TensorBasis::uniform(2, 3, 4).unwrap());
    let db = InterfaceDescription::Spline(TensorBasis::uniform(2, 2, 3).unwrap());
    let (ta, tb) = InProc::pair();
    let (a1, b1, got1) = session(ta, tb, da.clone(), db.clone(), 3, 5);

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let client = std::thread::spawn(move || Socket::connect(addr, Duration::from_secs(5)).unwrap());
    let server = Socket::accept(&listener).unwrap();
    let (a2, b2, got2) = session(server, client.join().unwrap(), da, db, 3, 5);

    assert_eq!(got1, got2);
    assert_eq!(a1.sent(), a2.sent());
    assert_eq!(b1.sent(), b2.sent());
    assert_eq!(a1.remote(), a2.remote());
}
