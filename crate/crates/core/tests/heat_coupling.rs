use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::heat::{
    run_benchmark, strip_basis, strip_block, strip_flux, BenchmarkConfig, HeatSubdomain, ManufacturedSolution,
    SubdomainKind,
};
use spline_coupling::spline::SplineField;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The strip payload carries exactly the normal derivative of the
    /// sender's field along the interface.
    #[test]
    fn strip_reproduces_interface_derivative(
        p in 2usize..=4,
        spans in 1usize..=5,
        vals in prop::collection::vec(-3.0f64..3.0, 100),
        y in 0.0f64..=1.0,
    ) {
        let sub = HeatSubdomain::new(SubdomainKind::Dirichlet, (0.0, 1.0), p, spans, ManufacturedSolution::default(), 0.1).unwrap();
        let n = sub.basis().len();
        let field = SplineField::new(sub.basis().clone(), DMatrix::from_fn(n, 1, |i, _| vals[i % vals.len()])).unwrap();
        let strip = SplineField::new(strip_basis(&sub).unwrap(), strip_block(&field)).unwrap();
        let flux = strip_flux(&strip).unwrap().eval(&[y]).unwrap()[0];
        let expect = field.gradient(&[1.0, y]).unwrap()[(0, 0)];
        prop_assert!((flux - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        // the strip agrees with the field on the interface itself
        let trace = strip.eval(&[1.0, y]).unwrap()[0];
        prop_assert!((trace - field.eval(&[1.0, y]).unwrap()[0]).abs() < 1e-12 * (1.0 + trace.abs()));
    }
}

#[test]
fn coupled_fields_are_continuous_across_the_interface() {
    let config = BenchmarkConfig {
        spans_dirichlet: 4,
        spans_neumann: 2,
        t_end: 0.3,
        ..Default::default()
    };
    let report = run_benchmark(&config).unwrap();
    assert_eq!(report.rows.len(), 3);
    let left = report.dirichlet.subdomain().field();
    let right = report.neumann.subdomain().field();
    for k in 0..=10 {
        let y = k as f64 / 10.0;
        let a = left.eval(&[1.0, y]).unwrap()[0];
        let b = right.eval(&[1.0, y]).unwrap()[0];
        assert!((a - b).abs() < 1e-10, "jump {} at y = {y}", a - b);
        let ga = left.gradient(&[1.0, y]).unwrap()[(0, 0)];
        let gb = right.gradient(&[1.0, y]).unwrap()[(0, 0)];
        assert!((ga - gb).abs() < 1e-9);
    }
    assert!((report.dirichlet.subdomain().time() - 0.3).abs() < 1e-12);
}
