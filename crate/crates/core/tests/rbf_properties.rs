use nalgebra::DMatrix;
use proptest::prelude::*;
use spline_coupling::rbf::{check_consistency, Kernel, MappingMatrix, RbfInterpolant, VertexCloud};
use spline_coupling::Error;

/// Dense Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn tps(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn five_point_interpolant_matches_reference_solve() {
    let pts = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9], [0.8, 0.8], [0.45, 0.4]];
    let vals = [1.0, -0.5, 2.0, 0.25, 0.75];
    // raw saddle-point system in absolute coordinates
    let n = pts.len();
    let mut a = vec![vec![0.0; n + 3]; n + 3];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = tps(dist(&pts[i], &pts[j]));
        }
        let tail = [1.0, pts[i][0], pts[i][1]];
        for (c, t) in tail.iter().enumerate() {
            a[i][n + c] = *t;
            a[n + c][i] = *t;
        }
    }
    let mut b = vals.to_vec();
    b.extend([0.0; 3]);
    let x = gauss_solve(a, b);
    let reference = |q: &[f64]| -> f64 {
        let radial: f64 = (0..n).map(|i| x[i] * tps(dist(q, &pts[i]))).sum();
        radial + x[n] + x[n + 1] * q[0] + x[n + 2] * q[1]
    };

    let points = DMatrix::from_fn(n, 2, |i, c| pts[i][c]);
    let cloud = VertexCloud::with_data(points, DMatrix::from_column_slice(n, 1, &vals)).unwrap();
    let rbf = RbfInterpolant::build(&cloud, Kernel::ThinPlate).unwrap();
    for (got, want) in rbf.lambda().column(0).iter().zip(&x) {
        assert!((got - want).abs() < 1e-10);
    }
    assert!((rbf.beta0()[0] - x[n]).abs() < 1e-10);
    for q in [[0.1, 0.7], [0.5, 0.5], [0.95, 0.05], [0.0, 1.0]] {
        assert!((rbf.eval(&q).unwrap()[0] - reference(&q)).abs() < 1e-10);
    }
}

/// A jittered `k × k` grid on the unit square, lifted to `dim` coordinates.
fn jittered_cloud(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (3usize..7).prop_flat_map(move |k| {
        prop::collection::vec(-0.3f64..0.3, k * k * dim).prop_map(move |jit| {
            let h = 1.0 / (k - 1) as f64;
            DMatrix::from_fn(k * k, dim, |r, c| {
                let base = match c {
                    0 => (r % k) as f64 * h,
                    1 => (r / k) as f64 * h,
                    _ => 0.5,
                };
                base + jit[r * dim + c] * h
            })
        })
    })
}

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::ThinPlate),
        (1.0f64..4.0).prop_map(|shape| Kernel::Gaussian { shape })
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linear_fields_are_reproduced(
        seed in prop::array::uniform4(-2.0f64..2.0),
        pts in (2usize..=3).prop_flat_map(jittered_cloud),
        k in kernel(),
        q in prop::array::uniform3(0.0f64..1.0),
    ) {
        let dim = pts.ncols();
        let f = |x: &[f64]| seed[0] + x.iter().zip(&seed[1..]).map(|(a, b)| a * b).sum::<f64>();
        let data = DMatrix::from_fn(pts.nrows(), 1, |r, _| f(pts.row(r).transpose().as_slice()));
        let rbf = RbfInterpolant::build(&VertexCloud::with_data(pts, data).unwrap(), k).unwrap();
        let got = rbf.eval(&q[..dim]).unwrap()[0];
        prop_assert!((got - f(&q[..dim])).abs() < 1e-9, "got {got} expected {}", f(&q[..dim]));
    }

    #[test]
    fn mapping_rows_sum_to_one(src in jittered_cloud(2), dst in jittered_cloud(2), k in kernel()) {
        let m = MappingMatrix::build(&VertexCloud::new(src).unwrap(), &VertexCloud::new(dst).unwrap(), k).unwrap();
        prop_assert!(check_consistency(&m) < 1e-9);
        let ones = DMatrix::from_element(m.entries().ncols(), 1, 1.0);
        let mapped = m.apply(&ones).unwrap();
        prop_assert!(mapped.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}

#[test]
fn collinear_cloud_is_degenerate() {
    let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    let cloud = VertexCloud::with_data(pts, DMatrix::from_element(3, 1, 1.0)).unwrap();
    assert!(matches!(
        RbfInterpolant::build(&cloud, Kernel::ThinPlate),
        Err(Error::Argument(_))
    ));
}
