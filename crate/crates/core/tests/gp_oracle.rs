mod support;

use support::dense::{lu, DenseGp};
use uqsched_core::{fit, RqKernelParams};

fn fixtures() -> Vec<DenseGp> {
    vec![
        DenseGp {
            xs: vec![1.0, 2.0, 3.0],
            ys: vec![2.0, 4.0, 6.0],
            s2: 10.0,
            l: 1.5,
            alpha: 1.0,
            noise: 0.1,
        },
        DenseGp {
            xs: vec![60.0, 95.0, 120.0, 240.0, 410.0],
            ys: vec![11.0, 20.5, 23.0, 49.0, 80.0],
            s2: 900.0,
            l: 120.0,
            alpha: 2.0,
            noise: 2.0,
        },
        DenseGp {
            xs: vec![-3.0, -1.0, 0.0, 0.5, 2.0, 7.0],
            ys: vec![0.3, -0.2, 0.9, 1.1, -0.5, 0.0],
            s2: 1.3,
            l: 0.8,
            alpha: 0.5,
            noise: 0.05,
        },
        DenseGp {
            xs: vec![5.0],
            ys: vec![-4.0],
            s2: 2.0,
            l: 3.0,
            alpha: 1.0,
            noise: 0.7,
        },
    ]
}

fn library(g: &DenseGp) -> uqsched_core::GprModel {
    let p = RqKernelParams::new(g.s2, g.l, g.alpha, g.noise).unwrap();
    fit(&g.xs, &g.ys, p, false).unwrap()
}

#[test]
fn predictions_match_dense_solve() {
    for g in fixtures() {
        let m = library(&g);
        let queries: Vec<f64> = g.xs.iter().copied().chain([0.0, 1.7, 100.0, 333.3]).collect();
        for x in queries {
            let (mean, var) = g.predict(x);
            let p = m.predict(x);
            assert!(
                (p.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()),
                "mean at {x}: {} vs {mean}",
                p.mean
            );
            assert!(
                (p.std * p.std - var).abs() <= 1e-9 * (1.0 + var.abs()),
                "var at {x}"
            );
        }
    }
}

#[test]
fn log_marginal_likelihood_matches_dense_solve() {
    for g in fixtures() {
        let expected = g.log_marginal_likelihood();
        let got = library(&g).log_marginal_likelihood();
        assert!(
            (got - expected).abs() <= 1e-9 * (1.0 + expected.abs()),
            "{got} vs {expected}"
        );
    }
}

#[test]
fn three_points_on_a_line_by_hand_built_system() {
    let g = &fixtures()[0];
    // Hand-assembled 3x3 system solved independently.
    let k = |a: f64, b: f64| support::dense::rq(a, b, g.s2, g.l, g.alpha);
    let gram: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| k(g.xs[i], g.xs[j]) + if i == j { 0.01 } else { 0.0 })
                .collect()
        })
        .collect();
    let w = lu(gram).solve(&g.ys);
    let m = library(g);
    for (i, &x) in g.xs.iter().enumerate() {
        let expected: f64 = (0..3).map(|j| k(x, g.xs[j]) * w[j]).sum();
        assert!((m.predict(x).mean - expected).abs() < 1e-9, "point {i}");
    }
}

#[test]
fn variance_at_training_points_is_bounded() {
    for g in fixtures() {
        let m = library(&g);
        for &x in &g.xs {
            let v = m.predict(x).std.powi(2);
            assert!(v >= 0.0 && v <= g.s2 + g.noise * g.noise);
        }
    }
}

#[test]
fn near_noiseless_interpolation() {
    let g = DenseGp {
        xs: vec![10.0, 40.0, 90.0],
        ys: vec![3.0, -7.0, 12.0],
        s2: 100.0,
        l: 20.0,
        alpha: 1.0,
        noise: 1e-6,
    };
    let m = library(&g);
    for (&x, &y) in g.xs.iter().zip(&g.ys) {
        assert!((m.predict(x).mean - y).abs() / y.abs() < 1e-3);
    }
}
