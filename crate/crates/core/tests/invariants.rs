use gp_limit_lab::harness::{fit_loglog_slope, run_rate_experiment, ExperimentConfig};
use gp_limit_lab::hermite::{Activation, PolynomialCoefficients};
use gp_limit_lab::process::rng::{normal_vector, stream_rng};
use gp_limit_lab::process::{column_covariance, column_covariance_stderr, feature_sum_sample, sphere_sample};
use gp_limit_lab::tensor::{covariance_analytic, gaussian_moment, spectrum, FeatureMap};
use gp_limit_lab::transport::{estimate_w2, w2_exact, EmpiricalSample, TransportOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_form_reproduces_polynomial_of_inner_product(
        a in prop::collection::vec(-2.0f64..2.0, 1..5),
        x in prop::collection::vec(-1.0f64..1.0, 3),
        y in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3) && y.iter().any(|v| v.abs() > 1e-3));
        let p = PolynomialCoefficients::new(a);
        let map = FeatureMap::new(&p, 3).unwrap();
        let (x, y) = (unit(x), unit(y));
        let (px, py) = (map.embed(&x), map.embed(&y));
        let dot: f64 = x.iter().zip(&y).map(|(s, t)| s * t).sum();
        let q = map.q_form(&px, &py).unwrap();
        prop_assert!((q - p.eval(dot)).abs() <= 1e-10 * (1.0 + p.abs_sum()));
        prop_assert!((q - map.q_form(&py, &px).unwrap()).abs() <= 1e-14 * (1.0 + q.abs()));
    }

    #[test]
    fn analytic_covariance_is_symmetric_psd(
        a in prop::collection::vec(-1.0f64..1.0, 2..5),
        n in 1usize..5,
    ) {
        let cov = covariance_analytic(&PolynomialCoefficients::new(a), n).unwrap();
        prop_assert_eq!(&cov.matrix, &cov.matrix.transpose());
        let s = spectrum(&cov).unwrap();
        prop_assert!(s.min() >= -1e-10 * s.max().max(1.0));
    }

    #[test]
    fn exact_transport_is_a_symmetric_nonnegative_semimetric(seed in 0u64..1000, shift in -2.0f64..2.0) {
        let mut rng = stream_rng(seed, 0, 0);
        let va = normal_vector(&mut rng, 60);
        let vb = normal_vector(&mut rng, 60);
        let a = EmpiricalSample::new(DMatrix::from_fn(30, 2, |i, j| va[2 * i + j]), "a").unwrap();
        let b = EmpiricalSample::new(DMatrix::from_fn(30, 2, |i, j| vb[2 * i + j] + shift), "b").unwrap();
        let ab = w2_exact(&a, &b).unwrap().value;
        let ba = w2_exact(&b, &a).unwrap().value;
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert_eq!(w2_exact(&a, &a).unwrap().value, 0.0);
    }
}

#[test]
fn feature_sum_second_moment_matches_analytic_covariance_plus_mean() {
    // X_k = k^{-1/2} sum s_i P(w_i) has zero mean and covariance E[P P^T]
    let poly = PolynomialCoefficients::new(vec![0.5, 1.0, 1.0]);
    let (map, sample) = feature_sum_sample(&poly, 2, 4, 40_000, 11).unwrap();
    let sigma = covariance_analytic(&poly, 2).unwrap().matrix;
    let mean: Vec<f64> =
        map.basis().index_list.iter().zip(map.scales()).map(|(idx, s)| s * gaussian_moment(idx)).collect();
    let dim = map.dim();
    let expected = DMatrix::from_fn(dim, dim, |i, j| sigma[(i, j)] + mean[i] * mean[j]);
    let cov = column_covariance(&sample);
    let se = column_covariance_stderr(&sample);
    for i in 0..dim {
        for j in 0..dim {
            let gap = (cov[(i, j)] - expected[(i, j)]).abs();
            assert!(gap <= 5.0 * se[(i, j)] + 1e-12, "({i},{j}): {} vs {}", cov[(i, j)], expected[(i, j)]);
        }
    }
}

#[test]
fn identity_activation_is_gaussian_at_every_width() {
    // the network is exactly Gaussian for a linear activation, so its
    // estimates sit at the two-sample floor for every width
    let cfg = ExperimentConfig::from_text("activation = identity\nreps = 128\npoints = 3\nbootstrap = 0\nk_grid = 1, 4, 16, 64")
        .unwrap();
    let report = run_rate_experiment(&cfg).unwrap();
    let pts = sphere_sample(cfg.n, cfg.points, cfg.point_seed).unwrap();
    let kernel = DMatrix::from_fn(3, 3, |i, j| pts.dot(i, j));
    let chol = kernel.clone().cholesky().unwrap().l();
    let draw = |seed: u64| {
        let mut rng = stream_rng(seed, 0, 0);
        let z = normal_vector(&mut rng, 3 * 128);
        let z = DMatrix::from_fn(128, 3, |r, c| z[3 * r + c]);
        EmpiricalSample::new(z * chol.transpose(), "").unwrap()
    };
    let opts = TransportOptions { bootstrap: 0, ..Default::default() };
    let floor: Vec<f64> = (0..8).map(|s| estimate_w2(&draw(2 * s), &draw(2 * s + 1), &opts).unwrap().value / 3.0).collect();
    let hi = floor.iter().cloned().fold(0.0, f64::max);
    for row in &report.rows {
        let v = row.estimate.as_ref().unwrap().value;
        assert!(v <= 2.0 * hi, "k={}: {v} vs floor up to {hi}", row.k);
    }
}

#[test]
fn rate_config_rejects_bad_grids() {
    assert!(ExperimentConfig::from_text("k_grid =").is_err());
    assert!(ExperimentConfig::from_text("k_grid = 16, 8").is_err());
    assert!(ExperimentConfig::from_text("k_grid = 0, 8").is_err());
}

#[test]
fn fit_matches_power_law_with_noise_free_input() {
    let pairs: Vec<(f64, f64)> = (4..=12).map(|e| 2f64.powi(e)).map(|k| (k, 5.0 * k.powf(-0.5))).collect();
    let fit = fit_loglog_slope(&pairs).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12 && (fit.intercept - 5f64.ln()).abs() < 1e-12);
}

#[test]
fn activation_specs_round_trip() {
    for spec in ["relu", "tanh", "poly:0,0,1", "poly:1,-2,0.5"] {
        let a: Activation = spec.parse().unwrap();
        assert_eq!(a.to_string(), spec);
    }
}
