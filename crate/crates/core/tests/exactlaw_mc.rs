mod common;

use common::Oracle;
use gaussmin::corrmat::{cosine_covariance, gram_factor};
use gaussmin::exactlaw::*;
use gaussmin::montecarlo::{estimate_moment, estimate_tail_curve, ks_critical, ks_one_sample, ks_two_sample, sample_min};
use gaussmin::quad::integrate;
use gaussmin::rng::RngStream;

#[test]
fn tail_at_point_three_matches_ten_million_draws() {
    let m = cosine_covariance(4).unwrap();
    let curve = estimate_tail_curve(&m, &[0.3], 10_000_000, RngStream::new(21, 0)).unwrap();
    let exact = cos_tail(4, 0.3).unwrap();
    let se = curve.std_errors()[0];
    assert!(common::within_sigma(curve.estimates[0], exact, se, 4.0), "{} vs {exact} (se {se})", curve.estimates[0]);
}

#[test]
fn first_moment_at_eight_matches_ten_million_draws() {
    let m = cosine_covariance(8).unwrap();
    let est = estimate_moment(&m, 1.0, 10_000_000, RngStream::new(22, 0)).unwrap();
    let exact = cos_moment(8, 1.0).unwrap();
    assert!(common::within_sigma(est.mean, exact, est.std_error, 4.0), "{} vs {exact}", est.mean);
}

#[test]
fn sampler_mean_square_and_ks_against_exact_tail() {
    let samples = sample_cos_min(4, 1_000_000, 9).unwrap();
    assert!(samples.iter().all(|&x| x >= 0.0));
    let squares: Vec<f64> = samples.iter().map(|x| x * x).collect();
    let (mean, se) = common::mean_and_se(&squares);
    assert!(common::within_sigma(mean, cos_moment_p2(4).unwrap(), se, 4.0));

    let head = &samples[..100_000];
    let law = CosineLaw::new(4).unwrap();
    let d = ks_one_sample(head, |t| 1.0 - law.tail(t));
    assert!(d < 1.95 / (100_000f64).sqrt(), "KS statistic {d}");
}

#[test]
fn sampler_matches_planar_projection_law() {
    // min_j |<z, v_j>| with v_j = (cos(jπ/n), sin(jπ/n)) and z planar Gaussian.
    for n in [3usize, 4, 7] {
        let mut rng = Oracle::new(100 + n as u64);
        let planar: Vec<f64> = (0..100_000)
            .map(|_| {
                let (x, y) = (rng.normal(), rng.normal());
                (0..n)
                    .map(|j| {
                        let a = j as f64 * std::f64::consts::PI / n as f64;
                        (x * a.cos() + y * a.sin()).abs()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let samples = sample_cos_min(n, 100_000, 3).unwrap();
        let d = ks_two_sample(&samples, &planar);
        assert!(d < ks_critical(100_000, 100_000, 0.001), "n = {n}: D = {d}");
    }
}

#[test]
fn tail_moment_identity_with_outer_quadrature() {
    for n in [2usize, 4, 8] {
        for p in [1.0, 2.0] {
            let outer = integrate(|t| p * t.powf(p - 1.0) * cos_tail(n, t).unwrap(), 0.0, 10.0, 1e-11, 200_000);
            let direct = cos_moment(n, p).unwrap();
            assert!((outer.value - direct).abs() < 1e-8, "n = {n}, p = {p}: {} vs {direct}", outer.value);
        }
    }
}

#[test]
fn tail_is_strictly_decreasing_and_vanishes() {
    for n in [1usize, 2, 3, 5, 8, 16, 32] {
        assert_eq!(cos_tail(n, 0.0).unwrap(), 1.0);
        let reach = 4.0 * (std::f64::consts::PI / (2.0 * n as f64)).sin();
        let grid: Vec<f64> = (0..100).map(|i| reach * i as f64 / 99.0).collect();
        let values: Vec<f64> = grid.iter().map(|&t| cos_tail(n, t).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "n = {n}");
        assert!(cos_tail(n, 10.0).unwrap() < 1e-12);
    }
}

#[test]
fn library_sampler_agrees_with_generic_estimator() {
    let gf = gram_factor(&cosine_covariance(5).unwrap()).unwrap();
    let generic = sample_min(&gf, 100_000, RngStream::new(4, 7));
    let special = sample_cos_min(5, 100_000, 8).unwrap();
    assert!(ks_two_sample(&generic, &special) < ks_critical(100_000, 100_000, 0.001));
}
