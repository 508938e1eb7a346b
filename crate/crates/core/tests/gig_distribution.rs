//! Distributional checks of the giG sampler against a quadrature oracle.

mod support;

use mdgdp::random::{sample_gig, GigParams, RngStream};
use support::gig::{grid_for, ks_cases, ks_statistic, mean_se, moment, moment_cases, moment_z};

#[test]
fn moments_match_quadrature_on_parameter_grid() {
    let cases = moment_cases();
    assert!(cases.len() >= 12);
    for (i, g) in cases.iter().enumerate() {
        let z = moment_z(g, 100_000, 1000 + i as u64);
        assert!(z < 4.0, "{g:?}: moment z = {z}");
    }
}

#[test]
fn kolmogorov_smirnov_against_integrated_cdf() {
    for (i, g) in ks_cases().iter().enumerate() {
        let (d, crit) = ks_statistic(g, 20_000, 77 + i as u64);
        assert!(d < crit, "{g:?}: KS statistic {d} exceeds {crit}");
    }
}

#[test]
fn large_negative_order_mean() {
    let g = GigParams::new(-30.5, 0.6, 7.2).unwrap();
    let mut rng = RngStream::new(5);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_gig(&mut rng, &g).unwrap()).collect();
    let (m, se) = mean_se(&xs);
    let expect = moment(&g, &grid_for(&g), 1.0);
    assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect}");
}
