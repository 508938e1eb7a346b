//! Geweke test of the sampler in both griddy-Gibbs modes.

mod support;

use mdgdp::sampler::GriddyMode;
use support::geweke::geweke_max_z;

#[test]
fn geweke_exact_griddy() {
    let z = geweke_max_z(GriddyMode::Exact, 100_000);
    assert!(z < 3.0, "max |z| = {z}");
}

/// The Monte Carlo weights are noisy, so this mode is only an approximation of
/// the α conditional; check that it stays close rather than exact.
#[test]
fn monte_carlo_griddy_is_close() {
    let rel = support::geweke::max_relative_gap(GriddyMode::MonteCarlo, 100_000);
    assert!(rel < 0.05, "largest relative moment gap {rel}");
}
