//! Joint-distribution ("getting it right") harness for the Gibbs sampler.
//!
//! Marginal-conditional simulator: θ from the prior, y | θ. Successive-conditional
//! simulator: alternate y | θ and one Gibbs sweep θ | y. Both target the same joint
//! law, so moments of (σ², τ, B_v) must agree.

use mdgdp::prior::default_hyper;
use mdgdp::random::RngStream;
use mdgdp::sampler::{draw_from_prior, draw_response, sweep, ChainState, FitCache, GriddyMode, NoisePrior, RegressionData, SweepSettings};
use mdgdp::prior::MdgdpHyper;
use mdgdp::tensor::TensorShape;
use nalgebra::DMatrix;

const VOXEL: usize = 3;

pub struct Setup {
    pub data: RegressionData,
    pub hyper: MdgdpHyper,
    pub settings: SweepSettings,
}

pub fn setup(mode: GriddyMode) -> Setup {
    let mut rng = RngStream::new(2024);
    let n = 8;
    let shape = TensorShape::new(vec![2, 2]).unwrap();
    let x: Vec<f64> = (0..n * 4).map(|_| rng.standard_normal()).collect();
    let z = DMatrix::from_fn(n, 1, |_, _| rng.standard_normal());
    let data = RegressionData::from_flat(shape, vec![0.0; n], z, x).unwrap();
    let mut hyper = default_hyper(2, 2);
    // finite fourth moments of B and σ² so that second moments have usable standard errors
    hyper.a_lambda = 10.0;
    let settings = SweepSettings {
        griddy_mode: mode,
        griddy_samples: 10,
        noise: NoisePrior { v: 12.0, s0sq: 1.0 },
        gamma_prior_variance: 1.0,
    };
    Setup { data, hyper, settings }
}

fn functionals(s: &ChainState) -> [f64; 6] {
    let b = s.factors.assemble().values()[VOXEL];
    [s.sigma2, s.prior.tau, b, s.sigma2 * s.sigma2, s.prior.tau * s.prior.tau, b * b]
}

const NAMES: [&str; 6] = ["sigma2", "tau", "B_v", "sigma2^2", "tau^2", "B_v^2"];

fn marginal_conditional(setup: &Setup, draws: usize, seed: u64) -> Vec<[f64; 6]> {
    let mut rng = RngStream::new(seed);
    (0..draws)
        .map(|_| functionals(&draw_from_prior(&mut rng, &setup.data, &setup.hyper, &setup.settings).unwrap()))
        .collect()
}

fn successive_conditional(setup: &Setup, sweeps: usize, seed: u64) -> Vec<[f64; 6]> {
    let mut rng = RngStream::new(seed);
    let mut state = draw_from_prior(&mut rng, &setup.data, &setup.hyper, &setup.settings).unwrap();
    let mut cache = FitCache::new(&setup.data, &state).unwrap();
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let y = draw_response(&mut rng, &setup.data, &state).unwrap();
        let data = setup.data.with_response(y).unwrap();
        sweep(&mut rng, &mut state, &data, &setup.hyper, &setup.settings, &mut cache).unwrap();
        out.push(functionals(&state));
    }
    out
}

fn mean_and_batch_se(xs: &[[f64; 6]], k: usize, batches: usize) -> (f64, f64) {
    let n = xs.len();
    let m = xs.iter().map(|x| x[k]).sum::<f64>() / n as f64;
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().map(|x| x[k]).sum::<f64>() / size as f64)
        .collect();
    let var = bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

/// Returns the largest |z| over the six functionals, printing each comparison.
pub fn geweke_max_z(mode: GriddyMode, sweeps: usize) -> f64 {
    let setup = setup(mode);
    let mc = marginal_conditional(&setup, sweeps, 11);
    let sc = successive_conditional(&setup, sweeps, 12);
    let mut worst = 0.0f64;
    for k in 0..6 {
        let (m1, s1) = mean_and_batch_se(&mc, k, 100);
        let (m2, s2) = mean_and_batch_se(&sc, k, 100);
        let z = (m1 - m2) / (s1 * s1 + s2 * s2).sqrt();
        println!("{mode:?} {:9} marginal {m1:.5} ± {s1:.5}  successive {m2:.5} ± {s2:.5}  z = {z:+.2}", NAMES[k]);
        worst = worst.max(z.abs());
    }
    worst
}


/// Largest relative gap between the two simulators over σ², τ, σ⁴ and τ².
pub fn max_relative_gap(mode: GriddyMode, sweeps: usize) -> f64 {
    let setup = setup(mode);
    let mc = marginal_conditional(&setup, sweeps, 21);
    let sc = successive_conditional(&setup, sweeps, 22);
    [0, 1, 3, 4]
        .iter()
        .map(|&k| {
            let (m1, _) = mean_and_batch_se(&mc, k, 100);
            let (m2, _) = mean_and_batch_se(&sc, k, 100);
            ((m1 - m2) / m1).abs()
        })
        .fold(0.0, f64::max)
}
