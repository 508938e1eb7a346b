//! Quadrature oracle for the giG law: the density is integrated directly on a
//! log-x grid (no Bessel functions).

use mdgdp::random::{sample_gig, GigParams, RngStream};

/// Unnormalized log density of u = ln X, plus k u for the k-th moment.
pub fn log_kernel(g: &GigParams, k: f64, u: f64) -> f64 {
    (g.p + k) * u - 0.5 * (g.a * u.exp() + g.b * (-u).exp())
}

pub struct Grid {
    pub u: Vec<f64>,
    pub h: f64,
}

pub fn grid_for(g: &GigParams) -> Grid {
    // locate the peak of the u-density by a coarse scan, then refine
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..4 {
        let n = 2000;
        let step = (hi - lo) / n as f64;
        let mut best = lo;
        for i in 0..=n {
            let u = lo + i as f64 * step;
            if log_kernel(g, 0.0, u) > log_kernel(g, 0.0, best) {
                best = u;
            }
        }
        lo = best - 20.0 * step;
        hi = best + 20.0 * step;
    }
    let peak = 0.5 * (lo + hi);
    let top = log_kernel(g, 0.0, peak);
    let mut left = peak - 0.01;
    while log_kernel(g, 0.0, left) > top - 50.0 {
        left -= 0.01 + (peak - left);
    }
    let mut right = peak + 0.01;
    while log_kernel(g, 0.0, right) > top - 50.0 {
        right += 0.01 + (right - peak);
    }
    let n = 200_000;
    let h = (right - left) / n as f64;
    Grid { u: (0..=n).map(|i| left + i as f64 * h).collect(), h }
}

pub fn moment(g: &GigParams, grid: &Grid, k: f64) -> f64 {
    let logs: Vec<f64> = grid.u.iter().map(|&u| log_kernel(g, k, u)).collect();
    let log0: Vec<f64> = grid.u.iter().map(|&u| log_kernel(g, 0.0, u)).collect();
    let m = log0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let num: f64 = logs.iter().map(|&l| (l - m).exp()).sum::<f64>() * grid.h;
    let den: f64 = log0.iter().map(|&l| (l - m).exp()).sum::<f64>() * grid.h;
    num / den
}

pub fn cdf_table(g: &GigParams, grid: &Grid) -> Vec<f64> {
    let log0: Vec<f64> = grid.u.iter().map(|&u| log_kernel(g, 0.0, u)).collect();
    let m = log0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = log0.iter().map(|&l| (l - m).exp()).collect();
    let mut cdf = vec![0.0; dens.len()];
    for i in 1..dens.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * grid.h;
    }
    let total = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|c| *c /= total);
    cdf
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// The moment test grid: 5 orders × 3 (a, b) pairs.
pub fn moment_cases() -> Vec<GigParams> {
    let mut cases = Vec::new();
    for &p in &[-40.0, -12.5, -1.0, 0.3, 5.0] {
        for &(a, b) in &[(0.1, 50.0), (10.0, 0.1), (1.0, 3.0)] {
            cases.push(GigParams::new(p, a, b).unwrap());
        }
    }
    cases
}

/// Largest |sample − quadrature| / se over E[X] and E[1/X].
pub fn moment_z(g: &GigParams, n: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let xs: Vec<f64> = (0..n).map(|_| sample_gig(&mut rng, g).unwrap()).collect();
    let inv: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
    let grid = grid_for(g);
    let (m1, se1) = mean_se(&xs);
    let (mi, sei) = mean_se(&inv);
    let z1 = (m1 - moment(g, &grid, 1.0)).abs() / se1;
    let zi = (mi - moment(g, &grid, -1.0)).abs() / sei;
    z1.max(zi)
}

pub fn ks_cases() -> [GigParams; 3] {
    [
        GigParams::new(-30.5, 0.6, 7.2).unwrap(),
        GigParams::new(0.5, 0.05, 0.4).unwrap(),
        GigParams::new(1.5, 2.0, 1.0).unwrap(),
    ]
}

/// Kolmogorov–Smirnov statistic of n draws (computed on ln X) and the
/// asymptotic critical value at level 0.001.
pub fn ks_statistic(g: &GigParams, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = RngStream::new(seed);
    let mut us: Vec<f64> = (0..n).map(|_| sample_gig(&mut rng, g).unwrap().ln()).collect();
    us.sort_by(f64::total_cmp);
    let grid = grid_for(g);
    let cdf = cdf_table(g, &grid);
    let eval = |u: f64| {
        if u <= grid.u[0] {
            return 0.0;
        }
        let pos = (u - grid.u[0]) / grid.h;
        let k = pos.floor() as usize;
        if k + 1 >= cdf.len() {
            return 1.0;
        }
        let f = pos - k as f64;
        cdf[k] + f * (cdf[k + 1] - cdf[k])
    };
    let mut dmax = 0.0f64;
    for (k, &u) in us.iter().enumerate() {
        let f = eval(u);
        dmax = dmax.max((f - k as f64 / n as f64).abs()).max(((k + 1) as f64 / n as f64 - f).abs());
    }
    (dmax, 1.9495 / (n as f64).sqrt())
}
