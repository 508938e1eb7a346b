//! Small numerical helpers: log-sum-exp, a log-scale modified Bessel function of
//! the second kind, and sample quantiles.

use crate::error::{domain, Result};

pub use statrs::function::gamma::ln_gamma;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// ln K_ν(x) for x > 0 and any real ν.
///
/// Trapezoid rule on K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(ν t) dt, evaluated in log
/// space. The integrand is even and analytic in t, so the rule converges
/// geometrically; the step is tied to the width of the integrand's peak.
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite() && nu.is_finite()) {
        return Err(domain(format!("Bessel K needs x > 0 and finite order, got ν={nu}, x={x}")));
    }
    let nu = nu.abs();
    let g = |t: f64| -x * t.cosh() + ln_cosh(nu * t);
    // the log-integrand is maximized near sinh t = ν/x
    let t_peak = (nu / x).asinh();
    let g_peak = g(t_peak).max(g(0.0));
    let curvature = x * t_peak.cosh();
    let width = 1.0 / curvature.max(1e-300).sqrt();
    // stop once the bound -x cosh t + ν t falls 60 nats below the peak
    let mut upper = t_peak + 1.0;
    while -x * upper.cosh() + nu * upper > g_peak - 60.0 {
        upper *= 1.5;
    }
    let h = (0.1 * width).min(0.05);
    let steps = ((upper / h).ceil() as usize).clamp(64, 2_000_000);
    let h = upper / steps as f64;
    let mut terms = Vec::with_capacity(steps + 1);
    terms.push(g(0.0) + 0.5f64.ln());
    for k in 1..=steps {
        terms.push(g(k as f64 * h));
    }
    Ok(log_sum_exp(&terms) + h.ln())
}

fn ln_cosh(z: f64) -> f64 {
    let z = z.abs();
    z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2
}

/// Sample quantile with linear interpolation between order statistics
/// (position (n-1)q in the sorted sample). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(domain("quantile of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_basics() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_mean_exp(&[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.8
        assert!((ln_bessel_k(0.0, 1.0).unwrap().exp() - 0.42102443824070834).abs() < 1e-13);
        assert!((ln_bessel_k(1.0, 1.0).unwrap().exp() - 0.6019072301972346).abs() < 1e-13);
        assert!((ln_bessel_k(0.0, 0.1).unwrap().exp() - 2.427069024702017).abs() < 1e-12);
        assert!((ln_bessel_k(1.0, 10.0).unwrap().exp() - 1.864877345382558e-5).abs() < 1e-17);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        for &x in &[1e-3, 0.3, 1.0, 7.0, 300.0] {
            let exact = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
            let got = ln_bessel_k(0.5, x).unwrap();
            assert!((got - exact).abs() < 1e-11 * exact.abs().max(1.0), "x={x}: {got} vs {exact}");
            assert_eq!(got, ln_bessel_k(-0.5, x).unwrap());
        }
    }

    #[test]
    fn bessel_recurrence_large_order() {
        // K_{ν+1} = K_{ν-1} + (2ν/x) K_ν, checked in log space
        for &(nu, x) in &[(30.5f64, 2.0f64), (1500.0, 0.5), (3.3, 1e-4), (10.0, 50.0)] {
            let km = ln_bessel_k(nu - 1.0, x).unwrap();
            let k0 = ln_bessel_k(nu, x).unwrap();
            let kp = ln_bessel_k(nu + 1.0, x).unwrap();
            let rhs = log_sum_exp(&[km, k0 + (2.0 * nu / x).ln()]);
            assert!((kp - rhs).abs() < 1e-9 * kp.abs().max(1.0), "ν={nu}, x={x}: {kp} vs {rhs}");
        }
    }

    #[test]
    fn quantile_convention() {
        assert_eq!(quantiles(&[0.0, 1.0], &[0.025, 0.975]).unwrap(), vec![0.025, 0.975]);
        assert_eq!(quantiles(&[3.0, 1.0, 2.0], &[0.5]).unwrap(), vec![2.0]);
        assert_eq!(quantiles(&[5.0], &[0.1, 0.9]).unwrap(), vec![5.0, 5.0]);
        assert!(quantiles(&[], &[0.5]).is_err());
    }
}
