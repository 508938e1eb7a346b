//! Generalized inverse Gaussian variates.
//!
//! Density ∝ x^{p-1} exp(-(a x + b/x)/2) on (0, ∞). The generator follows
//! Hörmann & Leydold (2014): ratio-of-uniforms with mode shift for λ = |p| > 2 or
//! ω = √(ab) > 3, ratio-of-uniforms without shift in the middle region, and a
//! concave-hat rejection sampler for λ < 1 with small ω. The mode-shift branch is
//! written in mode-scaled coordinates so it stays accurate when λ is in the
//! thousands and ab underflows.

use std::f64::consts::PI;

use super::{sample_ln_gamma, RngStream};
use crate::error::{domain, numerical, Result};

const MAX_TRIALS: usize = 10_000_000;

/// Parameters of giG(p, a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
}

impl GigParams {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        let g = Self { p, a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { p, a, b } = *self;
        if !(p.is_finite() && a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
            return Err(domain(format!("invalid giG parameters ({p}, {a}, {b})")));
        }
        if a == 0.0 && b == 0.0 {
            return Err(domain("giG needs a > 0 or b > 0"));
        }
        if a == 0.0 && p >= 0.0 {
            return Err(domain(format!("giG with a = 0 needs p < 0, got p = {p}")));
        }
        if b == 0.0 && p <= 0.0 {
            return Err(domain(format!("giG with b = 0 needs p > 0, got p = {p}")));
        }
        Ok(())
    }
}

/// Mean of giG(p, a, b) by its Bessel ratio √(b/a) K_{p+1}(ω)/K_p(ω).
pub fn gig_mean(params: &GigParams) -> Result<f64> {
    params.validate()?;
    let GigParams { p, a, b } = *params;
    if b == 0.0 {
        return Ok(2.0 * p / a);
    }
    if a == 0.0 {
        return if p < -1.0 { Ok(b / (2.0 * (-p - 1.0))) } else { Ok(f64::INFINITY) };
    }
    let w = (a * b).sqrt();
    let ln = 0.5 * (b.ln() - a.ln()) + crate::special::ln_bessel_k(p + 1.0, w)? - crate::special::ln_bessel_k(p, w)?;
    Ok(ln.exp())
}

pub fn sample_gig(rng: &mut RngStream, params: &GigParams) -> Result<f64> {
    let x = sample_ln_gig(rng, params)?.exp();
    if !(x > 0.0 && x.is_finite()) {
        return Err(numerical(format!("giG draw {x} out of range for {params:?}")));
    }
    Ok(x)
}

/// log of a giG draw. Works when the draw itself would under- or overflow.
pub fn sample_ln_gig(rng: &mut RngStream, params: &GigParams) -> Result<f64> {
    params.validate()?;
    let GigParams { p, a, b } = *params;
    if b == 0.0 {
        return sample_ln_gamma(rng, p, a / 2.0);
    }
    if a == 0.0 {
        return Ok(-sample_ln_gamma(rng, -p, b / 2.0)?);
    }
    let lambda = p.abs();
    let ln_omega = 0.5 * (a.ln() + b.ln());
    // The factor exp(-b/2x) (or exp(-ax/2) for p < 0) only touches a sliver of mass of order ω^{2λ}.
    if lambda > 0.0 && 2.0 * lambda * ln_omega < -46.0 {
        return if p > 0.0 { sample_ln_gamma(rng, p, a / 2.0) } else { Ok(-sample_ln_gamma(rng, -p, b / 2.0)?) };
    }
    let omega = ln_omega.exp();
    // X = η Y for p ≥ 0 and η / Y for p < 0, Y standardized with parameters (λ, ω)
    let ln_eta = 0.5 * (b.ln() - a.ln());
    let sign = if p < 0.0 { -1.0 } else { 1.0 };
    if lambda > 2.0 || omega > 3.0 {
        // mode shift works on GIG(λ, a', b') directly, swapping a and b for p < 0
        let (aa, bb) = if p < 0.0 { (b, a) } else { (a, b) };
        let ln_x = rou_shift(rng, lambda, aa, bb)?;
        return Ok(sign * ln_x);
    }
    let ln_y = if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(rng, lambda, omega)?
    } else if omega > 0.0 {
        concave(rng, lambda, omega)?
    } else {
        return Err(numerical(format!("giG parameters ({p}, {a}, {b}) underflow")));
    };
    Ok(ln_eta + sign * ln_y)
}

/// Mode of the standardized density y^{λ-1} exp(-ω(y + 1/y)/2).
fn standard_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

/// Ratio-of-uniforms with mode shift; returns ln X for X ~ GIG(λ, a, b), λ ≥ 0.
///
/// With m the mode and Y = X/m the density of Y is y^{λ-1} exp(-(A y + B/y)/2)
/// where A = a m, B = b/m, AB = ab and A - B = 2(λ - 1), so the mode sits at 1.
fn rou_shift(rng: &mut RngStream, lambda: f64, a: f64, b: f64) -> Result<f64> {
    let ab = a * b;
    if !ab.is_finite() {
        return Err(numerical(format!("giG product ab overflows ({a} * {b})")));
    }
    let (big_a, big_b) = if lambda >= 1.0 {
        let num = (lambda - 1.0) + ((lambda - 1.0).powi(2) + ab).sqrt();
        (num, ab / num)
    } else {
        let den = (1.0 - lambda) + ((1.0 - lambda).powi(2) + ab).sqrt();
        (ab / den, den)
    };
    let ln_m = big_a.ln() - a.ln();
    let t = 0.5 * (lambda - 1.0);
    // ln √f(1+d) - ln √f(1)
    let h = |d: f64| t * d.ln_1p() - 0.25 * (big_a * d - big_b * d / (1.0 + d));

    // extremes of d √f(1+d) are roots of d³ + c2 d² + c1 d + c0
    let c2 = 2.0 - 2.0 * (lambda + 1.0) / big_a;
    let c1 = 1.0 - (2.0 * lambda + 6.0 + big_b) / big_a;
    let c0 = -4.0 / big_a;
    let pp = c1 - c2 * c2 / 3.0;
    let qq = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let r = (-(pp * pp * pp) / 27.0).sqrt();
    let fi = (-qq / (2.0 * r)).clamp(-1.0, 1.0).acos();
    let fak = 2.0 * r.cbrt();
    let d_plus = fak * (fi / 3.0).cos() - c2 / 3.0;
    let d_minus = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - c2 / 3.0;
    if !(d_plus > 0.0 && d_minus > -1.0 && d_minus < 0.0) {
        return Err(numerical(format!("giG bounding roots ({d_minus}, {d_plus}) invalid for λ={lambda}, ab={ab}")));
    }
    let u_plus = d_plus * h(d_plus).exp();
    let u_minus = d_minus * h(d_minus).exp();

    for _ in 0..MAX_TRIALS {
        let u = u_minus + rng.uniform() * (u_plus - u_minus);
        let v = rng.uniform_pos();
        let d = u / v;
        if d <= -1.0 {
            continue;
        }
        if v.ln() <= h(d) {
            return Ok(ln_m + d.ln_1p());
        }
    }
    Err(numerical(format!("giG mode-shift sampler exhausted trials for λ={lambda}, a={a}, b={b}")))
}

/// Ratio-of-uniforms without mode shift; returns ln Y, Y standardized.
fn rou_noshift(rng: &mut RngStream, lambda: f64, omega: f64) -> Result<f64> {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = standard_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0).powi(2) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    for _ in 0..MAX_TRIALS {
        let u = um * rng.uniform_pos();
        let v = rng.uniform_pos();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return Ok(x.ln());
        }
    }
    Err(numerical(format!("giG no-shift sampler exhausted trials for λ={lambda}, ω={omega}")))
}

/// Rejection from a three-piece hat (constant, power, exponential); λ < 1, small ω.
fn concave(rng: &mut RngStream, lambda: f64, omega: f64) -> Result<f64> {
    let xm = standard_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    if !total.is_finite() {
        return Err(numerical(format!("giG hat area overflows for λ={lambda}, ω={omega}")));
    }
    for _ in 0..MAX_TRIALS {
        let mut v = total * rng.uniform();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let start = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        if !(x > 0.0 && x.is_finite()) {
            continue;
        }
        let u = rng.uniform_pos() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return Ok(x.ln());
        }
    }
    Err(numerical(format!("giG concave sampler exhausted trials for λ={lambda}, ω={omega}")))
}
