//! Simulation scenarios.
//!
//! * `Generated2d`: a rank-R0 sum of outer products of contiguous ±1 runs,
//!   rescaled so that max|B| = b̄.
//! * `MaskImage`: a graymap file thresholded at half gray.
//! * `Case3d(1..=3)`: the fixed 30×30×30 sin/cos rank-2 tensors.
//!
//! Responses follow y_i = z_i'γ0 + ⟨X_i, B⟩ + σ0 ε_i with iid N(0,1) voxels.

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::DMatrix;

use crate::error::{structural, Error, Result};
use crate::pgm;
use crate::random::RngStream;
use crate::sampler::RegressionData;
use crate::tensor::{DenseTensor, ParafacFactors, TensorShape};

/// Voxels with |b| above this count as nonzero.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Allowed gap between achieved and target sparsity for generated tensors.
pub const SPARSITY_TOLERANCE: f64 = 0.03;

const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Generated2d,
    MaskImage { path: PathBuf },
    Case3d(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Tensor dimensions. Ignored for masks (taken from the image) and 3D cases (30³).
    pub shape: Vec<usize>,
    pub true_rank: usize,
    pub sparsity: f64,
    pub b_bar: f64,
    pub n: usize,
    pub sigma0: f64,
    pub gamma0: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn generated_2d(p: usize, true_rank: usize, sparsity: f64, n: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Generated2d,
            shape: vec![p, p],
            true_rank,
            sparsity,
            b_bar: 1.0,
            n,
            sigma0: 1.0,
            gamma0: Vec::new(),
            seed,
        }
    }

    pub fn case_3d(case: u8, n: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Case3d(case),
            shape: vec![30, 30, 30],
            true_rank: 2,
            sparsity: 1.0,
            b_bar: 1.0,
            n,
            sigma0: 1.0,
            gamma0: vec![0.5, 2.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::Domain(format!("sparsity must lie in (0, 1], got {}", self.sparsity)));
        }
        if !(self.b_bar > 0.0 && self.b_bar.is_finite()) {
            return Err(Error::Domain(format!("b_bar must be positive, got {}", self.b_bar)));
        }
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Domain(format!("sigma0 must be non-negative, got {}", self.sigma0)));
        }
        if self.gamma0.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("gamma0 must be finite".into()));
        }
        match &self.kind {
            ScenarioKind::Generated2d => {
                if self.shape.len() != 2 || self.shape.contains(&0) {
                    return Err(structural("generated scenarios need a positive 2D shape"));
                }
                if self.true_rank == 0 {
                    return Err(Error::Domain("true rank must be at least 1".into()));
                }
            }
            ScenarioKind::Case3d(c) if !(1..=3).contains(c) => {
                return Err(Error::Domain(format!("3D case must be 1, 2 or 3, got {c}")));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    /// Raw (unstandardized) predictors and response.
    pub data: RegressionData,
    pub b_true: DenseTensor,
    pub gamma_true: Vec<f64>,
    pub sigma0: f64,
    /// Fraction of voxels with |b| > [`SUPPORT_THRESHOLD`].
    pub sparsity: f64,
    pub kind: ScenarioKind,
}

pub fn support_fraction(b: &DenseTensor) -> f64 {
    b.values().iter().filter(|v| v.abs() > SUPPORT_THRESHOLD).count() as f64 / b.values().len() as f64
}

/// A run of `len` entries starting at `start`, all equal to `sign`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub start: usize,
    pub len: usize,
    pub sign: f64,
}

impl Run {
    fn to_vec(self, p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        for x in &mut v[self.start..self.start + self.len] {
            *x = self.sign;
        }
        v
    }
}

/// Σ_r u_r ∘ v_r with margins given as runs, rescaled so max|B| = b̄.
pub fn rank_r_from_runs(shape: &[usize], runs: &[(Run, Run)], b_bar: f64) -> Result<DenseTensor> {
    if shape.len() != 2 {
        return Err(structural("run tensors are 2D"));
    }
    let margins = runs
        .iter()
        .map(|(u, v)| {
            if u.len == 0 || u.start + u.len > shape[0] || v.len == 0 || v.start + v.len > shape[1] {
                return Err(structural("run outside the margin"));
            }
            Ok(vec![u.to_vec(shape[0]), v.to_vec(shape[1])])
        })
        .collect::<Result<Vec<_>>>()?;
    let b = ParafacFactors::new(TensorShape::new(shape.to_vec())?, margins)?.assemble();
    let m = b.max_abs();
    if m == 0.0 {
        return Err(Error::Generation("components cancel to a zero tensor".into()));
    }
    let shape = b.shape().clone();
    DenseTensor::new(shape, b.into_values().into_iter().map(|x| x / m * b_bar).collect())
}

fn random_run(rng: &mut RngStream, p: usize, len: usize) -> Run {
    let len = len.clamp(1, p);
    let start = rng.index(p - len + 1);
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    Run { start, len, sign }
}

/// Low-rank blocky 2D truth. Each component covers roughly sparsity/R0 of the
/// image with a random aspect ratio; draws are retried until the achieved
/// sparsity lands within [`SPARSITY_TOLERANCE`] of the target.
pub fn gen_rank_r_2d(rng: &mut RngStream, spec: &ScenarioSpec) -> Result<DenseTensor> {
    spec.validate()?;
    if spec.kind != ScenarioKind::Generated2d {
        return Err(structural("gen_rank_r_2d needs a generated-2d scenario"));
    }
    let (p1, p2) = (spec.shape[0], spec.shape[1]);
    let r0 = spec.true_rank;
    for _ in 0..MAX_RETRIES {
        let runs: Vec<(Run, Run)> = (0..r0)
            .map(|_| {
                let area = spec.sparsity / r0 as f64 * (0.5 + rng.uniform());
                let ratio = (2.0f64).powf(2.0 * rng.uniform() - 1.0);
                let l1 = (p1 as f64 * (area * ratio).sqrt()).round() as usize;
                let l2 = (p2 as f64 * (area / ratio).sqrt()).round() as usize;
                (random_run(rng, p1, l1), random_run(rng, p2, l2))
            })
            .collect();
        let b = match rank_r_from_runs(&spec.shape, &runs, spec.b_bar) {
            Ok(b) => b,
            Err(Error::Generation(_)) => continue,
            Err(e) => return Err(e),
        };
        if (support_fraction(&b) - spec.sparsity).abs() <= SPARSITY_TOLERANCE {
            return Ok(b);
        }
    }
    Err(Error::Generation(format!(
        "no rank-{r0} tensor within {SPARSITY_TOLERANCE} of sparsity {} after {MAX_RETRIES} draws",
        spec.sparsity
    )))
}

pub fn load_mask_image(path: &std::path::Path, b_bar: f64) -> Result<DenseTensor> {
    Ok(pgm::read_pgm(path)?.to_mask(b_bar))
}

#[derive(Clone, Copy)]
enum Trig {
    Sin,
    Cos,
}

#[derive(Clone, Copy)]
enum Pad {
    Leading,
    Trailing,
}

/// f((1:len)·π/div) padded with zeros to length 30. Values within 1e-12 of 0
/// are exact zeros of the trig function and are snapped to 0.
fn trig_margin(f: Trig, len: usize, div: f64, pad: Pad) -> Vec<f64> {
    let core: Vec<f64> = (1..=len)
        .map(|k| {
            let x = k as f64 * PI / div;
            let v = match f {
                Trig::Sin => x.sin(),
                Trig::Cos => x.cos(),
            };
            if v.abs() < 1e-12 {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut out = vec![0.0; 30];
    match pad {
        Pad::Leading => out[30 - len..].copy_from_slice(&core),
        Pad::Trailing => out[..len].copy_from_slice(&core),
    }
    out
}

/// Margins [[b1, b2, b3], [a1, a2, a3]] of a 3D case.
pub fn case_3d_margins(case: u8) -> Result<Vec<Vec<Vec<f64>>>> {
    use Pad::*;
    use Trig::*;
    let q = 4.0;
    let s = 6.0;
    let (b12, b3, a1, a2, a3) = match case {
        1 => ((Sin, 15, q), (Sin, 10, q), (Sin, 10, q), (Cos, 15, q), (Sin, 15, q)),
        2 => ((Sin, 15, s), (Sin, 20, s), (Sin, 15, q), (Cos, 10, s), (Sin, 15, s)),
        3 => ((Sin, 20, s), (Sin, 20, s), (Sin, 10, q), (Cos, 20, q), (Sin, 20, s)),
        _ => return Err(Error::Domain(format!("3D case must be 1, 2 or 3, got {case}"))),
    };
    let lead = |(f, l, d): (Trig, usize, f64)| trig_margin(f, l, d, Leading);
    let trail = |(f, l, d): (Trig, usize, f64)| trig_margin(f, l, d, Trailing);
    Ok(vec![vec![lead(b12), lead(b12), trail(b3)], vec![lead(a1), lead(a2), trail(a3)]])
}

pub fn gen_3d_case(case: u8) -> Result<DenseTensor> {
    let shape = TensorShape::new(vec![30, 30, 30])?;
    Ok(ParafacFactors::new(shape, case_3d_margins(case)?)?.assemble())
}

/// Fixed-effect design. 3D cases with two effects use an N(0,1) "age" column and
/// a ±1 "sex" column; every other scenario uses iid N(0,1) columns.
pub fn gen_covariates(rng: &mut RngStream, kind: &ScenarioKind, n: usize, q: usize) -> DMatrix<f64> {
    let sex_column = matches!(kind, ScenarioKind::Case3d(_)) && q == 2;
    let mut z = DMatrix::zeros(n, q);
    for i in 0..n {
        for k in 0..q {
            z[(i, k)] = if sex_column && k == 1 {
                if rng.uniform() < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                rng.standard_normal()
            };
        }
    }
    z
}

pub fn simulate_response(rng: &mut RngStream, b_true: &DenseTensor, spec: &ScenarioSpec, z: DMatrix<f64>) -> Result<GeneratedDataset> {
    spec.validate()?;
    let n = spec.n;
    if z.nrows() != n || z.ncols() != spec.gamma0.len() {
        return Err(structural(format!(
            "Z is {}×{}, expected {n}×{}",
            z.nrows(),
            z.ncols(),
            spec.gamma0.len()
        )));
    }
    let nv = b_true.values().len();
    let mut x = vec![0.0; n * nv];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &mut x[i * nv..(i + 1) * nv];
        for v in row.iter_mut() {
            *v = rng.standard_normal();
        }
        let signal: f64 = row.iter().zip(b_true.values()).map(|(a, b)| a * b).sum();
        let fixed: f64 = (0..spec.gamma0.len()).map(|k| z[(i, k)] * spec.gamma0[k]).sum();
        y[i] = fixed + signal + spec.sigma0 * rng.standard_normal();
    }
    let data = RegressionData::from_flat(b_true.shape().clone(), y, z, x)?;
    Ok(GeneratedDataset {
        data,
        sparsity: support_fraction(b_true),
        b_true: b_true.clone(),
        gamma_true: spec.gamma0.clone(),
        sigma0: spec.sigma0,
        kind: spec.kind.clone(),
    })
}

/// Builds the truth for a scenario. Generated truths use the `"truth"` substream.
pub fn scenario_truth(spec: &ScenarioSpec) -> Result<DenseTensor> {
    spec.validate()?;
    match &spec.kind {
        ScenarioKind::Generated2d => gen_rank_r_2d(&mut RngStream::new(spec.seed).substream("truth", 0), spec),
        ScenarioKind::MaskImage { path } => load_mask_image(path, spec.b_bar),
        ScenarioKind::Case3d(c) => gen_3d_case(*c),
    }
}

/// Full dataset for one replicate. The truth is shared across replicates; the
/// design and noise of replicate k come from seed `spec.seed + k`.
pub fn generate(spec: &ScenarioSpec, truth: &DenseTensor, replicate: u64) -> Result<GeneratedDataset> {
    let mut rng = RngStream::new(spec.seed.wrapping_add(replicate)).substream("data", 0);
    let z = gen_covariates(&mut rng, &spec.kind, spec.n, spec.gamma0.len());
    simulate_response(&mut rng, truth, spec, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonzero(b: &DenseTensor) -> usize {
        b.values().iter().filter(|v| v.abs() > SUPPORT_THRESHOLD).count()
    }

    #[test]
    fn single_voxel_run() {
        let one = Run { start: 3, len: 1, sign: 1.0 };
        let b = rank_r_from_runs(&[8, 8], &[(one, one)], 1.0).unwrap();
        assert_eq!(nonzero(&b), 1);
        assert_eq!(support_fraction(&b), 1.0 / 64.0);
        assert_eq!(b.get(&[3, 3]).unwrap(), 1.0);
    }

    #[test]
    fn rescale_hits_b_bar_exactly() {
        let u = Run { start: 0, len: 4, sign: 1.0 };
        let v = Run { start: 2, len: 3, sign: -1.0 };
        let w = Run { start: 1, len: 2, sign: -1.0 };
        let b = rank_r_from_runs(&[6, 6], &[(u, v), (w, v)], 0.7).unwrap();
        assert_eq!(b.max_abs(), 0.7);
    }

    #[test]
    fn generated_within_tolerance_and_deterministic() {
        let spec = ScenarioSpec::generated_2d(64, 3, 0.07, 10, 11);
        let b = scenario_truth(&spec).unwrap();
        let s = support_fraction(&b);
        assert!((0.04..=0.10).contains(&s), "{s}");
        assert_eq!(b.max_abs(), 1.0);
        assert_eq!(scenario_truth(&spec).unwrap(), b);
    }

    #[test]
    fn generated_is_rank_r0() {
        let spec = ScenarioSpec::generated_2d(64, 3, 0.07, 10, 5);
        let b = scenario_truth(&spec).unwrap();
        let m = DMatrix::from_column_slice(64, 64, b.values());
        let sv = m.singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[3] < 1e-10 * sv[0], "{:?}", &sv[..5]);
    }

    #[test]
    fn infeasible_sparsity_fails() {
        // one rank-1 block on a 2×2 grid can only cover 1/4, 1/2 or all of it
        let mut spec = ScenarioSpec::generated_2d(2, 1, 0.4, 1, 0);
        spec.shape = vec![2, 2];
        assert!(matches!(gen_rank_r_2d(&mut RngStream::new(0), &spec), Err(Error::Generation(_))));
    }

    /// Exact value of sin or cos at a multiple of 15° as (sign, 4·value²).
    fn exact_trig(cos: bool, deg: i64) -> (i64, i64) {
        let d = (if cos { deg + 90 } else { deg }).rem_euclid(360);
        let sq4 = match d % 180 {
            0 => 0,
            30 | 150 => 1,
            45 | 135 => 2,
            60 | 120 => 3,
            90 => 4,
            _ => unreachable!(),
        };
        (if d < 180 { 1 } else { -1 }, sq4)
    }

    /// Support of b1∘b2∘b3 + a1∘a2∘a3 in exact arithmetic. Every margin entry is
    /// ±√(m/4) with integer m, so a voxel vanishes iff both triple products share
    /// the same magnitude with opposite signs (or both are zero).
    fn analytic_support(case: u8) -> usize {
        // (is_cos, len, div, leading)
        type M = (bool, usize, i64, bool);
        let margin = |&(c, len, div, lead): &M| -> Vec<(i64, i64)> {
            (0..30)
                .map(|i| {
                    let k = if lead { i as i64 - (30 - len as i64) + 1 } else { i as i64 + 1 };
                    if k < 1 || k > len as i64 { (0, 0) } else { exact_trig(c, k * 180 / div) }
                })
                .collect()
        };
        let (b12, b3, a1, a2, a3): (M, M, M, M, M) = match case {
            1 => ((false, 15, 4, true), (false, 10, 4, false), (false, 10, 4, true), (true, 15, 4, true), (false, 15, 4, false)),
            2 => ((false, 15, 6, true), (false, 20, 6, false), (false, 15, 4, true), (true, 10, 6, true), (false, 15, 6, false)),
            _ => ((false, 20, 6, true), (false, 20, 6, false), (false, 10, 4, true), (true, 20, 4, true), (false, 20, 6, false)),
        };
        let (bb, b3, a1, a2, a3) = (margin(&b12), margin(&b3), margin(&a1), margin(&a2), margin(&a3));
        let mut count = 0;
        for i in 0..30 {
            for j in 0..30 {
                for k in 0..30 {
                    let sb = bb[i].0 * bb[j].0 * b3[k].0;
                    let mb = bb[i].1 * bb[j].1 * b3[k].1;
                    let sa = a1[i].0 * a2[j].0 * a3[k].0;
                    let ma = a1[i].1 * a2[j].1 * a3[k].1;
                    let cancels = (mb == 0 && ma == 0) || (mb == ma && sb == -sa);
                    if !cancels {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn case_support_matches_count() {
        for case in 1..=3 {
            let b = gen_3d_case(case).unwrap();
            assert_eq!(nonzero(&b), analytic_support(case), "case {case}");
        }
        assert_eq!(analytic_support(1), 1824);
    }

    #[test]
    fn case_entries_match_formula() {
        let b = gen_3d_case(2).unwrap();
        let lead = |v: usize, len: usize, f: fn(f64) -> f64, d: f64| if v >= 30 - len { f((v + len + 1 - 30) as f64 * PI / d) } else { 0.0 };
        let trail = |v: usize, len: usize, d: f64| if v < len { ((v + 1) as f64 * PI / d).sin() } else { 0.0 };
        for &(i, j, k) in &[(29, 29, 0), (20, 25, 3), (16, 29, 14), (0, 0, 0), (29, 22, 19)] {
            let want = lead(i, 15, f64::sin, 6.0) * lead(j, 15, f64::sin, 6.0) * trail(k, 20, 6.0)
                + lead(i, 15, f64::sin, 4.0) * lead(j, 10, f64::cos, 6.0) * trail(k, 15, 6.0);
            assert!((b.get(&[i, j, k]).unwrap() - want).abs() < 1e-12, "({i},{j},{k})");
        }
    }

    #[test]
    fn noiseless_response_is_linear_predictor() {
        let mut spec = ScenarioSpec::case_3d(1, 4, 3);
        spec.sigma0 = 0.0;
        let b = gen_3d_case(1).unwrap();
        let d = generate(&spec, &b, 0).unwrap();
        for i in 0..4 {
            let fixed = d.data.z()[(i, 0)] * 0.5 + d.data.z()[(i, 1)] * 2.0;
            let signal: f64 = d.data.x_row(i).iter().zip(b.values()).map(|(x, w)| x * w).sum();
            assert_eq!(d.data.y()[i], fixed + signal);
            assert!(d.data.z()[(i, 1)].abs() == 1.0);
        }
    }

    #[test]
    fn response_variance_decomposition() {
        let spec = ScenarioSpec { sigma0: 0.8, n: 1000, ..ScenarioSpec::generated_2d(8, 2, 0.2, 1000, 9) };
        let b = scenario_truth(&spec).unwrap();
        let d = generate(&spec, &b, 0).unwrap();
        let y = d.data.y();
        let m = y.iter().sum::<f64>() / 1000.0;
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 999.0;
        let want = 0.64 + b.frobenius_norm().powi(2);
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");

        let null = DenseTensor::zeros(b.shape().clone());
        let d = generate(&spec, &null, 1).unwrap();
        let m = d.data.y().iter().sum::<f64>() / 1000.0;
        let var = d.data.y().iter().map(|v| (v - m).powi(2)).sum::<f64>() / 999.0;
        assert!((var / 0.64 - 1.0).abs() < 0.12, "{var}");
    }

    #[test]
    fn replicates_differ_and_repeat() {
        let spec = ScenarioSpec::generated_2d(6, 1, 0.2, 5, 1);
        let b = scenario_truth(&spec).unwrap();
        let a = generate(&spec, &b, 0).unwrap();
        assert_eq!(a, generate(&spec, &b, 0).unwrap());
        assert_ne!(a.data.y(), generate(&spec, &b, 1).unwrap().data.y());
    }
}
