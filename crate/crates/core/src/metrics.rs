//! Scoring of tensor estimates against a known truth.
//!
//! Voxels split into a nonzero group (|truth| > 1e-12) and a zero group. Group
//! statistics are absent (`None`) when the group is empty.

use crate::error::{structural, Result};
use crate::simgen::SUPPORT_THRESHOLD;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseSplit {
    pub nonzero: Option<f64>,
    pub zero: Option<f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub nonzero: Option<f64>,
    pub zero: Option<f64>,
    pub overall: f64,
    pub length_nonzero: Option<f64>,
    pub length_zero: Option<f64>,
    pub mean_length: f64,
}

fn check_shapes(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(structural(format!("shape {:?} does not match {:?}", a.shape().dims(), b.shape().dims())));
    }
    Ok(())
}

fn group_mean(sum: f64, count: usize) -> Option<f64> {
    (count > 0).then(|| sum / count as f64)
}

pub fn rmse_split(estimate: &DenseTensor, truth: &DenseTensor) -> Result<RmseSplit> {
    check_shapes(estimate, truth)?;
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0, 0.0, 0);
    for (&e, &t) in estimate.values().iter().zip(truth.values()) {
        let d = (e - t) * (e - t);
        if t.abs() > SUPPORT_THRESHOLD {
            s1 += d;
            n1 += 1;
        } else {
            s0 += d;
            n0 += 1;
        }
    }
    Ok(RmseSplit {
        nonzero: group_mean(s1, n1).map(f64::sqrt),
        zero: group_mean(s0, n0).map(f64::sqrt),
        overall: ((s1 + s0) / (n1 + n0) as f64).sqrt(),
    })
}

pub fn coverage_length(lower: &DenseTensor, upper: &DenseTensor, truth: &DenseTensor) -> Result<Coverage> {
    check_shapes(lower, truth)?;
    check_shapes(upper, truth)?;
    let (mut c1, mut c0, mut l1, mut l0, mut n1, mut n0) = (0usize, 0usize, 0.0, 0.0, 0usize, 0usize);
    for (v, ((&lo, &hi), &t)) in lower.values().iter().zip(upper.values()).zip(truth.values()).enumerate() {
        if !(lo <= hi) {
            return Err(structural(format!("interval at voxel {v} has lower {lo} above upper {hi}")));
        }
        let hit = usize::from(lo <= t && t <= hi);
        if t.abs() > SUPPORT_THRESHOLD {
            c1 += hit;
            l1 += hi - lo;
            n1 += 1;
        } else {
            c0 += hit;
            l0 += hi - lo;
            n0 += 1;
        }
    }
    let n = (n1 + n0) as f64;
    Ok(Coverage {
        nonzero: group_mean(c1 as f64, n1),
        zero: group_mean(c0 as f64, n0),
        overall: (c1 + c0) as f64 / n,
        length_nonzero: group_mean(l1, n1),
        length_zero: group_mean(l0, n0),
        mean_length: (l1 + l0) / n,
    })
}

/// Scores for one fitted replicate. Coverage is absent for point estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rmse: RmseSplit,
    pub coverage: Option<Coverage>,
}

/// Metric names and groups in table order.
pub const METRIC_ROWS: [(&str, &str); 9] = [
    ("rmse", "nonzero"),
    ("rmse", "zero"),
    ("rmse", "overall"),
    ("coverage", "nonzero"),
    ("coverage", "zero"),
    ("coverage", "overall"),
    ("length", "nonzero"),
    ("length", "zero"),
    ("length", "overall"),
];

impl EvalReport {
    pub fn evaluate(estimate: &DenseTensor, interval: Option<(&DenseTensor, &DenseTensor)>, truth: &DenseTensor) -> Result<Self> {
        Ok(Self {
            rmse: rmse_split(estimate, truth)?,
            coverage: interval.map(|(lo, hi)| coverage_length(lo, hi, truth)).transpose()?,
        })
    }

    /// Values aligned with [`METRIC_ROWS`].
    pub fn values(&self) -> [Option<f64>; 9] {
        let c = self.coverage;
        [
            self.rmse.nonzero,
            self.rmse.zero,
            Some(self.rmse.overall),
            c.and_then(|c| c.nonzero),
            c.and_then(|c| c.zero),
            c.map(|c| c.overall),
            c.and_then(|c| c.length_nonzero),
            c.and_then(|c| c.length_zero),
            c.map(|c| c.mean_length),
        ]
    }
}

/// Across-replicate mean and standard deviation (n − 1 denominator) of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub group: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub replicates: usize,
}

/// Mean and sd of each metric over the replicates where it is present.
///
/// Values are summed in sorted order so the result does not depend on the
/// order of the replicates.
pub fn aggregate_replicates(reports: &[EvalReport]) -> Result<Vec<MetricSummary>> {
    if reports.is_empty() {
        return Err(structural("at least one replicate is required"));
    }
    let mut out = Vec::new();
    for (k, &(metric, group)) in METRIC_ROWS.iter().enumerate() {
        let mut xs: Vec<f64> = reports.iter().filter_map(|r| r.values()[k]).collect();
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        let (mean, sd) = mean_sd(&xs);
        out.push(MetricSummary { metric, group, mean, sd, replicates: xs.len() });
    }
    Ok(out)
}

/// Sample mean and sd with n − 1 denominator; sd is 0 for a single value.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}
