//! Saliency evaluation: MAE, 256-level PR curves and F-measure.
//!
//! Conventions: a pixel is predicted salient at threshold `t` when
//! `round(S·255) > t`; precision is 1 when nothing is predicted; recall is
//! 1 when the ground truth has no salient pixels (the image is flagged
//! degenerate); F is 0 when its denominator vanishes.

use crate::error::{invalid, Error, Result};
use crate::labelgen::Mask;
use crate::tensor::Tensor;

pub const LEVELS: usize = 256;
pub const DEFAULT_BETA2: f64 = 0.3;

fn check_pair(op: &'static str, s: &Tensor, gt: &Mask) -> Result<()> {
    let (c, h, w) = s.chw()?;
    for (dim, expected, got) in [
        ("channels", 1, c),
        ("height", gt.height(), h),
        ("width", gt.width(), w),
    ] {
        if expected != got {
            return Err(Error::Shape { op, dim, expected, got });
        }
    }
    Ok(())
}

/// Mean absolute per-pixel difference between a map and the ground truth.
pub fn mae(s: &Tensor, gt: &Mask) -> Result<f64> {
    check_pair("mae", s, gt)?;
    let total: f64 = s
        .data()
        .iter()
        .zip(gt.as_slice())
        .map(|(&v, &g)| (v - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(total / s.len() as f64)
}

/// 8-bit level of a saliency value in `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// One point per threshold `t = 0..=255`.
    pub points: Vec<PrPoint>,
    /// Ground truth had no salient pixels.
    pub degenerate: bool,
}

pub fn pr_curve(s: &Tensor, gt: &Mask) -> Result<PrCurve> {
    check_pair("pr_curve", s, gt)?;
    let mut pos = [0usize; LEVELS];
    let mut neg = [0usize; LEVELS];
    for (&v, &g) in s.data().iter().zip(gt.as_slice()) {
        let q = quantize(v) as usize;
        if g {
            pos[q] += 1;
        } else {
            neg[q] += 1;
        }
    }
    let total_pos: usize = pos.iter().sum();
    let mut points = vec![
        PrPoint {
            precision: 0.0,
            recall: 0.0
        };
        LEVELS
    ];
    // walk thresholds downward so TP/FP accumulate levels q > t
    let (mut tp, mut fp) = (0usize, 0usize);
    for t in (0..LEVELS).rev() {
        if t + 1 < LEVELS {
            tp += pos[t + 1];
            fp += neg[t + 1];
        }
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if total_pos == 0 {
            1.0
        } else {
            tp as f64 / total_pos as f64
        };
        points[t] = PrPoint { precision, recall };
    }
    Ok(PrCurve {
        points,
        degenerate: total_pos == 0,
    })
}

/// Weighted harmonic mean `(1 + b2)·P·R / (b2·P + R)`.
pub fn f_measure(precision: f64, recall: f64, beta2: f64) -> f64 {
    let denom = beta2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta2) * precision * recall / denom
    }
}

fn max_mean(values: &[f64]) -> (f64, f64) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max, mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageReport {
    pub name: String,
    pub mae: f64,
    pub pr: PrCurve,
    /// F-measure per threshold.
    pub f: Vec<f64>,
    pub max_f: f64,
    pub mean_f: f64,
}

pub fn evaluate_image(name: impl Into<String>, s: &Tensor, gt: &Mask, beta2: f64) -> Result<ImageReport> {
    let mae = mae(s, gt)?;
    let pr = pr_curve(s, gt)?;
    let f: Vec<f64> = pr
        .points
        .iter()
        .map(|p| f_measure(p.precision, p.recall, beta2))
        .collect();
    let (max_f, mean_f) = max_mean(&f);
    Ok(ImageReport {
        name: name.into(),
        mae,
        pr,
        f,
        max_f,
        mean_f,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub images: Vec<ImageReport>,
    pub mean_mae: f64,
    /// Per-threshold F averaged over images.
    pub mean_f_curve: Vec<f64>,
    /// Per-threshold precision and recall averaged over images.
    pub mean_pr: Vec<PrPoint>,
    /// Max and mean over thresholds of `mean_f_curve` (primary convention).
    pub max_f: f64,
    pub mean_f: f64,
    /// Image-averaged per-image max and mean F (secondary convention).
    pub per_image_max_f: f64,
    pub per_image_mean_f: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub degenerate: usize,
}

/// Dataset-level figures; curves are averaged over images before taking
/// max/mean over thresholds. Images are reduced in the given order.
pub fn aggregate(images: Vec<ImageReport>, skipped: usize) -> Result<MetricsReport> {
    if images.is_empty() {
        return Err(invalid("aggregate: no evaluated images"));
    }
    let n = images.len() as f64;
    let mut f_curve = vec![0.0; LEVELS];
    let mut pr = vec![
        PrPoint {
            precision: 0.0,
            recall: 0.0
        };
        LEVELS
    ];
    let mut mae_sum = 0.0;
    let mut best_sum = 0.0;
    let mut mean_sum = 0.0;
    for img in &images {
        mae_sum += img.mae;
        best_sum += img.max_f;
        mean_sum += img.mean_f;
        for t in 0..LEVELS {
            f_curve[t] += img.f[t];
            pr[t].precision += img.pr.points[t].precision;
            pr[t].recall += img.pr.points[t].recall;
        }
    }
    f_curve.iter_mut().for_each(|v| *v /= n);
    pr.iter_mut().for_each(|p| {
        p.precision /= n;
        p.recall /= n;
    });
    let (max_f, mean_f) = max_mean(&f_curve);
    let degenerate = images.iter().filter(|i| i.pr.degenerate).count();
    Ok(MetricsReport {
        mean_mae: mae_sum / n,
        mean_f_curve: f_curve,
        mean_pr: pr,
        max_f,
        mean_f,
        per_image_max_f: best_sum / n,
        per_image_mean_f: mean_sum / n,
        evaluated: images.len(),
        skipped,
        degenerate,
        images,
    })
}
