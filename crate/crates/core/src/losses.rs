//! Training objectives as plain functions returning `(value, ∂value/∂pred)`.

use serde::Serialize;

use crate::error::{Error, Result};

fn check_mask(mask: Option<&[bool]>, n: usize) -> Result<()> {
    match mask {
        Some(m) if m.len() != n => Err(Error::shape(format!("mask of {} for {n} elements", m.len()))),
        _ => Ok(()),
    }
}

fn selected(mask: Option<&[bool]>, i: usize) -> bool {
    mask.is_none_or(|m| m[i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineLoss {
    pub value: f64,
    pub grad: Vec<f64>,
    /// masked rows that entered the mean
    pub rows: usize,
    /// masked rows dropped because pred or target had zero norm
    pub excluded: usize,
}

/// Mean over masked rows of `1 − cos(pred_i, target_i)`; `pred` and
/// `target` are `M × dim` row-major. Zero-norm rows are excluded and counted.
pub fn cosine_feature_loss(
    pred: &[f64],
    target: &[f64],
    dim: usize,
    mask: Option<&[bool]>,
) -> Result<CosineLoss> {
    if dim == 0 || pred.len() != target.len() || pred.len() % dim != 0 {
        return Err(Error::shape(format!(
            "pred {} and target {} values with dim {dim}",
            pred.len(),
            target.len()
        )));
    }
    let m = pred.len() / dim;
    check_mask(mask, m)?;
    let mut grad = vec![0.0; pred.len()];
    let mut per_row = Vec::with_capacity(m);
    let mut excluded = 0;
    for i in 0..m {
        if !selected(mask, i) {
            continue;
        }
        let p = &pred[i * dim..(i + 1) * dim];
        let t = &target[i * dim..(i + 1) * dim];
        let pp: f64 = p.iter().map(|x| x * x).sum();
        let tt: f64 = t.iter().map(|x| x * x).sum();
        if pp == 0.0 || tt == 0.0 {
            excluded += 1;
            continue;
        }
        let (np, nt) = (pp.sqrt(), tt.sqrt());
        // sqrt(pp·tt) rather than |p|·|t|: exact ±1 for p = ±t
        let cos = p.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / (pp * tt).sqrt();
        per_row.push((i, np, nt, cos));
    }
    let rows = per_row.len();
    if rows == 0 {
        return Ok(CosineLoss {
            value: 0.0,
            grad,
            rows,
            excluded,
        });
    }
    let inv = 1.0 / rows as f64;
    let mut value = 0.0;
    for &(i, np, nt, cos) in &per_row {
        value += 1.0 - cos;
        let p = &pred[i * dim..(i + 1) * dim];
        let t = &target[i * dim..(i + 1) * dim];
        for k in 0..dim {
            // ∂(1 − cos)/∂p = −(t/(|p||t|) − cos·p/|p|²)
            grad[i * dim + k] = -inv * (t[k] / (np * nt) - cos * p[k] / (np * np));
        }
    }
    Ok(CosineLoss {
        value: value * inv,
        grad,
        rows,
        excluded,
    })
}

/// Mean absolute error over the mask, subgradient `sign(pred − target)/n`.
/// An empty mask gives 0 with a zero gradient.
pub fn l1_depth_loss(pred: &[f64], target: &[f64], mask: Option<&[bool]>) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::shape("pred and target lengths differ"));
    }
    check_mask(mask, pred.len())?;
    let n = (0..pred.len()).filter(|&i| selected(mask, i)).count();
    let mut grad = vec![0.0; pred.len()];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut sum = 0.0;
    for i in (0..pred.len()).filter(|&i| selected(mask, i)) {
        let r = pred[i] - target[i];
        sum += r.abs();
        grad[i] = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        } / n as f64;
    }
    Ok((sum / n as f64, grad))
}

pub const DEFAULT_SILOG_LAMBDA: f64 = 0.85;

/// `sqrt(mean g² − λ·mean(g)²)` with `g = ln(pred / target)` over the mask.
/// The gradient is zero where the loss is zero.
///
/// Evaluated as `sqrt(var g + (1 − λ)·mean(g)²)` with the mean shifted by
/// `g_0`, so a uniform ratio gives exactly 0 at `λ = 1`.
pub fn silog_depth_loss(
    pred: &[f64],
    target: &[f64],
    mask: Option<&[bool]>,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::shape("pred and target lengths differ"));
    }
    check_mask(mask, pred.len())?;
    let idx: Vec<usize> = (0..pred.len()).filter(|&i| selected(mask, i)).collect();
    let mut grad = vec![0.0; pred.len()];
    for &i in &idx {
        if !(pred[i] > 0.0 && target[i] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "nonpositive depth at {i}: pred {} target {}",
                pred[i], target[i]
            )));
        }
    }
    if idx.is_empty() {
        return Ok((0.0, grad));
    }
    let n = idx.len() as f64;
    let g: Vec<f64> = idx.iter().map(|&i| (pred[i] / target[i]).ln()).collect();
    let shift = g.iter().map(|x| x - g[0]).sum::<f64>() / n;
    let mean = g[0] + shift;
    let var = g.iter().map(|x| (x - g[0] - shift).powi(2)).sum::<f64>() / n;
    let value = (var + (1.0 - lambda) * mean * mean).max(0.0).sqrt();
    if value > 0.0 {
        for (&i, gi) in idx.iter().zip(&g) {
            grad[i] = (gi - lambda * mean) / (n * value * pred[i]);
        }
    }
    Ok((value, grad))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross entropy on raw logits, `softplus(x) − y·x` per element.
pub fn bce_occupancy_loss(logits: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::shape("logits and labels lengths differ"));
    }
    if logits.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = logits.len() as f64;
    let mut sum = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&x, &y)| {
            let y = if y { 1.0 } else { 0.0 };
            sum += softplus(x) - y * x;
            (sigmoid(x) - y) / n
        })
        .collect();
    Ok((sum / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub feat2d: f64,
    pub depth2d: f64,
    pub silog2d: f64,
    pub bce3d: f64,
    pub feat3d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::unit()
    }
}

impl LossWeights {
    pub fn unit() -> Self {
        LossWeights {
            feat2d: 1.0,
            depth2d: 1.0,
            silog2d: 1.0,
            bce3d: 1.0,
            feat3d: 1.0,
        }
    }

    /// 8× occupancy and 16× 3D feature weighting.
    pub fn ablation() -> Self {
        LossWeights {
            bce3d: 8.0,
            feat3d: 16.0,
            ..Self::unit()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "unit" => Some(Self::unit()),
            "ablation" => Some(Self::ablation()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub feat2d: f64,
    pub depth2d: f64,
    pub silog2d: f64,
    pub bce3d: f64,
    pub feat3d: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossReport {
    pub fn new(feat2d: f64, depth2d: f64, silog2d: f64, bce3d: f64, feat3d: f64, weights: LossWeights) -> Self {
        let total = weights.feat2d * feat2d
            + weights.depth2d * depth2d
            + weights.silog2d * silog2d
            + weights.bce3d * bce3d
            + weights.feat3d * feat3d;
        LossReport {
            feat2d,
            depth2d,
            silog2d,
            bce3d,
            feat3d,
            total,
            weights,
        }
    }
}
