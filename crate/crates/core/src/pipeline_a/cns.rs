//! Correct-and-Smooth post-processing (Huang et al., 2021).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Mat;

fn default_iters() -> usize {
    50
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnsParams {
    pub alpha_correct: f64,
    pub alpha_smooth: f64,
    #[serde(default = "default_iters")]
    pub num_iters: usize,
    /// Rescale the propagated residual to the mean training error (the
    /// "autoscale" variant). When off, the residual is added unscaled.
    #[serde(default = "default_true")]
    pub autoscale: bool,
}

impl Default for CnsParams {
    fn default() -> Self {
        Self {
            alpha_correct: 0.8,
            alpha_smooth: 0.8,
            num_iters: default_iters(),
            autoscale: true,
        }
    }
}

impl CnsParams {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha_correct", self.alpha_correct), ("alpha_smooth", self.alpha_smooth)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {a}")));
            }
        }
        Ok(())
    }
}

/// `Z ← (1 − α) Z⁰ + α Ã Z`, `iters` times.
fn restart_propagation(g: &Graph, z0: &Mat, alpha: f64, iters: usize) -> Result<Mat> {
    let mut z = z0.clone();
    if alpha == 0.0 {
        return Ok(z);
    }
    for _ in 0..iters {
        let az = g.propagate(&z)?;
        for ((zi, &a), &b) in z.as_mut_slice().iter_mut().zip(az.as_slice()).zip(z0.as_slice()) {
            *zi = (1.0 - alpha) * b + alpha * a;
        }
    }
    Ok(z)
}

/// Residual correction followed by label smoothing over the graph.
///
/// Correct: the training residual `E⁰ = Y − Ŷ` (zero off the training set)
/// is spread by restart propagation with `alpha_correct`. With autoscale, each
/// row of the spread residual is rescaled to the mean training-row L1 error
/// (scales that are infinite or above 1000 become 1; NaN rows keep `Ŷ`).
///
/// Smooth: training rows are clamped to their labels and the result is
/// spread by restart propagation with `alpha_smooth`.
pub fn correct_and_smooth(ds: &Dataset, base_pred: &Mat, p: &CnsParams) -> Result<Mat> {
    p.validate()?;
    let n = ds.n();
    if base_pred.rows() != n || base_pred.cols() != ds.num_targets() {
        return Err(Error::ShapeMismatch(format!(
            "base prediction is {}x{}, expected {n}x{}",
            base_pred.rows(),
            base_pred.cols(),
            ds.num_targets()
        )));
    }
    if !base_pred.is_finite() {
        return Err(Error::InvalidConfig("base prediction has non-finite entries".into()));
    }
    let train = ds.train_nodes();
    let c = base_pred.cols();
    let mut y = vec![0.0; c];

    let mut e0 = Mat::zeros(n, c);
    for &v in &train {
        ds.labels.target_row(v, &mut y);
        for ((e, &t), &b) in e0.row_mut(v).iter_mut().zip(&y).zip(base_pred.row(v)) {
            *e = t - b;
        }
    }
    let e = restart_propagation(&ds.graph, &e0, p.alpha_correct, p.num_iters)?;

    let mut corrected = base_pred.clone();
    if p.autoscale {
        let sigma = if train.is_empty() {
            0.0
        } else {
            train
                .iter()
                .map(|&v| e0.row(v).iter().map(|x| x.abs()).sum::<f64>())
                .sum::<f64>()
                / train.len() as f64
        };
        for v in 0..n {
            let l1: f64 = e.row(v).iter().map(|x| x.abs()).sum();
            let mut scale = sigma / l1;
            if scale.is_infinite() || scale > 1000.0 {
                scale = 1.0;
            }
            for (o, &r) in corrected.row_mut(v).iter_mut().zip(e.row(v)) {
                let fixed = *o + scale * r;
                if !fixed.is_nan() {
                    *o = fixed;
                }
            }
        }
    } else {
        for (o, &r) in corrected.as_mut_slice().iter_mut().zip(e.as_slice()) {
            *o += r;
        }
    }

    for &v in &train {
        ds.labels.target_row(v, corrected.row_mut(v));
    }
    restart_propagation(&ds.graph, &corrected, p.alpha_smooth, p.num_iters)
}
