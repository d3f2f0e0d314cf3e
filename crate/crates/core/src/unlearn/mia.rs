use serde::{Deserialize, Serialize};

use crate::data::{roc_auc, Dataset};
use crate::error::{Error, Result};
use crate::graph::NodeSet;
use crate::model::Model;

/// Forget sets smaller than this get the small-sample flag.
pub const SMALL_FORGET_SET: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaResult {
    /// Membership AUC (forget vs holdout) under the unlearned model.
    pub auc_unlearned: f64,
    /// The same attack against the retrained model.
    pub auc_retrained: f64,
    /// `auc_unlearned − auc_retrained`.
    pub gap: f64,
    /// AUC of telling the unlearned model's confidences on the forget nodes
    /// from the retrained model's. Exactly 0.5 when the models agree.
    pub distinguish_auc: f64,
    pub small_sample: bool,
}

fn max_confidence(model: &Model, ds: &Dataset) -> Result<Vec<f64>> {
    let p = model.predict_proba(ds)?;
    Ok((0..p.rows())
        .map(|v| p.row(v).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

fn two_sample_auc(pos: impl Iterator<Item = f64>, neg: impl Iterator<Item = f64>) -> Result<f64> {
    let mut scores: Vec<f64> = pos.collect();
    let mut labels = vec![true; scores.len()];
    let before = scores.len();
    scores.extend(neg);
    labels.resize(before + (scores.len() - before), false);
    if scores.iter().all(|&s| s == scores[0]) {
        return Ok(0.5);
    }
    roc_auc(&scores, &labels)
}

/// Confidence-threshold membership attack.
///
/// The attacker scores each node by its largest softmax probability and tries
/// to tell `forget` nodes (members) from `holdout` nodes (never trained on).
/// The same attack is run against the retrained model; when the two models are
/// identical the gap is exactly zero. Identical scores everywhere give 0.5.
pub fn mia_attack(
    unlearned: &Model,
    retrained: &Model,
    ds: &Dataset,
    forget: &NodeSet,
    holdout: &NodeSet,
) -> Result<MiaResult> {
    if forget.is_empty() || holdout.is_empty() {
        return Err(Error::DegenerateSets);
    }
    forget.check_bounds(ds.n())?;
    holdout.check_bounds(ds.n())?;
    if let Some(&v) = forget.iter().find(|&&v| holdout.contains(v)) {
        return Err(Error::InvalidConfig(format!("node {v} is in both the forget and holdout sets")));
    }
    let su = max_confidence(unlearned, ds)?;
    let sr = max_confidence(retrained, ds)?;
    let auc = |s: &[f64]| two_sample_auc(forget.iter().map(|&v| s[v]), holdout.iter().map(|&v| s[v]));
    let auc_unlearned = auc(&su)?;
    let auc_retrained = auc(&sr)?;
    let distinguish_auc = two_sample_auc(forget.iter().map(|&v| su[v]), forget.iter().map(|&v| sr[v]))?;
    Ok(MiaResult {
        auc_unlearned,
        auc_retrained,
        gap: auc_unlearned - auc_retrained,
        distinguish_auc,
        small_sample: forget.len() < SMALL_FORGET_SET,
    })
}
