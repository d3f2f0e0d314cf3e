use crate::data::{Dataset, Labels, Metric};
use crate::error::{Error, Result};
use crate::numerics::mat::argmax;
use crate::numerics::Mat;

/// Area under the ROC curve from the Mann–Whitney statistic with average
/// ranks for ties. Needs at least one positive and one negative.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassAuc);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score in AUC input".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| positive[k]).count();
        rank_sum_pos += avg * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of `nodes` whose argmax prediction (lowest index on ties) equals the label.
pub fn accuracy(pred: &Mat, classes: &[Option<usize>], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidConfig("accuracy over an empty node set".into()));
    }
    let mut hit = 0usize;
    for &v in nodes {
        let c = classes[v].ok_or_else(|| Error::InvalidConfig(format!("node {v} has no label")))?;
        hit += (argmax(pred.row(v)) == c) as usize;
    }
    Ok(hit as f64 / nodes.len() as f64)
}

/// The dataset's metric over labeled nodes selected by `mask`.
///
/// Binary ROC-AUC scores a two-column prediction by its second column.
/// Multi-label ROC-AUC is the mean over tasks that have both outcomes present.
pub fn evaluate(pred: &Mat, ds: &Dataset, mask: &[bool]) -> Result<f64> {
    if pred.rows() != ds.n() || mask.len() != ds.n() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} rows, mask {} entries, dataset {} nodes",
            pred.rows(),
            mask.len(),
            ds.n()
        )));
    }
    let nodes: Vec<usize> = (0..ds.n()).filter(|&v| mask[v] && ds.labels.is_labeled(v)).collect();
    if nodes.is_empty() {
        return Err(Error::InvalidConfig("evaluation mask selects no labeled node".into()));
    }
    match (&ds.labels, ds.metric) {
        (Labels::Single { classes, .. }, Metric::Accuracy) => accuracy(pred, classes, &nodes),
        (Labels::Single { classes, num_classes }, Metric::RocAuc) => {
            if *num_classes != 2 {
                return Err(Error::InvalidConfig(format!(
                    "ROC-AUC needs a binary task, dataset has {num_classes} classes"
                )));
            }
            let col = pred.cols() - 1;
            let scores: Vec<f64> = nodes.iter().map(|&v| pred[(v, col)]).collect();
            let pos: Vec<bool> = nodes.iter().map(|&v| classes[v] == Some(1)).collect();
            roc_auc(&scores, &pos)
        }
        (Labels::Multi { rows, num_tasks }, Metric::RocAuc) => {
            let mut total = 0.0;
            let mut counted = 0usize;
            for t in 0..*num_tasks {
                let scores: Vec<f64> = nodes.iter().map(|&v| pred[(v, t)]).collect();
                let pos: Vec<bool> = nodes
                    .iter()
                    .map(|&v| rows[v].as_ref().is_some_and(|r| r[t]))
                    .collect();
                match roc_auc(&scores, &pos) {
                    Ok(a) => {
                        total += a;
                        counted += 1;
                    }
                    Err(Error::SingleClassAuc) => {}
                    Err(e) => return Err(e),
                }
            }
            if counted == 0 {
                return Err(Error::SingleClassAuc);
            }
            Ok(total / counted as f64)
        }
        (Labels::Multi { .. }, Metric::Accuracy) => Err(Error::InvalidConfig(
            "accuracy is undefined for multi-label data".into(),
        )),
    }
}
