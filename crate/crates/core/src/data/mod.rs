//! Datasets: graph, features, labels and split masks.

mod io;
mod metrics;
mod sbm;
mod splits;

use serde::{Deserialize, Serialize};

pub use io::{load_dataset, save_dataset, FeatureFormat};
pub use metrics::{accuracy, evaluate, roc_auc};
pub use sbm::{generate_sbm, SbmSpec};
pub use splits::{stratified_split, SplitSpec};

use crate::error::{Error, Result};
use crate::forget::ForgetRequest;
use crate::graph::{Graph, NodeSet};
use crate::numerics::Mat;

/// Which closed-form pipeline a dataset is sent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pipeline {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    RocAuc,
}

/// Node labels. Unlabeled nodes hold `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    /// One class id per node, `num_classes` classes.
    Single { classes: Vec<Option<usize>>, num_classes: usize },
    /// One `{0,1}` vector of length `num_tasks` per node.
    Multi { rows: Vec<Option<Vec<bool>>>, num_tasks: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Single { classes, .. } => classes.len(),
            Labels::Multi { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width of the target matrix: classes for single-label, tasks for multi-label.
    pub fn width(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } => *num_classes,
            Labels::Multi { num_tasks, .. } => *num_tasks,
        }
    }

    pub fn is_labeled(&self, v: usize) -> bool {
        match self {
            Labels::Single { classes, .. } => classes[v].is_some(),
            Labels::Multi { rows, .. } => rows[v].is_some(),
        }
    }

    pub fn class_of(&self, v: usize) -> Option<usize> {
        match self {
            Labels::Single { classes, .. } => classes[v],
            Labels::Multi { .. } => None,
        }
    }

    /// Class ids for single-label data; `None` for multi-label.
    pub fn classes(&self) -> Option<&[Option<usize>]> {
        match self {
            Labels::Single { classes, .. } => Some(classes),
            Labels::Multi { .. } => None,
        }
    }

    fn clear(&mut self, v: usize) {
        match self {
            Labels::Single { classes, .. } => classes[v] = None,
            Labels::Multi { rows, .. } => rows[v] = None,
        }
    }

    /// Writes the `{0,1}` target row of `v` into `out` (zeros if unlabeled).
    pub fn target_row(&self, v: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self {
            Labels::Single { classes, .. } => {
                if let Some(c) = classes[v] {
                    out[c] = 1.0;
                }
            }
            Labels::Multi { rows, .. } => {
                if let Some(bits) = &rows[v] {
                    for (o, &b) in out.iter_mut().zip(bits) {
                        *o = b as u8 as f64;
                    }
                }
            }
        }
    }

    /// Target rows for `nodes`, in order.
    pub fn targets(&self, nodes: &[usize]) -> Mat {
        let mut y = Mat::zeros(nodes.len(), self.width());
        for (i, &v) in nodes.iter().enumerate() {
            self.target_row(v, y.row_mut(i));
        }
        y
    }
}

/// A transductive node-classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Mat,
    pub labels: Labels,
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
    pub metric: Metric,
    pub pipeline_override: Option<Pipeline>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_targets(&self) -> usize {
        self.labels.width()
    }

    pub fn train_nodes(&self) -> NodeSet {
        NodeSet::from_mask(&self.train)
    }

    pub fn val_nodes(&self) -> NodeSet {
        NodeSet::from_mask(&self.val)
    }

    pub fn test_nodes(&self) -> NodeSet {
        NodeSet::from_mask(&self.test)
    }

    pub fn is_multi_label(&self) -> bool {
        matches!(self.labels, Labels::Multi { .. })
    }

    /// Checks shapes, mask disjointness and that every training node is labeled.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.features.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "features have {} rows, graph has {n} nodes",
                self.features.rows()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "labels cover {} nodes, graph has {n}",
                self.labels.len()
            )));
        }
        for (name, m) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if m.len() != n {
                return Err(Error::ShapeMismatch(format!("{name} mask has length {}", m.len())));
            }
        }
        for v in 0..n {
            if (self.train[v] as u8 + self.val[v] as u8 + self.test[v] as u8) > 1 {
                return Err(Error::MaskOverlap(v));
            }
            if self.train[v] && !self.labels.is_labeled(v) {
                return Err(Error::ShapeMismatch(format!("training node {v} has no label")));
            }
        }
        if let Labels::Single { classes, num_classes } = &self.labels {
            if let Some(&c) = classes.iter().flatten().find(|&&c| c >= *num_classes) {
                return Err(Error::ShapeMismatch(format!("class {c} out of range 0..{num_classes}")));
            }
        }
        if let Labels::Multi { rows, num_tasks } = &self.labels {
            if rows.iter().flatten().any(|r| r.len() != *num_tasks) {
                return Err(Error::ShapeMismatch(format!("multi-label rows must have {num_tasks} entries")));
            }
        }
        Ok(())
    }

    /// Applies a forget request to the data and returns the modified dataset
    /// with the affected node set of the graph modification.
    ///
    /// Label forget drops nodes from the training set and clears their labels.
    /// Feature forget zeroes feature rows. Deleted nodes keep their ids but
    /// lose their edges, features, labels and mask membership.
    pub fn apply_forget(&self, req: &ForgetRequest) -> Result<(Dataset, NodeSet)> {
        let mut out = self.clone();
        let affected = out.apply_forget_in_place(req)?;
        Ok((out, affected))
    }

    /// [`Dataset::apply_forget`] without the copy. On error `self` is unchanged.
    pub fn apply_forget_in_place(&mut self, req: &ForgetRequest) -> Result<NodeSet> {
        if let ForgetRequest::Label(t) = req {
            req.validate(self.n())?;
            if let Some(&v) = t.iter().find(|&&v| !self.train[v]) {
                return Err(Error::TargetMissing(format!("label forget target {v} is not a training node")));
            }
        }
        let affected = match req {
            ForgetRequest::Label(t) | ForgetRequest::Feature(t) => {
                req.validate(self.n())?;
                NodeSet::from_unsorted(t.clone())
            }
            _ => {
                let (graph, affected) = self.graph.modify(req)?;
                self.graph = graph;
                affected
            }
        };
        match req {
            ForgetRequest::Label(t) => {
                for &v in t {
                    self.train[v] = false;
                    self.labels.clear(v);
                }
            }
            ForgetRequest::Feature(t) => {
                for &v in t {
                    self.features.row_mut(v).iter_mut().for_each(|x| *x = 0.0);
                }
            }
            ForgetRequest::Edge(_) => {}
            ForgetRequest::Node(t) | ForgetRequest::Subgraph(t) => {
                for &v in t {
                    self.features.row_mut(v).iter_mut().for_each(|x| *x = 0.0);
                    self.labels.clear(v);
                    self.train[v] = false;
                    self.val[v] = false;
                    self.test[v] = false;
                }
            }
        }
        Ok(affected)
    }

    /// Rows of `X` scaled to unit L2 norm; zero rows stay zero.
    pub fn row_normalized_features(&self) -> Mat {
        let mut x = self.features.clone();
        for i in 0..x.rows() {
            normalize_row(x.row_mut(i));
        }
        x
    }
}

/// Scales `row` to unit L2 norm in place; a zero row is left unchanged.
pub fn normalize_row(row: &mut [f64]) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            name: "tiny".into(),
            graph: Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap(),
            features: Mat::from_fn(4, 2, |i, j| (i + j) as f64),
            labels: Labels::Single {
                classes: vec![Some(0), Some(1), Some(0), None],
                num_classes: 2,
            },
            train: vec![true, true, false, false],
            val: vec![false, false, true, false],
            test: vec![false, false, false, true],
            metric: Metric::Accuracy,
            pipeline_override: None,
        }
    }

    #[test]
    fn validate_catches_overlap_and_unlabeled_train() {
        let mut ds = tiny();
        ds.validate().unwrap();
        ds.val[0] = true;
        assert!(matches!(ds.validate(), Err(Error::MaskOverlap(0))));
        let mut ds = tiny();
        ds.train[3] = true;
        ds.test[3] = false;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn forget_kinds_modify_data() {
        let ds = tiny();
        let (d, s) = ds.apply_forget(&ForgetRequest::Label(vec![1])).unwrap();
        assert!(!d.train[1] && d.labels.class_of(1).is_none());
        assert_eq!(s.as_slice(), &[1]);
        assert!(ds.apply_forget(&ForgetRequest::Label(vec![2])).is_err());

        let (d, _) = ds.apply_forget(&ForgetRequest::Feature(vec![2])).unwrap();
        assert_eq!(d.features.row(2), &[0.0, 0.0]);

        let (d, s) = ds.apply_forget(&ForgetRequest::Node(vec![2])).unwrap();
        assert_eq!(s.as_slice(), &[1, 2, 3]);
        assert!(!d.val[2] && d.graph.is_deleted(2));
        d.validate().unwrap();
    }

    #[test]
    fn row_normalization() {
        let mut ds = tiny();
        ds.features = Mat::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let x = ds.row_normalized_features();
        assert_eq!(x.row(0), &[0.6, 0.8]);
        assert_eq!(x.row(1), &[0.0, 0.0]);
        assert_eq!(x.row(3), &[0.0, -1.0]);
    }
}
