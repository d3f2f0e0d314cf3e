//! Graph-object forget requests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to remove from the training data.
///
/// Serialized as `{"kind": "edge", "targets": [[u, v], ...]}` or
/// `{"kind": "node", "targets": [v, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "targets", rename_all = "lowercase")]
pub enum ForgetRequest {
    /// Remove the labels of training nodes; they leave the training set.
    Label(Vec<usize>),
    /// Zero the feature rows of any nodes.
    Feature(Vec<usize>),
    /// Delete undirected edges.
    Edge(Vec<(usize, usize)>),
    /// Delete nodes with their incident edges.
    Node(Vec<usize>),
    /// Delete the subgraph induced by a node set.
    Subgraph(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForgetKind {
    Label,
    Feature,
    Edge,
    Node,
    Subgraph,
}

impl ForgetKind {
    pub const ALL: [ForgetKind; 5] = [
        ForgetKind::Label,
        ForgetKind::Feature,
        ForgetKind::Edge,
        ForgetKind::Node,
        ForgetKind::Subgraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ForgetKind::Label => "label",
            ForgetKind::Feature => "feature",
            ForgetKind::Edge => "edge",
            ForgetKind::Node => "node",
            ForgetKind::Subgraph => "subgraph",
        }
    }
}

impl std::str::FromStr for ForgetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ForgetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown forget kind {s:?}")))
    }
}

impl ForgetRequest {
    pub fn kind(&self) -> ForgetKind {
        match self {
            ForgetRequest::Label(_) => ForgetKind::Label,
            ForgetRequest::Feature(_) => ForgetKind::Feature,
            ForgetRequest::Edge(_) => ForgetKind::Edge,
            ForgetRequest::Node(_) => ForgetKind::Node,
            ForgetRequest::Subgraph(_) => ForgetKind::Subgraph,
        }
    }

    /// Number of forgotten objects, `|F|`.
    pub fn size(&self) -> usize {
        match self {
            ForgetRequest::Edge(e) => e.len(),
            ForgetRequest::Label(v)
            | ForgetRequest::Feature(v)
            | ForgetRequest::Node(v)
            | ForgetRequest::Subgraph(v) => v.len(),
        }
    }

    /// Nodes whose records the request concerns: the targets themselves, or
    /// both endpoints of every forgotten edge. Sorted and deduplicated.
    pub fn forget_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = match self {
            ForgetRequest::Edge(e) => e.iter().flat_map(|&(a, b)| [a, b]).collect(),
            ForgetRequest::Label(v)
            | ForgetRequest::Feature(v)
            | ForgetRequest::Node(v)
            | ForgetRequest::Subgraph(v) => v.clone(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.size() == 0 {
            return Err(Error::TargetMissing("forget request has no targets".into()));
        }
        let check = |id: usize| {
            if id >= n {
                Err(Error::TargetMissing(format!("node {id} (graph has {n} nodes)")))
            } else {
                Ok(())
            }
        };
        match self {
            ForgetRequest::Edge(e) => e.iter().try_for_each(|&(u, v)| {
                check(u)?;
                check(v)
            }),
            ForgetRequest::Label(v)
            | ForgetRequest::Feature(v)
            | ForgetRequest::Node(v)
            | ForgetRequest::Subgraph(v) => v.iter().try_for_each(|&x| check(x)),
        }
    }
}
