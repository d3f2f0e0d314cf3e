//! Routing between the two pipelines by adjusted homophily.
//!
//! A dataset whose training-graph adjusted homophily reaches `tau` goes to
//! Pipeline A, anything below goes to Pipeline B. Only training labels and
//! the edges between training nodes enter the statistic.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Labels, Pipeline};
use crate::error::{Error, Result};
use crate::graph::adjusted_homophily;

pub const DEFAULT_TAU: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteReason {
    Computed,
    HandAssigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    /// Absent for multi-label data and for training graphs without edges.
    pub h_adj: Option<f64>,
    pub tau: f64,
    pub pipeline: Pipeline,
    pub reason: RouteReason,
}

/// The threshold rule on its own.
pub fn pipeline_for(h_adj: f64, tau: f64) -> Pipeline {
    if h_adj >= tau {
        Pipeline::A
    } else {
        Pipeline::B
    }
}

/// Adjusted homophily of the training graph, or `None` when it is undefined
/// (multi-label targets, or no edge joins two training nodes).
pub fn train_homophily(ds: &Dataset) -> Result<Option<f64>> {
    match &ds.labels {
        Labels::Multi { .. } => Ok(None),
        Labels::Single { classes, .. } => match adjusted_homophily(&ds.graph, classes, &ds.train) {
            Ok(h) => Ok(Some(h)),
            Err(Error::NoTrainEdges) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

fn decide(h_adj: Option<f64>, hand: Option<Pipeline>, tau: f64, name: &str) -> Result<RoutingDecision> {
    if !tau.is_finite() {
        return Err(Error::InvalidConfig(format!("tau must be finite, got {tau}")));
    }
    match (hand, h_adj) {
        (Some(pipeline), _) => Ok(RoutingDecision {
            h_adj,
            tau,
            pipeline,
            reason: RouteReason::HandAssigned,
        }),
        (None, Some(h)) => Ok(RoutingDecision {
            h_adj,
            tau,
            pipeline: pipeline_for(h, tau),
            reason: RouteReason::Computed,
        }),
        (None, None) => Err(Error::OverrideRequired(format!(
            "adjusted homophily of {name} is undefined (multi-label targets or no training edges)"
        ))),
    }
}

/// Routes `ds`. A pipeline override stored with the dataset always wins and
/// is reported as hand-assigned; without one, an undefined homophily is an
/// [`Error::OverrideRequired`].
pub fn route(ds: &Dataset, tau: f64) -> Result<RoutingDecision> {
    decide(train_homophily(ds)?, ds.pipeline_override, tau, &ds.name)
}

/// A dataset reduced to what routing needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyEntry {
    pub name: String,
    pub h_adj: Option<f64>,
    #[serde(default)]
    pub hand_assigned: Option<Pipeline>,
}

impl HomophilyEntry {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Ok(Self {
            name: ds.name.clone(),
            h_adj: train_homophily(ds)?,
            hand_assigned: ds.pipeline_override,
        })
    }
}

/// Routing of every entry at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: f64,
    pub decisions: Vec<(String, RoutingDecision)>,
}

impl TauRow {
    /// Names routed to `pipeline`, in entry order.
    pub fn routed_to(&self, pipeline: Pipeline) -> Vec<&str> {
        self.decisions
            .iter()
            .filter(|(_, d)| d.pipeline == pipeline)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Decision table over `taus` for precomputed homophily values.
pub fn routing_table(entries: &[HomophilyEntry], taus: &[f64]) -> Result<Vec<TauRow>> {
    taus.iter()
        .map(|&tau| {
            let decisions = entries
                .iter()
                .map(|e| Ok((e.name.clone(), decide(e.h_adj, e.hand_assigned, tau, &e.name)?)))
                .collect::<Result<_>>()?;
            Ok(TauRow { tau, decisions })
        })
        .collect()
}

/// Computes each dataset's homophily once and routes it at every `tau`.
pub fn tau_sweep(datasets: &[&Dataset], taus: &[f64]) -> Result<Vec<TauRow>> {
    let entries = datasets
        .iter()
        .map(|ds| HomophilyEntry::from_dataset(ds))
        .collect::<Result<Vec<_>>>()?;
    routing_table(&entries, taus)
}
