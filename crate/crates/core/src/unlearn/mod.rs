//! Exact unlearning of graph objects.
//!
//! Three ways to produce the post-forget model:
//!
//! * [`Strategy::Khop`] exchanges only the training rows within the model's
//!   propagation radius of the modification in the exact ridge statistics,
//!   then re-solves. Available for Pipeline A and one-layer LCF-Net without
//!   whitening.
//! * [`Strategy::Full`] re-runs the fit on the modified data.
//! * [`Strategy::Retrain`] does the same starting from nothing but the
//!   configuration; it is the reference every other result is compared with.
//!
//! Because the ridge statistics are accumulated exactly, the K-hop result is
//! bit-for-bit the retrained one, which [`verify_exact`] checks.

mod bench;
mod mia;
mod sample;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use bench::{bench_unlearn, write_bench_csv, BenchGrid, BenchRow};
pub use mia::{mia_attack, MiaResult, SMALL_FORGET_SET};

pub use sample::sample_request;

use crate::data::{evaluate, Dataset};
use crate::error::{Error, Result};
use crate::forget::{ForgetKind, ForgetRequest};
use crate::graph::NodeSet;
use crate::lcfnet::LcfNetModel;
use crate::model::{Model, ModelConfig};
use crate::numerics::mat::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Khop,
    Full,
    Retrain,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Khop => "khop",
            Strategy::Full => "full",
            Strategy::Retrain => "retrain",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "khop" => Ok(Strategy::Khop),
            "full" => Ok(Strategy::Full),
            "retrain" => Ok(Strategy::Retrain),
            _ => Err(Error::Parse(format!("unknown strategy {s:?} (khop, full, retrain)"))),
        }
    }
}

/// Outcome of one unlearning event, serialized as a flat JSON object.
///
/// Verification fields stay `null` until a comparison against a retrained
/// model has been run (see [`audit`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnReport {
    pub strategy: Strategy,
    pub kind: ForgetKind,
    /// `|F|`.
    pub forget_size: usize,
    /// Feature rows recomputed by the K-hop update, `|N_L(S)|`.
    pub touched_rows: Option<usize>,
    /// Training rows exchanged in the statistics, `|N_L(S) ∩ V_tr|`.
    pub affected_size: usize,
    /// Largest absolute difference of any learned parameter against retrain.
    pub delta_theta: Option<f64>,
    pub pred_agreement: Option<f64>,
    pub prob_equal: Option<bool>,
    /// AUC of distinguishing the unlearned model from the retrained one by
    /// their confidences on the forget nodes; 0.5 means indistinguishable.
    pub mia: Option<f64>,
    /// Membership AUC (forget vs holdout) under the unlearned model.
    pub mia_unlearned: Option<f64>,
    /// The same under the retrained model.
    pub mia_retrained: Option<f64>,
    /// Set when `|F|` is too small for a stable AUC.
    pub mia_small_sample: Option<bool>,
    /// Test metric of the retrained model minus that of the original model.
    pub test_delta: Option<f64>,
    /// Seconds spent by the chosen strategy.
    #[serde(rename = "t_A")]
    pub t_a: f64,
    /// Retrain time divided by `t_A`.
    pub speedup: Option<f64>,
    /// Seconds per stage of the chosen strategy.
    pub wall_clock: BTreeMap<String, f64>,
}

impl UnlearnReport {
    fn new(strategy: Strategy, req: &ForgetRequest) -> Self {
        Self {
            strategy,
            kind: req.kind(),
            forget_size: req.size(),
            touched_rows: None,
            affected_size: 0,
            delta_theta: None,
            pred_agreement: None,
            prob_equal: None,
            mia: None,
            mia_unlearned: None,
            mia_retrained: None,
            mia_small_sample: None,
            test_delta: None,
            t_a: 0.0,
            speedup: None,
            wall_clock: BTreeMap::new(),
        }
    }

    fn stage(&mut self, name: &str, start: Instant) {
        let dt = start.elapsed().as_secs_f64();
        self.wall_clock.insert(name.to_string(), dt);
        self.t_a += dt;
    }
}

/// The modified data, the updated model and what happened.
#[derive(Debug, Clone)]
pub struct UnlearnOutcome {
    pub model: Model,
    pub dataset: Dataset,
    /// Node set `S` touched by the graph modification.
    pub affected: NodeSet,
    pub report: UnlearnReport,
}

/// Counts from an in-place local update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCounts {
    pub touched_rows: usize,
    pub affected_train: usize,
}

/// Propagation radius of the representation the statistics are built on.
pub fn locality_radius(cfg: &ModelConfig) -> usize {
    match cfg {
        ModelConfig::A(c) => c.k,
        ModelConfig::B(c) => c.base.radius() + c.layers(),
    }
}

fn not_eligible(model: &Model) -> Error {
    let cfg = model.config();
    let detail = match &cfg {
        ModelConfig::B(c) if c.layers() >= 2 => format!("LCF-Net has {} layers; layers past the first depend on every node", c.layers()),
        ModelConfig::B(_) => "LCF-Net whitening uses statistics of every training row".to_string(),
        ModelConfig::A(_) => "model has no local update".to_string(),
    };
    Error::NotLocalityEligible(detail)
}

/// Applies the K-hop update to `model` in place. `old` is the data the model
/// reflects, `new` the data after `req`, `affected` the set `S`.
pub fn apply_local_update(
    model: &mut Model,
    old: &Dataset,
    new: &Dataset,
    req: &ForgetRequest,
    affected: &NodeSet,
) -> Result<LocalCounts> {
    if !model.locality_eligible() {
        return Err(not_eligible(model));
    }
    match model {
        Model::A(m) => {
            let u = m.unlearn_local(old, new, req, affected)?;
            Ok(LocalCounts {
                touched_rows: u.touched_rows,
                affected_train: u.affected_train,
            })
        }
        Model::B(m) => {
            let u = m.unlearn_local(old, new, req, affected)?;
            Ok(LocalCounts {
                touched_rows: u.touched_rows,
                affected_train: u.affected_train,
            })
        }
    }
}

fn affected_train_count(cfg: &ModelConfig, old: &Dataset, new: &Dataset, req: &ForgetRequest, s: &NodeSet) -> Result<usize> {
    let region = if matches!(req, ForgetRequest::Label(_)) {
        s.clone()
    } else {
        old.graph.k_hop_neighborhood(s, locality_radius(cfg))?
    };
    Ok(region.iter().filter(|&&v| old.train[v] || new.train[v]).count())
}

/// K-hop unlearning on a clone of `model`.
pub fn unlearn_khop(model: &Model, ds: &Dataset, req: &ForgetRequest) -> Result<UnlearnOutcome> {
    if !model.locality_eligible() {
        return Err(not_eligible(model));
    }
    let mut report = UnlearnReport::new(Strategy::Khop, req);
    let mut model = model.clone();

    let t = Instant::now();
    let mut new = ds.clone();
    let affected = new.apply_forget_in_place(req)?;
    report.stage("modify", t);

    let t = Instant::now();
    let counts = apply_local_update(&mut model, ds, &new, req, &affected)?;
    report.stage("update", t);

    report.touched_rows = Some(counts.touched_rows);
    report.affected_size = counts.affected_train;
    Ok(UnlearnOutcome {
        model,
        dataset: new,
        affected,
        report,
    })
}

/// Full closed-form re-solve with the model's own configuration.
pub fn unlearn_full(model: &Model, ds: &Dataset, req: &ForgetRequest) -> Result<UnlearnOutcome> {
    refit(&model.config(), ds, req, Strategy::Full)
}

/// The reference: fit from the configuration alone on the modified data.
pub fn retrain_from_scratch(cfg: &ModelConfig, ds: &Dataset, req: &ForgetRequest) -> Result<UnlearnOutcome> {
    refit(cfg, ds, req, Strategy::Retrain)
}

fn refit(cfg: &ModelConfig, ds: &Dataset, req: &ForgetRequest, strategy: Strategy) -> Result<UnlearnOutcome> {
    let mut report = UnlearnReport::new(strategy, req);

    let t = Instant::now();
    let mut new = ds.clone();
    let affected = new.apply_forget_in_place(req)?;
    report.stage("modify", t);

    let t = Instant::now();
    let model = Model::fit(&new, cfg)?;
    report.stage("fit", t);

    report.affected_size = affected_train_count(cfg, ds, &new, req, &affected)?;
    Ok(UnlearnOutcome {
        model,
        dataset: new,
        affected,
        report,
    })
}

/// Runs one strategy.
pub fn unlearn(model: &Model, ds: &Dataset, req: &ForgetRequest, strategy: Strategy) -> Result<UnlearnOutcome> {
    match strategy {
        Strategy::Khop => unlearn_khop(model, ds, req),
        Strategy::Full => unlearn_full(model, ds, req),
        Strategy::Retrain => retrain_from_scratch(&model.config(), ds, req),
    }
}

/// Comparison of an unlearned model against the retrained reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub delta_theta: f64,
    /// Every predicted probability has identical bits.
    pub prob_equal: bool,
    /// Fraction of live nodes whose argmax class agrees.
    pub pred_agreement: f64,
    pub mia: MiaResult,
}

impl Verification {
    /// `delta_theta` within the precision's tolerance.
    pub fn within_tolerance(&self, model: &Model) -> bool {
        self.delta_theta <= model.precision().tolerance()
    }
}

/// Largest absolute difference between the learned parameters of two models.
pub fn parameter_delta(a: &Model, b: &Model) -> Result<f64> {
    if a.config() != b.config() {
        return Err(Error::KindMismatch(format!(
            "configurations differ ({:?} vs {:?})",
            a.pipeline(),
            b.pipeline()
        )));
    }
    let (pa, pb) = (a.parameter_blocks(), b.parameter_blocks());
    if pa.len() != pb.len() {
        return Err(Error::KindMismatch(format!("{} vs {} parameter blocks", pa.len(), pb.len())));
    }
    let mut delta: f64 = 0.0;
    for (x, y) in pa.into_iter().zip(pb) {
        if x.rows() != y.rows() || x.cols() != y.cols() {
            return Err(Error::KindMismatch(format!(
                "parameter block {}x{} vs {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
        delta = delta.max(x.max_abs_diff(y)?);
    }
    Ok(delta)
}

/// Compares `unlearned` with `retrained`.
///
/// Probabilities and argmax agreement are taken on `modified`, over nodes that
/// are not deleted. The membership attack queries `original` (the attacker
/// holds the forgotten records) with `forget` against never-trained test nodes
/// of `original` outside the forget set.
pub fn verify_exact(
    unlearned: &Model,
    retrained: &Model,
    original: &Dataset,
    modified: &Dataset,
    forget: &NodeSet,
) -> Result<Verification> {
    let delta_theta = parameter_delta(unlearned, retrained)?;
    let pu = unlearned.predict_proba(modified)?;
    let pr = retrained.predict_proba(modified)?;
    let live: Vec<usize> = (0..modified.n()).filter(|&v| !modified.graph.is_deleted(v)).collect();
    let prob_equal = live
        .iter()
        .all(|&v| pu.row(v).iter().zip(pr.row(v)).all(|(a, b)| a.to_bits() == b.to_bits()));
    let agree = live.iter().filter(|&&v| argmax(pu.row(v)) == argmax(pr.row(v))).count();
    let pred_agreement = if live.is_empty() {
        1.0
    } else {
        agree as f64 / live.len() as f64
    };
    let holdout = NodeSet::from_unsorted(
        original
            .test_nodes()
            .iter()
            .copied()
            .filter(|&v| !forget.contains(v))
            .collect(),
    );
    let mia = mia_attack(unlearned, retrained, original, forget, &holdout)?;
    Ok(Verification {
        delta_theta,
        prob_equal,
        pred_agreement,
        mia,
    })
}

/// Runs `strategy`, retrains from scratch, and fills in every report field.
///
/// `model` must be the model fit on `ds`. `test_delta` compares the retrained
/// model on the modified test set with `model` on the original one.
pub fn audit(model: &Model, ds: &Dataset, req: &ForgetRequest, strategy: Strategy) -> Result<UnlearnOutcome> {
    let mut out = unlearn(model, ds, req, strategy)?;
    let reference = retrain_from_scratch(&model.config(), ds, req)?;
    let forget = NodeSet::from_unsorted(req.forget_nodes());
    let v = verify_exact(&out.model, &reference.model, ds, &out.dataset, &forget)?;

    let before = evaluate(&model.predict(ds)?, ds, &ds.test)?;
    let after = evaluate(&reference.model.predict(&reference.dataset)?, &reference.dataset, &reference.dataset.test)?;

    let r = &mut out.report;
    r.delta_theta = Some(v.delta_theta);
    r.prob_equal = Some(v.prob_equal);
    r.pred_agreement = Some(v.pred_agreement);
    r.mia = Some(v.mia.distinguish_auc);
    r.mia_unlearned = Some(v.mia.auc_unlearned);
    r.mia_retrained = Some(v.mia.auc_retrained);
    r.mia_small_sample = Some(v.mia.small_sample);
    r.test_delta = Some(after - before);
    if r.t_a > 0.0 {
        r.speedup = Some(reference.report.t_a / r.t_a);
    }
    Ok(out)
}

/// Experimental label forget for a kernel head fit directly on `h₀`.
///
/// Drops the forgotten rows from the head through the block-inverse identity
/// instead of refactorizing. The kernel matrix among the remaining rows must
/// be unchanged, so the model needs `use_lcf = false`, no whitening and a
/// fixed bandwidth (`sigma_abs`). The result matches retrain only up to
/// rounding; [`verify_exact`] reports the actual gap.
pub fn unlearn_label_krr_experimental(model: &LcfNetModel, ds: &Dataset, targets: &[usize]) -> Result<(LcfNetModel, Dataset)> {
    let cfg = model.config();
    if cfg.use_lcf || cfg.whiten || cfg.sigma_abs.is_none() {
        return Err(Error::NotLocalityEligible(
            "the block-inverse label path needs use_lcf = false, whiten = false and sigma_abs".into(),
        ));
    }
    let req = ForgetRequest::Label(targets.to_vec());
    let (new, _) = ds.apply_forget(&req)?;
    let train = ds.train_nodes();
    let mut remove: Vec<usize> = targets
        .iter()
        .map(|&v| train.as_slice().binary_search(&v).expect("validated training node"))
        .collect();
    remove.sort_unstable();
    remove.dedup();
    let head = model.head().remove_rows_block_inverse(&remove)?;
    let updated = LcfNetModel::from_parts(
        cfg.clone(),
        model.input_dim(),
        model.num_targets(),
        model.whitening().cloned(),
        model.weights().to_vec(),
        model.layer_stats().to_vec(),
        head,
    )?;
    Ok((updated, new))
}
