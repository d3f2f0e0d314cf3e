//! Pipeline A: propagated features, ridge regression with label smoothing,
//! optional Correct-and-Smooth.

mod cns;
mod lp;

use serde::{Deserialize, Serialize};

pub use cns::{correct_and_smooth, CnsParams};
pub use lp::{appnp_label_propagation, fit_lp_ridge, LpRidge};

use crate::data::{normalize_row, Dataset};
use crate::error::{Error, Result};
use crate::forget::ForgetRequest;
use crate::graph::{HopStack, NodeSet};
use crate::numerics::mat::{row_times, softmax_rows};
use crate::numerics::ridge::RowPair;
use crate::numerics::{gram_downdate, Mat, Precision, RffMap, RidgeStats};

/// Largest propagation depth accepted.
pub const MAX_HOPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XSource {
    Raw,
    RowNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `H = Ã^K X_src`.
    Plain,
    /// `H = [X_src ‖ ÃX_src ‖ … ‖ Ã^K X_src]`, group `g` scaled by `√(α/α_g)`.
    MultihopConcat,
    /// Random Fourier features of the unscaled multi-hop concatenation.
    MultihopRff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffParams {
    pub num_features: usize,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineAConfig {
    pub k: usize,
    pub x_src: XSource,
    pub alpha: f64,
    pub epsilon: f64,
    pub variant: Variant,
    /// Per-hop ridge penalties `α_0..α_K` for the concatenation variant.
    /// Absent means every group uses `alpha`.
    #[serde(default)]
    pub group_alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub cns: Option<CnsParams>,
    #[serde(default)]
    pub rff: Option<RffParams>,
    #[serde(default)]
    pub precision: Precision,
}

impl Default for PipelineAConfig {
    fn default() -> Self {
        Self {
            k: 2,
            x_src: XSource::RowNormalized,
            alpha: 1.0,
            epsilon: 0.0,
            variant: Variant::Plain,
            group_alphas: None,
            cns: None,
            rff: None,
            precision: Precision::Fp64,
        }
    }
}

impl PipelineAConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k > MAX_HOPS {
            return bad(format!("k = {} exceeds {MAX_HOPS}", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive and finite, got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if let Some(g) = &self.group_alphas {
            if g.len() != self.k + 1 {
                return bad(format!("group_alphas needs k + 1 = {} entries, got {}", self.k + 1, g.len()));
            }
            if g.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return bad("group_alphas must be positive".into());
            }
        }
        if self.variant == Variant::MultihopRff && self.rff.is_none() {
            return bad("multihop-rff needs an [rff] section".into());
        }
        if let Some(c) = &self.cns {
            c.validate()?;
        }
        Ok(())
    }
}

/// `(1 − ε) Y + ε / C`, entrywise.
pub fn smooth_labels(y: &Mat, epsilon: f64) -> Mat {
    let c = y.cols() as f64;
    y.map(|v| (1.0 - epsilon) * v + epsilon / c)
}

fn source_row(ds: &Dataset, x_src: XSource, v: usize, out: &mut [f64]) {
    out.copy_from_slice(ds.features.row(v));
    if x_src == XSource::RowNormalized {
        normalize_row(out);
    }
}

/// `X` or `X̂`, depending on `x_src`.
pub fn source_matrix(ds: &Dataset, x_src: XSource) -> Mat {
    match x_src {
        XSource::Raw => ds.features.clone(),
        XSource::RowNormalized => ds.row_normalized_features(),
    }
}

/// Turns hop matrices into one feature row.
#[derive(Debug, Clone, PartialEq)]
struct FeatureMap {
    variant: Variant,
    k: usize,
    input_dim: usize,
    group_scale: Vec<f64>,
    rff: Option<RffMap>,
    precision: Precision,
}

impl FeatureMap {
    fn new(cfg: &PipelineAConfig, input_dim: usize) -> Result<Self> {
        let group_scale = match &cfg.group_alphas {
            Some(g) => g.iter().map(|&ag| (cfg.alpha / ag).sqrt()).collect(),
            None => vec![1.0; cfg.k + 1],
        };
        let rff = match (cfg.variant, &cfg.rff) {
            (Variant::MultihopRff, Some(p)) => Some(RffMap::new(
                (cfg.k + 1) * input_dim,
                p.num_features,
                p.sigma,
                p.seed,
            )?),
            _ => None,
        };
        Ok(Self {
            variant: cfg.variant,
            k: cfg.k,
            input_dim,
            group_scale,
            rff,
            precision: cfg.precision,
        })
    }

    fn dim(&self) -> usize {
        match self.variant {
            Variant::Plain => self.input_dim,
            Variant::MultihopConcat => (self.k + 1) * self.input_dim,
            Variant::MultihopRff => self.rff.as_ref().map_or(0, RffMap::output_dim),
        }
    }

    fn row(&self, hops: &HopStack, v: usize, out: &mut [f64]) {
        let d = self.input_dim;
        match self.variant {
            Variant::Plain => out.copy_from_slice(hops.hop(self.k).row(v)),
            Variant::MultihopConcat => {
                for g in 0..=self.k {
                    let s = self.group_scale[g];
                    for (o, &x) in out[g * d..(g + 1) * d].iter_mut().zip(hops.hop(g).row(v)) {
                        *o = x * s;
                    }
                }
            }
            Variant::MultihopRff => {
                let mut cat = vec![0.0; (self.k + 1) * d];
                for g in 0..=self.k {
                    cat[g * d..(g + 1) * d].copy_from_slice(hops.hop(g).row(v));
                }
                self.rff.as_ref().expect("rff map").apply_row(&cat, out);
            }
        }
        self.precision.round_row(out);
    }

    fn rows(&self, hops: &HopStack, nodes: &[usize]) -> Mat {
        let mut h = Mat::zeros(nodes.len(), self.dim());
        for (i, &v) in nodes.iter().enumerate() {
            self.row(hops, v, h.row_mut(i));
        }
        h
    }
}

/// Feature matrix `H` (`n x D`) of Pipeline A.
pub fn build_features_a(ds: &Dataset, cfg: &PipelineAConfig) -> Result<Mat> {
    cfg.validate()?;
    let hops = HopStack::build(&ds.graph, source_matrix(ds, cfg.x_src), cfg.k)?;
    let fmap = FeatureMap::new(cfg, ds.features.cols())?;
    let all: Vec<usize> = (0..ds.n()).collect();
    Ok(fmap.rows(&hops, &all))
}

/// A fitted Pipeline A model.
///
/// Besides the weights and ridge statistics the model keeps the hop matrices
/// `Ã^k X_src` of the dataset it was fit (or last unlearned) on; they make
/// local unlearning possible and are rebuilt on demand after deserialization.
#[derive(Debug, Clone)]
pub struct PipelineAModel {
    config: PipelineAConfig,
    input_dim: usize,
    w: Mat,
    stats: RidgeStats,
    fmap: FeatureMap,
    hops: Option<HopStack>,
}

impl PartialEq for PipelineAModel {
    /// Compares configuration, weights and statistics; caches are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.input_dim == other.input_dim
            && self.w.bit_eq(&other.w)
            && self.stats == other.stats
    }
}

/// Row counts from a local update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalUpdate {
    /// `|N_L(S)|`: feature rows recomputed.
    pub touched_rows: usize,
    /// `|N_L(S) ∩ (V_tr ∪ V_tr′)|`: rows folded in or out of the statistics.
    pub affected_train: usize,
}

fn train_targets(ds: &Dataset, nodes: &[usize], epsilon: f64) -> Mat {
    smooth_labels(&ds.labels.targets(nodes), epsilon)
}

/// Fits Pipeline A on the training rows of `ds`.
pub fn fit_a(ds: &Dataset, cfg: &PipelineAConfig) -> Result<PipelineAModel> {
    cfg.validate()?;
    let train = ds.train_nodes();
    if train.is_empty() {
        return Err(Error::InvalidConfig("training mask is empty".into()));
    }
    let hops = HopStack::build(&ds.graph, source_matrix(ds, cfg.x_src), cfg.k)?;
    let fmap = FeatureMap::new(cfg, ds.features.cols())?;
    let h_tr = fmap.rows(&hops, train.as_slice());
    let y_tr = train_targets(ds, train.as_slice(), cfg.epsilon);
    let stats = RidgeStats::assemble(&h_tr, &y_tr, cfg.alpha)?;
    let w = cfg.precision.round(stats.solve()?);
    Ok(PipelineAModel {
        config: cfg.clone(),
        input_dim: ds.features.cols(),
        w,
        stats,
        fmap,
        hops: Some(hops),
    })
}

impl PipelineAModel {
    /// Reassembles a model from stored parts; the hop cache starts empty.
    pub fn from_parts(config: PipelineAConfig, input_dim: usize, w: Mat, stats: RidgeStats) -> Result<Self> {
        config.validate()?;
        let fmap = FeatureMap::new(&config, input_dim)?;
        if w.rows() != fmap.dim() || stats.dim() != fmap.dim() || w.cols() != stats.targets() {
            return Err(Error::ShapeMismatch(format!(
                "weights {}x{} and statistics {}x{} do not fit feature width {}",
                w.rows(),
                w.cols(),
                stats.dim(),
                stats.targets(),
                fmap.dim()
            )));
        }
        Ok(Self {
            config,
            input_dim,
            w,
            stats,
            fmap,
            hops: None,
        })
    }

    pub fn config(&self) -> &PipelineAConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weights(&self) -> &Mat {
        &self.w
    }

    pub fn stats(&self) -> &RidgeStats {
        &self.stats
    }

    pub fn feature_dim(&self) -> usize {
        self.fmap.dim()
    }

    pub fn has_cache(&self) -> bool {
        self.hops.is_some()
    }

    fn check_input(&self, ds: &Dataset) -> Result<()> {
        if ds.features.cols() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} input features, dataset has {}",
                self.input_dim,
                ds.features.cols()
            )));
        }
        Ok(())
    }

    /// Rebuilds the hop cache from `ds`, which must be the data the model currently reflects.
    pub fn attach(&mut self, ds: &Dataset) -> Result<()> {
        self.check_input(ds)?;
        self.hops = Some(HopStack::build(&ds.graph, source_matrix(ds, self.config.x_src), self.config.k)?);
        Ok(())
    }

    /// Raw scores `H W` (then Correct-and-Smooth when configured), recomputing `H` from `ds`.
    pub fn predict(&self, ds: &Dataset) -> Result<Mat> {
        self.check_input(ds)?;
        let hops = HopStack::build(&ds.graph, source_matrix(ds, self.config.x_src), self.config.k)?;
        self.scores_from(&hops, ds)
    }

    /// Like [`PipelineAModel::predict`] but reuses the cached hops, which
    /// describe the data of the last fit or unlearning step.
    pub fn predict_cached(&self, ds: &Dataset) -> Result<Mat> {
        match &self.hops {
            Some(h) => self.scores_from(h, ds),
            None => self.predict(ds),
        }
    }

    fn scores_from(&self, hops: &HopStack, ds: &Dataset) -> Result<Mat> {
        let n = hops.hop(0).rows();
        let mut out = Mat::zeros(n, self.w.cols());
        let mut h = vec![0.0; self.fmap.dim()];
        for v in 0..n {
            self.fmap.row(hops, v, &mut h);
            row_times(&h, &self.w, out.row_mut(v));
        }
        match &self.config.cns {
            Some(p) => correct_and_smooth(ds, &out, p),
            None => Ok(out),
        }
    }

    /// Row-wise softmax of [`PipelineAModel::predict`].
    pub fn predict_proba(&self, ds: &Dataset) -> Result<Mat> {
        Ok(softmax_rows(&self.predict(ds)?))
    }

    /// Updates the model in place after `req` turned `old` into `new`.
    ///
    /// `affected` is the set `S` returned by the modification. Only rows within
    /// `K` hops of `S` on the old graph are recomputed and exchanged in the
    /// ridge statistics; label forget exchanges the `S` rows alone.
    pub fn unlearn_local(
        &mut self,
        old: &Dataset,
        new: &Dataset,
        req: &ForgetRequest,
        affected: &NodeSet,
    ) -> Result<LocalUpdate> {
        if self.hops.is_none() {
            self.attach(old)?;
        }
        let label_only = matches!(req, ForgetRequest::Label(_));
        let layers = if label_only {
            vec![affected.as_slice().to_vec()]
        } else {
            old.graph.distance_layers(affected, self.config.k)?
        };
        let mut region: Vec<usize> = layers.concat();
        region.sort_unstable();
        let rows: Vec<usize> = region.iter().copied().filter(|&v| old.train[v] || new.train[v]).collect();

        let eps = self.config.epsilon;
        let old_nodes: Vec<usize> = rows.iter().copied().filter(|&v| old.train[v]).collect();
        let new_nodes: Vec<usize> = rows.iter().copied().filter(|&v| new.train[v]).collect();
        let hops = self.hops.as_mut().expect("cache attached");
        let h_old = self.fmap.rows(hops, &old_nodes);
        let y_old = train_targets(old, &old_nodes, eps);
        if !label_only {
            let x_src = self.config.x_src;
            hops.refresh(&new.graph, &layers, |v, out| source_row(new, x_src, v, out));
        }
        let h_new = self.fmap.rows(hops, &new_nodes);
        let y_new = train_targets(new, &new_nodes, eps);

        let old_rows: Vec<RowPair<'_>> = (0..h_old.rows()).map(|i| (h_old.row(i), y_old.row(i))).collect();
        let new_rows: Vec<RowPair<'_>> = (0..h_new.rows()).map(|i| (h_new.row(i), y_new.row(i))).collect();
        self.stats = gram_downdate(&self.stats, &old_rows, &new_rows)?;
        self.w = self.config.precision.round(self.stats.solve()?);
        Ok(LocalUpdate {
            touched_rows: region.len(),
            affected_train: rows.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sbm, SbmSpec};

    #[test]
    fn smoothing_formula() {
        let y = Mat::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let s = smooth_labels(&y, 0.1);
        assert!((s[(0, 0)] - 0.925).abs() < 1e-15);
        assert!((s[(0, 1)] - 0.025).abs() < 1e-15);
        assert!(smooth_labels(&y, 0.0).bit_eq(&y));
        let u = smooth_labels(&y, 1.0);
        assert!(u.as_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn k0_plain_is_source() {
        let ds = generate_sbm(&SbmSpec {
            n: 40,
            num_classes: 2,
            p_in: 0.2,
            p_out: 0.02,
            feature_dim: 3,
            class_mean_separation: 2.0,
            seed: 1,
        })
        .unwrap();
        let cfg = PipelineAConfig {
            k: 0,
            x_src: XSource::Raw,
            ..Default::default()
        };
        assert!(build_features_a(&ds, &cfg).unwrap().bit_eq(&ds.features));
    }

    #[test]
    fn config_checks() {
        let mut c = PipelineAConfig::default();
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
        let mut c = PipelineAConfig::default();
        c.variant = Variant::MultihopRff;
        assert!(c.validate().is_err());
        let mut c = PipelineAConfig::default();
        c.group_alphas = Some(vec![1.0]);
        assert!(c.validate().is_err());
    }
}
