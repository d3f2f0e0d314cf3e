//! LCF-Net: layer-wise closed-form aggregation with a Gaussian KRR head.
//!
//! Each layer propagates the current representation, applies a pointwise
//! nonlinearity, fits a ridge map to the training labels and appends its
//! predictions as new columns:
//!
//! ```text
//! a_k = φ(Ã h_{k-1}),  W_k = ridge(a_k[tr], Y_tr, λ),  p_k = a_k W_k,  h_k = [h_{k-1} ‖ p_k]
//! ```
//!
//! so `h_{k-1}` has width `d₀ + (k−1)·C`. A Gaussian kernel ridge head on the
//! training rows of `h_K` makes the final prediction.

mod base;

use serde::{Deserialize, Serialize};

pub use base::{attn_row, base_features_h0, BaseCache, BaseFeatureFlags};

use crate::data::{normalize_row, Dataset};
use crate::error::{Error, Result};
use crate::forget::ForgetRequest;
use crate::graph::{Graph, NodeSet};
use crate::numerics::kernel::DEFAULT_CHUNK;
use crate::numerics::mat::{row_times, softmax_rows};
use crate::numerics::ridge::RowPair;
use crate::numerics::whiten::ColumnStats;
use crate::numerics::{
    gram_downdate, krr_fit, krr_predict, median_pairwise_distance, KernelHead, Mat, Precision, RidgeStats,
};

/// Rows used to estimate the median pairwise distance.
pub const SIGMA_MED_ROWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phi {
    None,
    Tanh,
    /// `x` for `x > 0`, `eˣ − 1` otherwise.
    Elu,
}

impl Phi {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Phi::None => x,
            Phi::Tanh => x.tanh(),
            Phi::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcfConfig {
    pub k: usize,
    pub phi: Phi,
    pub lambda: f64,
    /// Bandwidth as a multiple of the median pairwise distance of `h_K` training rows.
    pub sigma_scale: f64,
    /// Fixed bandwidth; overrides `sigma_scale` when present.
    #[serde(default)]
    pub sigma_abs: Option<f64>,
    pub lambda_prime: f64,
    /// `false` skips the layers and fits the head on `h₀` directly.
    pub use_lcf: bool,
    #[serde(default)]
    pub base: BaseFeatureFlags,
    /// Standardize `h₀` columns with training-row statistics.
    pub whiten: bool,
    #[serde(default)]
    pub precision: Precision,
}

impl Default for LcfConfig {
    fn default() -> Self {
        Self {
            k: 3,
            phi: Phi::Tanh,
            lambda: 1.0,
            sigma_scale: 1.0,
            sigma_abs: None,
            lambda_prime: 0.1,
            use_lcf: true,
            base: BaseFeatureFlags::default(),
            whiten: true,
            precision: Precision::Fp64,
        }
    }
}

impl LcfConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("lambda", self.lambda)?;
        pos("sigma_scale", self.sigma_scale)?;
        pos("lambda_prime", self.lambda_prime)?;
        if let Some(s) = self.sigma_abs {
            pos("sigma_abs", s)?;
        }
        if self.base.count() == 0 {
            return Err(Error::InvalidConfig("every h0 block is disabled".into()));
        }
        Ok(())
    }

    /// Number of closed-form layers actually run.
    pub fn layers(&self) -> usize {
        if self.use_lcf {
            self.k
        } else {
            0
        }
    }
}

/// One aggregation layer: `a = φ(Ã h)`, ridge fit, `p = a W`, `h′ = [h ‖ p]`.
pub fn lcf_layer(
    g: &Graph,
    h_prev: &Mat,
    phi: Phi,
    lambda: f64,
    y_tr: &Mat,
    train: &NodeSet,
) -> Result<(Mat, Mat, Mat)> {
    let a = activate(g, h_prev, phi)?;
    let (w, _) = crate::numerics::ridge_solve(&a.select_rows(train.as_slice()), y_tr, lambda)?;
    let p = a.matmul(&w)?;
    let h_next = h_prev.hcat(&p)?;
    Ok((p, w, h_next))
}

fn activate(g: &Graph, h: &Mat, phi: Phi) -> Result<Mat> {
    let mut a = g.propagate(h)?;
    if phi != Phi::None {
        a.as_mut_slice().iter_mut().for_each(|x| *x = phi.apply(*x));
    }
    Ok(a)
}

fn activate_row(g: &Graph, h: &Mat, phi: Phi, v: usize, out: &mut [f64]) {
    g.propagate_row(v, h, out);
    if phi != Phi::None {
        out.iter_mut().for_each(|x| *x = phi.apply(*x));
    }
}

/// State kept from fitting so that a one-layer model can be unlearned locally.
#[derive(Debug, Clone)]
struct LocalCache {
    base: BaseCache,
    h0: Mat,
    a1: Mat,
}

#[derive(Debug, Clone)]
pub struct LcfNetModel {
    config: LcfConfig,
    input_dim: usize,
    num_targets: usize,
    whitening: Option<ColumnStats>,
    weights: Vec<Mat>,
    layer_stats: Vec<RidgeStats>,
    head: KernelHead,
    cache: Option<LocalCache>,
}

impl PartialEq for LcfNetModel {
    /// Compares everything learned; caches are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.input_dim == other.input_dim
            && self.num_targets == other.num_targets
            && self.whitening == other.whitening
            && self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.bit_eq(b))
            && self.layer_stats == other.layer_stats
            && self.head == other.head
    }
}

/// Intermediate products of a forward pass.
struct Forward {
    h0: Mat,
    a1: Option<Mat>,
    h_k: Mat,
}

fn head_sigma(cfg: &LcfConfig, h_tr: &Mat) -> f64 {
    match cfg.sigma_abs {
        Some(s) => s,
        None => cfg.sigma_scale * median_pairwise_distance(h_tr, SIGMA_MED_ROWS),
    }
}

fn check_labels(ds: &Dataset) -> Result<NodeSet> {
    let train = ds.train_nodes();
    if train.is_empty() {
        return Err(Error::InvalidConfig("training mask is empty".into()));
    }
    Ok(train)
}

/// Fits LCF-Net (or the KRR-only variant when `use_lcf` is off).
pub fn fit_lcfnet(ds: &Dataset, cfg: &LcfConfig) -> Result<LcfNetModel> {
    cfg.validate()?;
    let train = check_labels(ds)?;
    let base = BaseCache::build(ds, cfg.base)?;
    let raw_h0 = base.matrix(&ds.graph);
    let whitening = if cfg.whiten {
        Some(ColumnStats::compute(&raw_h0, &train)?)
    } else {
        None
    };
    let h0 = cfg.precision.round(match &whitening {
        Some(w) => w.apply(&raw_h0),
        None => raw_h0,
    });
    let y_tr = ds.labels.targets(train.as_slice());

    let mut weights = Vec::with_capacity(cfg.layers());
    let mut layer_stats = Vec::with_capacity(cfg.layers());
    let mut h = h0.clone();
    let mut a1 = None;
    for layer in 0..cfg.layers() {
        let a = cfg.precision.round(activate(&ds.graph, &h, cfg.phi)?);
        let stats = RidgeStats::assemble(&a.select_rows(train.as_slice()), &y_tr, cfg.lambda)?;
        let w = cfg.precision.round(stats.solve()?);
        h = append_predictions(&h, &a, &w);
        if layer == 0 {
            a1 = Some(a);
        }
        weights.push(w);
        layer_stats.push(stats);
    }
    let h_tr = h.select_rows(train.as_slice());
    let head = krr_fit(&h_tr, &y_tr, head_sigma(cfg, &h_tr), cfg.lambda_prime)?;
    let cache = match a1 {
        Some(a1) if cfg.layers() == 1 && !cfg.whiten => Some(LocalCache { base, h0, a1 }),
        _ => None,
    };
    Ok(LcfNetModel {
        config: cfg.clone(),
        input_dim: ds.features.cols(),
        num_targets: ds.num_targets(),
        whitening,
        weights,
        layer_stats,
        head,
        cache,
    })
}

/// `[h ‖ a W]`, with `a W` computed row by row.
fn append_predictions(h: &Mat, a: &Mat, w: &Mat) -> Mat {
    let n = h.rows();
    let (dh, c) = (h.cols(), w.cols());
    let mut out = Mat::zeros(n, dh + c);
    for v in 0..n {
        let row = out.row_mut(v);
        row[..dh].copy_from_slice(h.row(v));
        row_times(a.row(v), w, &mut row[dh..]);
    }
    out
}

/// Row counts from a local update of a one-layer model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcfLocalUpdate {
    pub touched_rows: usize,
    pub affected_train: usize,
}

impl LcfNetModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: LcfConfig,
        input_dim: usize,
        num_targets: usize,
        whitening: Option<ColumnStats>,
        weights: Vec<Mat>,
        layer_stats: Vec<RidgeStats>,
        head: KernelHead,
    ) -> Result<Self> {
        config.validate()?;
        if weights.len() != config.layers() || layer_stats.len() != config.layers() {
            return Err(Error::ShapeMismatch(format!(
                "{} layer weights for {} layers",
                weights.len(),
                config.layers()
            )));
        }
        Ok(Self {
            config,
            input_dim,
            num_targets,
            whitening,
            weights,
            layer_stats,
            head,
            cache: None,
        })
    }

    pub fn config(&self) -> &LcfConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    pub fn whitening(&self) -> Option<&ColumnStats> {
        self.whitening.as_ref()
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn layer_stats(&self) -> &[RidgeStats] {
        &self.layer_stats
    }

    pub fn head(&self) -> &KernelHead {
        &self.head
    }

    /// Input width of layer `k` (1-based): `d₀ + (k − 1)·C`.
    pub fn layer_width(&self, k: usize) -> usize {
        self.base_width() + (k - 1) * self.num_targets
    }

    pub fn base_width(&self) -> usize {
        self.config.base.count() * self.input_dim
    }

    /// Whether K-hop local unlearning applies: one layer, no whitening.
    pub fn locality_eligible(&self) -> bool {
        self.config.layers() == 1 && !self.config.whiten
    }

    fn forward(&self, ds: &Dataset) -> Result<Forward> {
        if ds.features.cols() != self.input_dim || ds.num_targets() != self.num_targets {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features and {} targets, dataset has {} and {}",
                self.input_dim,
                self.num_targets,
                ds.features.cols(),
                ds.num_targets()
            )));
        }
        let raw = base_features_h0(ds, self.config.base)?;
        let h0 = self.config.precision.round(match &self.whitening {
            Some(w) => w.apply(&raw),
            None => raw,
        });
        let mut h = h0.clone();
        let mut a1 = None;
        for (layer, w) in self.weights.iter().enumerate() {
            let a = self.config.precision.round(activate(&ds.graph, &h, self.config.phi)?);
            h = append_predictions(&h, &a, w);
            if layer == 0 {
                a1 = Some(a);
            }
        }
        Ok(Forward { h0, a1, h_k: h })
    }

    /// Replays the stored layers on `ds` and applies the kernel head.
    pub fn predict(&self, ds: &Dataset) -> Result<Mat> {
        self.predict_chunked(ds, DEFAULT_CHUNK)
    }

    pub fn predict_chunked(&self, ds: &Dataset, chunk: usize) -> Result<Mat> {
        let f = self.forward(ds)?;
        krr_predict(&self.head, &f.h_k, chunk)
    }

    pub fn predict_proba(&self, ds: &Dataset) -> Result<Mat> {
        Ok(softmax_rows(&self.predict(ds)?))
    }

    /// Final representation `h_K` for every node.
    pub fn representation(&self, ds: &Dataset) -> Result<Mat> {
        Ok(self.forward(ds)?.h_k)
    }

    /// Rebuilds the local-update cache from the data the model reflects.
    pub fn attach(&mut self, ds: &Dataset) -> Result<()> {
        if !self.locality_eligible() {
            return Err(Error::NotLocalityEligible(format!(
                "LCF-Net with {} layers and whitening {} has no local update",
                self.config.layers(),
                if self.config.whiten { "on" } else { "off" }
            )));
        }
        let f = self.forward(ds)?;
        self.cache = Some(LocalCache {
            base: BaseCache::build(ds, self.config.base)?,
            h0: f.h0,
            a1: f.a1.expect("one layer"),
        });
        Ok(())
    }

    /// Local update of layer 1 followed by a global refresh of `p₁` and a
    /// full re-solve of the kernel head. Only one-layer models without
    /// whitening qualify; deeper layers depend on every row of `p₁`.
    pub fn unlearn_local(
        &mut self,
        old: &Dataset,
        new: &Dataset,
        req: &ForgetRequest,
        affected: &NodeSet,
    ) -> Result<LcfLocalUpdate> {
        if self.cache.is_none() {
            self.attach(old)?;
        }
        let cfg = self.config.clone();
        let label_only = matches!(req, ForgetRequest::Label(_));
        let radius = cfg.base.radius() + 1;
        let layers = if label_only {
            vec![affected.as_slice().to_vec()]
        } else {
            old.graph.distance_layers(affected, radius)?
        };
        let within = |r: usize| -> Vec<usize> {
            let mut v: Vec<usize> = layers.iter().take(r + 1).flatten().copied().collect();
            v.sort_unstable();
            v
        };
        let region = within(radius);
        let rows: Vec<usize> = region.iter().copied().filter(|&v| old.train[v] || new.train[v]).collect();
        let old_nodes: Vec<usize> = rows.iter().copied().filter(|&v| old.train[v]).collect();
        let new_nodes: Vec<usize> = rows.iter().copied().filter(|&v| new.train[v]).collect();

        let cache = self.cache.as_mut().expect("cache attached");
        let a_old = cache.a1.select_rows(&old_nodes);
        let y_old = old.labels.targets(&old_nodes);

        if !label_only {
            cache.x_refresh(new, &layers);
            let h0_rows = within(radius - 1);
            let mut buf = vec![0.0; cache.h0.cols()];
            for &v in &h0_rows {
                cache.base.row(&new.graph, v, &mut buf);
                cfg.precision.round_row(&mut buf);
                cache.h0.row_mut(v).copy_from_slice(&buf);
            }
            let mut buf = vec![0.0; cache.a1.cols()];
            for &v in &region {
                activate_row(&new.graph, &cache.h0, cfg.phi, v, &mut buf);
                cfg.precision.round_row(&mut buf);
                cache.a1.row_mut(v).copy_from_slice(&buf);
            }
        }
        let a_new = cache.a1.select_rows(&new_nodes);
        let y_new = new.labels.targets(&new_nodes);
        let old_pairs: Vec<RowPair<'_>> = (0..a_old.rows()).map(|i| (a_old.row(i), y_old.row(i))).collect();
        let new_pairs: Vec<RowPair<'_>> = (0..a_new.rows()).map(|i| (a_new.row(i), y_new.row(i))).collect();
        let stats = gram_downdate(&self.layer_stats[0], &old_pairs, &new_pairs)?;
        let w = cfg.precision.round(stats.solve()?);

        let h1 = append_predictions(&cache.h0, &cache.a1, &w);
        let train = check_labels(new)?;
        let h_tr = h1.select_rows(train.as_slice());
        let y_tr = new.labels.targets(train.as_slice());
        self.head = krr_fit(&h_tr, &y_tr, head_sigma(&cfg, &h_tr), cfg.lambda_prime)?;
        self.layer_stats[0] = stats;
        self.weights[0] = w;
        Ok(LcfLocalUpdate {
            touched_rows: region.len(),
            affected_train: rows.len(),
        })
    }
}

impl LocalCache {
    fn x_refresh(&mut self, new: &Dataset, layers: &[Vec<usize>]) {
        let sq_layers = &layers[..layers.len().min(self.base.sq.depth() + 1)];
        self.base.x.refresh(&new.graph, layers, |v, out| {
            out.copy_from_slice(new.features.row(v));
            normalize_row(out);
        });
        self.base.sq.refresh(&new.graph, sq_layers, |v, out| {
            out.copy_from_slice(new.features.row(v));
            normalize_row(out);
            out.iter_mut().for_each(|x| *x *= *x);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_and_tanh() {
        assert_eq!(Phi::Elu.apply(2.0), 2.0);
        assert!((Phi::Elu.apply(-1.0) - ((-1f64).exp() - 1.0)).abs() < 1e-16);
        assert_eq!(Phi::None.apply(-3.0), -3.0);
        assert_eq!(Phi::Tanh.apply(0.0), 0.0);
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = LcfConfig::default();
        c.lambda_prime = 0.0;
        assert!(c.validate().is_err());
        let mut c = LcfConfig::default();
        c.base = BaseFeatureFlags {
            x: false,
            hop1: false,
            hop2: false,
            hop3: false,
            var1: false,
            var2: false,
            diff01: false,
            diff12: false,
            diff23: false,
            attn: false,
        };
        assert!(c.validate().is_err());
    }
}
