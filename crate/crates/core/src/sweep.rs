//! Hyperparameter grids and validation-only model selection.
//!
//! Grids are read from TOML. Every axis has a default, so an empty file
//! sweeps the full default grid of both pipelines:
//!
//! ```toml
//! precision = "fp64"
//!
//! [pipeline_a]
//! k = [1, 2, 3]
//! x_src = ["raw", "row-normalized"]
//! alpha = [0.1, 1.0, 10.0]
//! epsilon = [0.0, 0.1]
//! cns = [false, true]
//!
//! [pipeline_b]
//! k = [3]
//! phi = ["tanh"]
//! lambda = [1.0]
//! sigma_scale = [1.0]
//! lambda_prime = [0.1]
//! ```
//!
//! Axis values are sorted and deduplicated, and cells are enumerated in
//! lexicographic order of the tuple of axes as listed in each section. The
//! selected cell is the first one reaching the best validation score, which
//! makes ties resolve to the lexicographically smallest configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{evaluate, Dataset, Pipeline};
use crate::error::{Error, Result};
use crate::lcfnet::{BaseFeatureFlags, LcfConfig, Phi};
use crate::model::{Model, ModelConfig};
use crate::numerics::Precision;
use crate::pipeline_a::{CnsParams, PipelineAConfig, RffParams, Variant, XSource};

fn powers_of_ten(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridA {
    pub k: Vec<usize>,
    pub x_src: Vec<XSource>,
    pub alpha: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Correct-and-Smooth off and/or on.
    pub cns: Vec<bool>,
    pub variant: Variant,
    pub cns_params: CnsParams,
    /// Needed by the `multihop-rff` variant.
    pub rff: Option<RffParams>,
    /// Per-hop penalties; only meaningful with a single `k`.
    pub group_alphas: Option<Vec<f64>>,
}

impl Default for GridA {
    fn default() -> Self {
        Self {
            k: (1..=8).collect(),
            x_src: vec![XSource::Raw, XSource::RowNormalized],
            alpha: powers_of_ten(-3, 3),
            epsilon: vec![0.0, 0.05, 0.1],
            cns: vec![false, true],
            variant: Variant::Plain,
            cns_params: CnsParams::default(),
            rff: None,
            group_alphas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridB {
    pub k: Vec<usize>,
    pub phi: Vec<Phi>,
    pub lambda: Vec<f64>,
    pub sigma_scale: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    /// `false` is the kernel-only model on `h₀`.
    pub use_lcf: Vec<bool>,
    pub whiten: Vec<bool>,
    pub base: BaseFeatureFlags,
    /// Fixed bandwidth replacing the `sigma_scale` axis.
    pub sigma_abs: Option<f64>,
}

impl Default for GridB {
    fn default() -> Self {
        Self {
            k: vec![3, 6, 9],
            phi: vec![Phi::None, Phi::Tanh, Phi::Elu],
            lambda: vec![0.5, 1.0, 2.0],
            sigma_scale: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            lambda_prime: powers_of_ten(-4, 1),
            use_lcf: vec![false, true],
            whiten: vec![true],
            base: BaseFeatureFlags::default(),
            sigma_abs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub precision: Precision,
    pub pipeline_a: GridA,
    pub pipeline_b: GridB,
}

fn sorted<T: PartialOrd + Clone>(v: &[T], axis: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::InvalidConfig(format!("grid axis {axis} is empty")));
    }
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("grid values are comparable"));
    out.dedup_by(|a, b| a == b);
    Ok(out)
}

fn floats(v: &[f64], axis: &str) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("grid axis {axis} has a non-finite value")));
    }
    sorted(v, axis)
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// A grid holding exactly one configuration.
    pub fn single(cfg: &ModelConfig) -> Self {
        let mut s = SweepConfig {
            precision: cfg.precision(),
            ..Default::default()
        };
        match cfg {
            ModelConfig::A(c) => {
                s.pipeline_a = GridA {
                    k: vec![c.k],
                    x_src: vec![c.x_src],
                    alpha: vec![c.alpha],
                    epsilon: vec![c.epsilon],
                    cns: vec![c.cns.is_some()],
                    variant: c.variant,
                    cns_params: c.cns.clone().unwrap_or_default(),
                    rff: c.rff.clone(),
                    group_alphas: c.group_alphas.clone(),
                }
            }
            ModelConfig::B(c) => {
                s.pipeline_b = GridB {
                    k: vec![c.k],
                    phi: vec![c.phi],
                    lambda: vec![c.lambda],
                    sigma_scale: vec![c.sigma_scale],
                    lambda_prime: vec![c.lambda_prime],
                    use_lcf: vec![c.use_lcf],
                    whiten: vec![c.whiten],
                    base: c.base,
                    sigma_abs: c.sigma_abs,
                }
            }
        }
        s
    }

    /// Every cell of one pipeline's grid, in selection order.
    pub fn configs(&self, pipeline: Pipeline) -> Result<Vec<ModelConfig>> {
        let mut out = Vec::new();
        match pipeline {
            Pipeline::A => {
                let g = &self.pipeline_a;
                for k in sorted(&g.k, "k")? {
                    for x_src in sorted(&g.x_src, "x_src")? {
                        for alpha in floats(&g.alpha, "alpha")? {
                            for epsilon in floats(&g.epsilon, "epsilon")? {
                                for cns in sorted(&g.cns, "cns")? {
                                    let c = PipelineAConfig {
                                        k,
                                        x_src,
                                        alpha,
                                        epsilon,
                                        variant: g.variant,
                                        group_alphas: g.group_alphas.clone(),
                                        cns: cns.then(|| g.cns_params.clone()),
                                        rff: g.rff.clone(),
                                        precision: self.precision,
                                    };
                                    c.validate()?;
                                    out.push(ModelConfig::A(c));
                                }
                            }
                        }
                    }
                }
            }
            Pipeline::B => {
                let g = &self.pipeline_b;
                let ks = sorted(&g.k, "k")?;
                let phis = sorted(&g.phi, "phi")?;
                let lambdas = floats(&g.lambda, "lambda")?;
                for &k in &ks {
                    for &phi in &phis {
                        for &lambda in &lambdas {
                            for sigma_scale in floats(&g.sigma_scale, "sigma_scale")? {
                                for lambda_prime in floats(&g.lambda_prime, "lambda_prime")? {
                                    for use_lcf in sorted(&g.use_lcf, "use_lcf")? {
                                        // Without layers, k, phi and lambda have no effect.
                                        if !use_lcf && (k != ks[0] || phi != phis[0] || lambda != lambdas[0]) {
                                            continue;
                                        }
                                        for whiten in sorted(&g.whiten, "whiten")? {
                                            let c = LcfConfig {
                                                k,
                                                phi,
                                                lambda,
                                                sigma_scale,
                                                sigma_abs: g.sigma_abs,
                                                lambda_prime,
                                                use_lcf,
                                                base: g.base,
                                                whiten,
                                                precision: self.precision,
                                            };
                                            c.validate()?;
                                            out.push(ModelConfig::B(c));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub config: ModelConfig,
    /// Validation score used for selection; absent when the fit failed.
    pub val: Option<f64>,
    /// Test score, recorded for audit only.
    pub test: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub pipeline: Pipeline,
    pub selected: usize,
    pub cells: Vec<SweepCell>,
}

/// Picks the first cell with the highest validation score.
pub fn select_best(val_scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in val_scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Fits every cell of `pipeline`'s grid and returns the selected model.
///
/// Selection reads validation scores only. Test scores are computed after
/// each fit and stored in the report without influencing the choice.
pub fn run_sweep(ds: &Dataset, cfg: &SweepConfig, pipeline: Pipeline) -> Result<(Model, SweepReport)> {
    if ds.val.iter().all(|&b| !b) {
        return Err(Error::InvalidConfig("validation mask is empty; nothing to select on".into()));
    }
    let configs = cfg.configs(pipeline)?;
    let mut cells = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64, Model)> = None;
    for (i, c) in configs.into_iter().enumerate() {
        let scored = Model::fit(ds, &c).and_then(|m| {
            let pred = m.predict(ds)?;
            let val = evaluate(&pred, ds, &ds.val)?;
            Ok((m, val, pred))
        });
        match scored {
            Ok((m, val, pred)) => {
                let test = ds.test.iter().any(|&b| b).then(|| evaluate(&pred, ds, &ds.test)).transpose()?;
                if best.as_ref().is_none_or(|(_, b, _)| val > *b) {
                    best = Some((i, val, m));
                }
                cells.push(SweepCell {
                    config: c,
                    val: Some(val),
                    test,
                    error: None,
                });
            }
            Err(e) if e.is_numerical() => cells.push(SweepCell {
                config: c,
                val: None,
                test: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    let (selected, _, model) = best.ok_or_else(|| Error::InvalidConfig("every grid cell failed to fit".into()))?;
    Ok((
        model,
        SweepReport {
            pipeline,
            selected,
            cells,
        },
    ))
}
