use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{apply_local_update, parameter_delta, retrain_from_scratch, sample_request};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forget::ForgetKind;
use crate::model::{Model, ModelConfig};

fn default_repeats() -> usize {
    3
}

/// Forget kinds and sizes to time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    pub kinds: Vec<ForgetKind>,
    pub sizes: Vec<usize>,
    /// Timings per cell; the median is reported.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            kinds: ForgetKind::ALL.to_vec(),
            sizes: vec![10, 100, 1000],
            repeats: default_repeats(),
            seed: 0,
        }
    }
}

/// One line of the scaling table. Times are seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub kind: ForgetKind,
    pub forget_size: usize,
    /// `|N_L(S)|`, or empty when the model has no local update.
    pub neighborhood: Option<usize>,
    pub t_khop: Option<f64>,
    pub t_full: f64,
    pub t_retrain: f64,
    /// `t_full / t_khop`.
    pub speedup: Option<f64>,
    /// Parameter difference of the K-hop result against retrain.
    pub delta_theta: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Times the K-hop, full and retrain paths for every (kind, size) cell.
///
/// Copies of the data and model are made outside the timed region; each timed
/// run includes applying the modification. The forget set for a cell is drawn
/// once from `grid.seed` and reused across repeats.
pub fn bench_unlearn(ds: &Dataset, cfg: &ModelConfig, grid: &BenchGrid) -> Result<Vec<BenchRow>> {
    if grid.kinds.is_empty() || grid.sizes.is_empty() || grid.repeats == 0 {
        return Err(Error::InvalidConfig("benchmark grid is empty".into()));
    }
    let mut base = Model::fit(ds, cfg)?;
    let local = base.locality_eligible();
    if local {
        base.attach(ds)?;
    }
    let mut rows = Vec::new();
    for &kind in &grid.kinds {
        for &size in &grid.sizes {
            let req = sample_request(ds, kind, size, grid.seed)?;
            let (mut t_khop, mut t_full, mut t_retrain) = (Vec::new(), Vec::new(), Vec::new());
            let mut neighborhood = None;
            let mut delta_theta = None;
            for _ in 0..grid.repeats {
                let mut khop_model = None;
                if local {
                    let mut m = base.clone();
                    let mut new = ds.clone();
                    let t = Instant::now();
                    let s = new.apply_forget_in_place(&req)?;
                    let c = apply_local_update(&mut m, ds, &new, &req, &s)?;
                    t_khop.push(t.elapsed().as_secs_f64());
                    neighborhood = Some(c.touched_rows);
                    khop_model = Some(m);
                }

                let mut new = ds.clone();
                let t = Instant::now();
                new.apply_forget_in_place(&req)?;
                Model::fit(&new, cfg)?;
                t_full.push(t.elapsed().as_secs_f64());

                let t = Instant::now();
                let retrained = retrain_from_scratch(cfg, ds, &req)?;
                t_retrain.push(t.elapsed().as_secs_f64());
                if let Some(m) = khop_model {
                    delta_theta = Some(parameter_delta(&m, &retrained.model)?);
                }
            }
            let t_full = median(t_full);
            let t_khop = (!t_khop.is_empty()).then(|| median(t_khop));
            rows.push(BenchRow {
                kind,
                forget_size: req.size(),
                neighborhood,
                t_khop,
                t_full,
                t_retrain: median(t_retrain),
                speedup: t_khop.map(|t| t_full / t),
                delta_theta,
            });
        }
    }
    Ok(rows)
}

/// Writes the table as CSV with a header row; absent values are empty cells.
pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
