use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{ridge_solve, Mat};

/// Personalized-PageRank label propagation.
///
/// `Z⁰` holds the `{0,1}` targets of training nodes and zeros elsewhere;
/// each step is `Z ← (1 − α) Ã Z + α Z⁰`.
pub fn appnp_label_propagation(ds: &Dataset, alpha_ppr: f64, iters: usize) -> Result<Mat> {
    if !(alpha_ppr > 0.0 && alpha_ppr <= 1.0) {
        return Err(Error::InvalidConfig(format!("alpha_ppr must lie in (0, 1], got {alpha_ppr}")));
    }
    let mut z0 = Mat::zeros(ds.n(), ds.num_targets());
    for v in ds.train_nodes().iter().copied() {
        ds.labels.target_row(v, z0.row_mut(v));
    }
    let mut z = z0.clone();
    for _ in 0..iters {
        let az = ds.graph.propagate(&z)?;
        for ((zi, &a), &b) in z.as_mut_slice().iter_mut().zip(az.as_slice()).zip(z0.as_slice()) {
            *zi = (1.0 - alpha_ppr) * a + alpha_ppr * b;
        }
    }
    Ok(z)
}

/// Ridge regression on propagated labels, one `{0,1}` target column per task.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRidge {
    pub alpha_ppr: f64,
    pub iters: usize,
    pub alpha: f64,
    pub w: Mat,
}

impl LpRidge {
    pub fn predict(&self, ds: &Dataset) -> Result<Mat> {
        appnp_label_propagation(ds, self.alpha_ppr, self.iters)?.matmul(&self.w)
    }
}

pub fn fit_lp_ridge(ds: &Dataset, alpha_ppr: f64, iters: usize, alpha: f64) -> Result<LpRidge> {
    let z = appnp_label_propagation(ds, alpha_ppr, iters)?;
    let train = ds.train_nodes();
    if train.is_empty() {
        return Err(Error::InvalidConfig("training mask is empty".into()));
    }
    let (w, _) = ridge_solve(
        &z.select_rows(train.as_slice()),
        &ds.labels.targets(train.as_slice()),
        alpha,
    )?;
    Ok(LpRidge {
        alpha_ppr,
        iters,
        alpha,
        w,
    })
}
