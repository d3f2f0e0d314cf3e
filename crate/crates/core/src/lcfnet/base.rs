//! Base representation `h₀` built from row-normalized features.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, HopStack};
use crate::numerics::Mat;

fn on() -> bool {
    true
}

/// Which blocks of `h₀` to include, in this fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseFeatureFlags {
    #[serde(default = "on")]
    pub x: bool,
    #[serde(default = "on")]
    pub hop1: bool,
    #[serde(default = "on")]
    pub hop2: bool,
    #[serde(default = "on")]
    pub hop3: bool,
    #[serde(default = "on")]
    pub var1: bool,
    #[serde(default = "on")]
    pub var2: bool,
    #[serde(default = "on")]
    pub diff01: bool,
    #[serde(default = "on")]
    pub diff12: bool,
    #[serde(default = "on")]
    pub diff23: bool,
    #[serde(default = "on")]
    pub attn: bool,
}

impl Default for BaseFeatureFlags {
    fn default() -> Self {
        Self {
            x: true,
            hop1: true,
            hop2: true,
            hop3: true,
            var1: true,
            var2: true,
            diff01: true,
            diff12: true,
            diff23: true,
            attn: true,
        }
    }
}

impl BaseFeatureFlags {
    fn blocks(&self) -> [bool; 10] {
        [
            self.x, self.hop1, self.hop2, self.hop3, self.var1, self.var2, self.diff01, self.diff12,
            self.diff23, self.attn,
        ]
    }

    pub fn count(&self) -> usize {
        self.blocks().iter().filter(|&&b| b).count()
    }

    /// Propagation depth of `X̂` needed by the enabled blocks.
    pub fn x_depth(&self) -> usize {
        if self.hop3 || self.diff23 {
            3
        } else if self.hop2 || self.var2 || self.diff12 {
            2
        } else if self.hop1 || self.var1 || self.diff01 {
            1
        } else {
            0
        }
    }

    /// Propagation depth of `X̂ ⊙ X̂` needed by the variance blocks.
    pub fn sq_depth(&self) -> usize {
        if self.var2 {
            2
        } else if self.var1 {
            1
        } else {
            0
        }
    }

    /// Largest hop distance at which a neighbor can influence a row of `h₀`.
    pub fn radius(&self) -> usize {
        self.x_depth().max(self.sq_depth()).max(self.attn as usize)
    }
}

/// Cosine-weighted mean of the neighbors of `v` in `x̂`.
///
/// Weights are `max(cos(x̂_v, x̂_u), 0)`. If they are all zero the plain
/// neighbor mean is used; a node without neighbors takes its own row.
pub fn attn_row(g: &Graph, xhat: &Mat, v: usize, out: &mut [f64]) {
    let nbrs = g.neighbors(v);
    out.iter_mut().for_each(|o| *o = 0.0);
    if nbrs.is_empty() {
        out.copy_from_slice(xhat.row(v));
        return;
    }
    let xv = xhat.row(v);
    let nv = xv.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut total = 0.0;
    for &u in nbrs {
        let xu = xhat.row(u);
        let nu = xu.iter().map(|a| a * a).sum::<f64>().sqrt();
        let w = if nv > 0.0 && nu > 0.0 {
            let dot: f64 = xv.iter().zip(xu).map(|(a, b)| a * b).sum();
            (dot / (nv * nu)).max(0.0)
        } else {
            0.0
        };
        if w > 0.0 {
            total += w;
            for (o, &b) in out.iter_mut().zip(xu) {
                *o += w * b;
            }
        }
    }
    if total > 0.0 {
        out.iter_mut().for_each(|o| *o /= total);
    } else {
        for &u in nbrs {
            for (o, &b) in out.iter_mut().zip(xhat.row(u)) {
                *o += b;
            }
        }
        let m = nbrs.len() as f64;
        out.iter_mut().for_each(|o| *o /= m);
    }
}

/// Hop caches from which `h₀` rows are assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseCache {
    pub flags: BaseFeatureFlags,
    /// `Ã^k X̂`.
    pub x: HopStack,
    /// `Ã^k (X̂ ⊙ X̂)`.
    pub sq: HopStack,
}

pub fn squared(m: &Mat) -> Mat {
    m.map(|v| v * v)
}

impl BaseCache {
    pub fn build(ds: &Dataset, flags: BaseFeatureFlags) -> Result<Self> {
        if flags.count() == 0 {
            return Err(Error::InvalidConfig("every h0 block is disabled".into()));
        }
        let xhat = ds.row_normalized_features();
        let sq = HopStack::build(&ds.graph, squared(&xhat), flags.sq_depth())?;
        let x = HopStack::build(&ds.graph, xhat, flags.x_depth())?;
        Ok(Self { flags, x, sq })
    }

    pub fn width(&self) -> usize {
        self.flags.count() * self.x.hop(0).cols()
    }

    /// Writes row `v` of `h₀`.
    pub fn row(&self, g: &Graph, v: usize, out: &mut [f64]) {
        let d = self.x.hop(0).cols();
        let p = |k: usize| self.x.hop(k).row(v);
        let mut blk = 0;
        let mut put = |f: &dyn Fn(usize) -> f64| {
            for (j, o) in out[blk * d..(blk + 1) * d].iter_mut().enumerate() {
                *o = f(j);
            }
            blk += 1;
        };
        let fl = self.flags;
        if fl.x {
            put(&|j| p(0)[j]);
        }
        if fl.hop1 {
            put(&|j| p(1)[j]);
        }
        if fl.hop2 {
            put(&|j| p(2)[j]);
        }
        if fl.hop3 {
            put(&|j| p(3)[j]);
        }
        if fl.var1 {
            let q = self.sq.hop(1).row(v);
            put(&|j| q[j] - p(1)[j] * p(1)[j]);
        }
        if fl.var2 {
            let q = self.sq.hop(2).row(v);
            put(&|j| q[j] - p(2)[j] * p(2)[j]);
        }
        if fl.diff01 {
            put(&|j| p(0)[j] - p(1)[j]);
        }
        if fl.diff12 {
            put(&|j| p(1)[j] - p(2)[j]);
        }
        if fl.diff23 {
            put(&|j| p(2)[j] - p(3)[j]);
        }
        if fl.attn {
            attn_row(g, self.x.hop(0), v, &mut out[blk * d..(blk + 1) * d]);
        }
    }

    pub fn matrix(&self, g: &Graph) -> Mat {
        let n = g.n();
        let mut h = Mat::zeros(n, self.width());
        for v in 0..n {
            self.row(g, v, h.row_mut(v));
        }
        h
    }
}

/// `h₀ = [X̂, ÃX̂, Ã²X̂, Ã³X̂, var₁, var₂, X̂−ÃX̂, ÃX̂−Ã²X̂, Ã²X̂−Ã³X̂, attn(X̂)]`
/// restricted to the enabled blocks, with `var_k = Ã^k(X̂⊙X̂) − (Ã^k X̂)^{⊙2}`.
pub fn base_features_h0(ds: &Dataset, flags: BaseFeatureFlags) -> Result<Mat> {
    Ok(BaseCache::build(ds, flags)?.matrix(&ds.graph))
}
