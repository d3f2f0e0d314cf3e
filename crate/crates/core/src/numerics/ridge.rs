//! Ridge regression through the normal equations.
//!
//! The Gram matrix `HᵀH` and right-hand side `HᵀY` are kept as exact
//! accumulators, so downdating a handful of rows and re-solving yields the
//! same bits as assembling the statistics from scratch on the modified rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::cholesky::Cholesky;
use crate::numerics::exact::{ExactSum, Factor};
use crate::numerics::mat::Mat;

/// Sufficient statistics of a ridge problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeStats {
    alpha: f64,
    dim: usize,
    targets: usize,
    /// Upper triangle of `HᵀH`, row-major.
    gram: Vec<ExactSum>,
    /// `HᵀY`, `dim x targets`, row-major.
    rhs: Vec<ExactSum>,
    /// Number of training rows currently folded in.
    count: i64,
}

/// One training row: features and (already smoothed) targets.
pub type RowPair<'a> = (&'a [f64], &'a [f64]);

impl RidgeStats {
    pub fn empty(dim: usize, targets: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            dim,
            targets,
            gram: vec![ExactSum::ZERO; dim * (dim + 1) / 2],
            rhs: vec![ExactSum::ZERO; dim * targets],
            count: 0,
        })
    }

    /// Assembles statistics from training rows in ascending row order.
    pub fn assemble(h_tr: &Mat, y_tr: &Mat, alpha: f64) -> Result<Self> {
        if h_tr.rows() != y_tr.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows vs {} target rows",
                h_tr.rows(),
                y_tr.rows()
            )));
        }
        let mut stats = Self::empty(h_tr.cols(), y_tr.cols(), alpha)?;
        let mut hf = Vec::with_capacity(h_tr.cols());
        for i in 0..h_tr.rows() {
            stats.fold_row(h_tr.row(i), y_tr.row(i), false, &mut hf)?;
        }
        Ok(stats)
    }

    /// Rebuilds statistics from stored accumulators (see [`Self::gram_accumulators`]).
    pub fn from_parts(
        alpha: f64,
        dim: usize,
        targets: usize,
        gram: Vec<ExactSum>,
        rhs: Vec<ExactSum>,
        count: i64,
    ) -> Result<Self> {
        let mut s = Self::empty(dim, targets, alpha)?;
        if gram.len() != s.gram.len() || rhs.len() != s.rhs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} Gram and {} RHS accumulators for a {dim}x{targets} problem",
                gram.len(),
                rhs.len()
            )));
        }
        s.gram = gram;
        s.rhs = rhs;
        s.count = count;
        Ok(s)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn row_count(&self) -> i64 {
        self.count
    }

    pub fn add_row(&mut self, h: &[f64], y: &[f64]) -> Result<()> {
        self.fold_row(h, y, false, &mut Vec::new())
    }

    pub fn remove_row(&mut self, h: &[f64], y: &[f64]) -> Result<()> {
        self.fold_row(h, y, true, &mut Vec::new())
    }

    fn fold_row(
        &mut self,
        h: &[f64],
        y: &[f64],
        subtract: bool,
        scratch: &mut Vec<Factor>,
    ) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::WidthMismatch {
                expected: self.dim,
                got: h.len(),
            });
        }
        if y.len() != self.targets {
            return Err(Error::WidthMismatch {
                expected: self.targets,
                got: y.len(),
            });
        }
        scratch.clear();
        for &x in h {
            scratch.push(Factor::new(x)?);
        }
        let d = self.dim;
        let mut idx = 0;
        for i in 0..d {
            let fi = scratch[i];
            if h[i] == 0.0 {
                idx += d - i;
                continue;
            }
            for j in i..d {
                self.gram[idx].accumulate(fi, scratch[j], subtract)?;
                idx += 1;
            }
        }
        let yf: Vec<Factor> = y.iter().map(|&v| Factor::new(v)).collect::<Result<_>>()?;
        for i in 0..d {
            if h[i] == 0.0 {
                continue;
            }
            for (c, &f) in yf.iter().enumerate() {
                self.rhs[i * self.targets + c].accumulate(scratch[i], f, subtract)?;
            }
        }
        self.count += if subtract { -1 } else { 1 };
        Ok(())
    }

    /// `HᵀH` rounded to `f64`; symmetric by construction.
    pub fn gram(&self) -> Mat {
        let d = self.dim;
        let mut g = Mat::zeros(d, d);
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                let v = self.gram[idx].to_f64();
                g[(i, j)] = v;
                g[(j, i)] = v;
                idx += 1;
            }
        }
        g
    }

    /// `HᵀY` rounded to `f64`.
    pub fn rhs(&self) -> Mat {
        let v: Vec<f64> = self.rhs.iter().map(ExactSum::to_f64).collect();
        Mat::from_vec(self.dim, self.targets, v).expect("rhs shape")
    }

    /// Factorizes `G + alpha I` and solves for the weights.
    pub fn solve(&self) -> Result<Mat> {
        let mut m = self.gram();
        for i in 0..self.dim {
            m[(i, i)] += self.alpha;
        }
        Cholesky::factor(&m)?.solve(&self.rhs())
    }

    pub fn gram_accumulators(&self) -> &[ExactSum] {
        &self.gram
    }

    pub fn rhs_accumulators(&self) -> &[ExactSum] {
        &self.rhs
    }
}

/// `W = (H_trᵀ H_tr + alpha I)⁻¹ H_trᵀ Y_tr`, returning the statistics for later downdates.
pub fn ridge_solve(h_tr: &Mat, y_tr: &Mat, alpha: f64) -> Result<(Mat, RidgeStats)> {
    if h_tr.rows() == 0 {
        return Err(Error::InvalidConfig("ridge needs at least one training row".into()));
    }
    let stats = RidgeStats::assemble(h_tr, y_tr, alpha)?;
    let w = stats.solve()?;
    Ok((w, stats))
}

/// Replaces `old_rows` by `new_rows` in the statistics.
///
/// A row that leaves the training set appears only in `old_rows`; a row that
/// joins appears only in `new_rows`. Cost is `O(m D²)` for `m` rows.
pub fn gram_downdate(
    stats: &RidgeStats,
    old_rows: &[RowPair<'_>],
    new_rows: &[RowPair<'_>],
) -> Result<RidgeStats> {
    let mut out = stats.clone();
    let mut scratch = Vec::with_capacity(stats.dim);
    for (h, y) in old_rows {
        out.fold_row(h, y, true, &mut scratch)?;
    }
    for (h, y) in new_rows {
        out.fold_row(h, y, false, &mut scratch)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_halves() {
        let h = Mat::identity(4);
        let (w, _) = ridge_solve(&h, &h, 1.0).unwrap();
        let half = Mat::identity(4).map(|x| x * 0.5);
        assert!(w.max_abs_diff(&half).unwrap() <= 1e-15);
    }

    #[test]
    fn large_alpha_shrinks_weights() {
        let h = Mat::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = Mat::from_fn(10, 2, |i, j| ((i + j) % 2) as f64);
        let (w, stats) = ridge_solve(&h, &y, 1e9).unwrap();
        let bound = stats.rhs().max_abs() / 1e9;
        assert!(w.max_abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn rejects_bad_alpha_and_width() {
        let h = Mat::identity(2);
        assert!(ridge_solve(&h, &h, 0.0).is_err());
        let (_, stats) = ridge_solve(&h, &h, 1.0).unwrap();
        let bad = [1.0, 2.0, 3.0];
        assert!(matches!(
            gram_downdate(&stats, &[(&bad, &[1.0, 0.0])], &[]),
            Err(Error::WidthMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn identity_update_is_bitwise_noop() {
        let h = Mat::from_fn(6, 3, |i, j| (i as f64 * 0.37 + j as f64 * 1.1).sin());
        let y = Mat::from_fn(6, 2, |i, j| ((i + j) % 2) as f64);
        let stats = RidgeStats::assemble(&h, &y, 0.5).unwrap();
        let rows: Vec<RowPair> = (0..6).map(|i| (h.row(i), y.row(i))).collect();
        let same = gram_downdate(&stats, &rows, &rows).unwrap();
        assert_eq!(same, stats);
    }
}
