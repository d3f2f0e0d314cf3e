//! Dense Cholesky factorization `M = L Lᵀ` and triangular solves.
//!
//! No pivoting and no jitter: a non-positive pivot is reported, never patched,
//! because a retried factorization would no longer match a fresh solve.

use crate::error::{Error, Result};
use crate::numerics::mat::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    /// Lower-triangular factor; the strict upper triangle is zero.
    l: Mat,
}

impl Cholesky {
    pub fn factor(m: &Mat) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d.is_nan() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                let (ri, rj) = (i * n, j * n);
                let data = l.as_slice();
                for k in 0..j {
                    s -= data[ri + k] * data[rj + k];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_matrix(&self) -> &Mat {
        &self.l
    }

    /// Solves `M X = B` for every column of `B`.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, system has {n}",
                b.rows()
            )));
        }
        let c = b.cols();
        let mut y = b.clone();
        // forward: L y = b
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                for j in 0..c {
                    let v = y[(k, j)];
                    y[(i, j)] -= lik * v;
                }
            }
            let lii = self.l[(i, i)];
            for j in 0..c {
                y[(i, j)] /= lii;
            }
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.l[(k, i)];
                if lki == 0.0 {
                    continue;
                }
                for j in 0..c {
                    let v = y[(k, j)];
                    y[(i, j)] -= lki * v;
                }
            }
            let lii = self.l[(i, i)];
            for j in 0..c {
                y[(i, j)] /= lii;
            }
        }
        Ok(y)
    }
}
