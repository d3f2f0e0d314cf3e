//! Gaussian kernel blocks and exact kernel ridge regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::cholesky::Cholesky;
use crate::numerics::mat::Mat;

/// Default number of query rows per kernel block.
pub const DEFAULT_CHUNK: usize = 2048;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Streams `K(A, B)` in blocks of at most `chunk` rows of `A`.
///
/// `sink` receives the first row index of the block and the block itself.
/// Entries do not depend on `chunk`.
pub fn gaussian_kernel_blocks(
    a: &Mat,
    b: &Mat,
    sigma: f64,
    chunk: usize,
    mut sink: impl FnMut(usize, &Mat) -> Result<()>,
) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::WidthMismatch {
            expected: b.cols(),
            got: a.cols(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    let chunk = chunk.max(1);
    let denom = 2.0 * sigma * sigma;
    let mut start = 0;
    while start < a.rows() {
        let end = (start + chunk).min(a.rows());
        let mut block = Mat::zeros(end - start, b.rows());
        for i in start..end {
            let ai = a.row(i);
            let out = block.row_mut(i - start);
            for (j, o) in out.iter_mut().enumerate() {
                *o = (-sq_dist(ai, b.row(j)) / denom).exp();
            }
        }
        sink(start, &block)?;
        start = end;
    }
    Ok(())
}

/// Materializes `K(A, B)`.
pub fn gaussian_kernel(a: &Mat, b: &Mat, sigma: f64, chunk: usize) -> Result<Mat> {
    let mut k = Mat::zeros(a.rows(), b.rows());
    gaussian_kernel_blocks(a, b, sigma, chunk, |start, block| {
        for r in 0..block.rows() {
            k.row_mut(start + r).copy_from_slice(block.row(r));
        }
        Ok(())
    })?;
    Ok(k)
}

/// Median pairwise Euclidean distance over an evenly strided subsample of at
/// most `max_rows` rows.
pub fn median_pairwise_distance(rows: &Mat, max_rows: usize) -> f64 {
    let n = rows.rows();
    let m = n.min(max_rows.max(2));
    let idx: Vec<usize> = (0..m).map(|i| i * n / m).collect();
    let mut d = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            d.push(sq_dist(rows.row(i), rows.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Fitted Gaussian kernel ridge head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelHead {
    pub sigma: f64,
    pub lambda_prime: f64,
    /// `(K_tr + λ′I)⁻¹ Y_tr`, `N_tr x C`.
    pub dual: Mat,
    /// Training representation rows, `N_tr x D`.
    pub train_repr: Mat,
    #[serde(skip)]
    factor: Option<Cholesky>,
}

impl PartialEq for KernelHead {
    fn eq(&self, other: &Self) -> bool {
        self.sigma.to_bits() == other.sigma.to_bits()
            && self.lambda_prime.to_bits() == other.lambda_prime.to_bits()
            && self.dual.bit_eq(&other.dual)
            && self.train_repr.bit_eq(&other.train_repr)
    }
}

fn regularized_kernel(h_tr: &Mat, sigma: f64, lambda_prime: f64) -> Result<Mat> {
    let mut k = gaussian_kernel(h_tr, h_tr, sigma, DEFAULT_CHUNK)?;
    for i in 0..k.rows() {
        k[(i, i)] += lambda_prime;
    }
    Ok(k)
}

/// Fits `dual = (K_tr + λ′I)⁻¹ Y_tr` by Cholesky.
pub fn krr_fit(h_tr: &Mat, y_tr: &Mat, sigma: f64, lambda_prime: f64) -> Result<KernelHead> {
    if !(lambda_prime > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "KRR regularizer must be positive, got {lambda_prime}"
        )));
    }
    if h_tr.rows() != y_tr.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} representation rows vs {} targets",
            h_tr.rows(),
            y_tr.rows()
        )));
    }
    let factor = Cholesky::factor(&regularized_kernel(h_tr, sigma, lambda_prime)?)?;
    let dual = factor.solve(y_tr)?;
    Ok(KernelHead {
        sigma,
        lambda_prime,
        dual,
        train_repr: h_tr.clone(),
        factor: Some(factor),
    })
}

/// `K(query, train) · dual`, computed block by block.
pub fn krr_predict(head: &KernelHead, h_query: &Mat, chunk: usize) -> Result<Mat> {
    if h_query.cols() != head.train_repr.cols() {
        return Err(Error::WidthMismatch {
            expected: head.train_repr.cols(),
            got: h_query.cols(),
        });
    }
    let mut out = Mat::zeros(h_query.rows(), head.dual.cols());
    gaussian_kernel_blocks(h_query, &head.train_repr, head.sigma, chunk, |start, block| {
        let part = block.matmul(&head.dual)?;
        for r in 0..part.rows() {
            out.row_mut(start + r).copy_from_slice(part.row(r));
        }
        Ok(())
    })?;
    Ok(out)
}

impl KernelHead {
    /// Reassembles a head from stored arrays; the factorization is recomputed lazily.
    pub fn from_parts(sigma: f64, lambda_prime: f64, dual: Mat, train_repr: Mat) -> Result<Self> {
        if dual.rows() != train_repr.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} dual rows for {} training rows",
                dual.rows(),
                train_repr.rows()
            )));
        }
        Ok(Self {
            sigma,
            lambda_prime,
            dual,
            train_repr,
            factor: None,
        })
    }

    fn factor(&self) -> Result<Cholesky> {
        match &self.factor {
            Some(f) => Ok(f.clone()),
            None => Cholesky::factor(&regularized_kernel(
                &self.train_repr,
                self.sigma,
                self.lambda_prime,
            )?),
        }
    }

    /// Experimental: drops training rows `remove` (sorted, in head-row
    /// coordinates) without refactorizing, via the block-inverse identity
    /// `dual'_R = dual_R − P_RF (P_FF)⁻¹ dual_F` with `P = (K + λ′I)⁻¹`.
    ///
    /// Valid only when the remaining kernel entries and the bandwidth are
    /// unchanged. The result agrees with a fresh fit up to rounding, not bitwise.
    pub fn remove_rows_block_inverse(&self, remove: &[usize]) -> Result<KernelHead> {
        let n = self.train_repr.rows();
        if remove.iter().any(|&i| i >= n) {
            return Err(Error::DimensionMismatch("row index past training set".into()));
        }
        let factor = self.factor()?;
        let m = remove.len();
        let mut e = Mat::zeros(n, m);
        for (c, &i) in remove.iter().enumerate() {
            e[(i, c)] = 1.0;
        }
        let p_cols = factor.solve(&e)?; // n x m
        let p_ff = p_cols.select_rows(remove);
        let dual_f = self.dual.select_rows(remove);
        let z = Cholesky::factor(&p_ff)?.solve(&dual_f)?; // m x C
        let correction = p_cols.matmul(&z)?;
        let keep: Vec<usize> = (0..n).filter(|i| remove.binary_search(i).is_err()).collect();
        let mut dual = Mat::zeros(keep.len(), self.dual.cols());
        for (r, &i) in keep.iter().enumerate() {
            for c in 0..dual.cols() {
                dual[(r, c)] = self.dual[(i, c)] - correction[(i, c)];
            }
        }
        Ok(KernelHead {
            sigma: self.sigma,
            lambda_prime: self.lambda_prime,
            dual,
            train_repr: self.train_repr.select_rows(&keep),
            factor: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_exponent() {
        let sigma = 0.7;
        let a = Mat::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let b = Mat::from_rows(&[vec![sigma * 2f64.sqrt(), 0.0], vec![0.0, 0.0]]).unwrap();
        let k = gaussian_kernel(&a, &b, sigma, 1).unwrap();
        assert!((k[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(k[(0, 1)], 1.0);
    }

    #[test]
    fn single_training_point() {
        let h = Mat::from_rows(&[vec![0.3, -1.0]]).unwrap();
        let y = Mat::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let head = krr_fit(&h, &y, 1.0, 0.25).unwrap();
        assert!((head.dual[(0, 0)] - 1.0 / 1.25).abs() < 1e-15);
        assert_eq!(head.dual[(0, 1)], 0.0);
    }

    #[test]
    fn far_query_decays_to_zero() {
        let h = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = Mat::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let head = krr_fit(&h, &y, 1.0, 1e-3).unwrap();
        let q = Mat::from_rows(&[vec![1e6]]).unwrap();
        let p = krr_predict(&head, &q, 8).unwrap();
        assert_eq!(p[(0, 0)], 0.0);
    }

    #[test]
    fn width_mismatch() {
        let h = Mat::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let head = krr_fit(&h, &Mat::identity(1), 1.0, 1.0).unwrap();
        assert!(matches!(
            krr_predict(&head, &Mat::zeros(1, 3), 4),
            Err(Error::WidthMismatch { expected: 2, got: 3 })
        ));
    }
}
