use crate::error::{Error, Result};
use crate::graph::NodeSet;
use crate::numerics::mat::Mat;

/// Smallest standard deviation used as a divisor.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-column mean and standard deviation over `stat_rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn compute(m: &Mat, stat_rows: &NodeSet) -> Result<Self> {
        if stat_rows.is_empty() {
            return Err(Error::InvalidConfig("whitening needs at least one statistics row".into()));
        }
        if let Some(&last) = stat_rows.as_slice().last() {
            if last >= m.rows() {
                return Err(Error::NodeOutOfRange { id: last, n: m.rows() });
            }
        }
        let d = m.cols();
        let count = stat_rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in stat_rows.iter() {
            for (s, &x) in mean.iter_mut().zip(m.row(i)) {
                *s += x;
            }
        }
        mean.iter_mut().for_each(|s| *s /= count);
        let mut var = vec![0.0; d];
        for &i in stat_rows.iter() {
            for ((s, &x), &mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                let c = x - mu;
                *s += c * c;
            }
        }
        let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, m: &Mat) -> Mat {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x = (*x - self.mean[j]) / self.std[j].max(STD_FLOOR);
            }
        }
        out
    }
}

/// Standardizes every column using statistics from `stat_rows` only; all rows are transformed.
pub fn column_whiten(m: &Mat, stat_rows: &NodeSet) -> Result<Mat> {
    Ok(ColumnStats::compute(m, stat_rows)?.apply(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let m = Mat::from_fn(5, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        let w = column_whiten(&m, &NodeSet::all(5)).unwrap();
        for i in 0..5 {
            assert_eq!(w[(i, 0)], 0.0);
        }
    }

    #[test]
    fn all_rows_gives_zero_mean_unit_variance() {
        let m = Mat::from_fn(40, 3, |i, j| ((i * 13 + j * 7) % 11) as f64 * (j as f64 + 0.5));
        let w = column_whiten(&m, &NodeSet::all(40)).unwrap();
        for j in 0..3 {
            let mean: f64 = (0..40).map(|i| w[(i, j)]).sum::<f64>() / 40.0;
            let var: f64 = (0..40).map(|i| (w[(i, j)] - mean).powi(2)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_stat_rows_rejected() {
        assert!(column_whiten(&Mat::zeros(2, 2), &NodeSet::empty()).is_err());
    }
}
