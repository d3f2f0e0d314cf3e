//! Gaussian random Fourier features.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::mat::Mat;
use crate::rng;

/// Frequencies of a random Fourier feature map, regenerated from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    /// `F x d`, rows drawn from `N(0, σ⁻² I)`.
    omega: Mat,
    scale: f64,
}

impl RffMap {
    pub fn new(input_dim: usize, num_features: usize, sigma: f64, seed: u64) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::InvalidConfig("RFF needs at least one feature".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("RFF bandwidth must be positive, got {sigma}")));
        }
        let mut r = rng::stream(seed, "rff.omega");
        let omega = Mat::from_fn(num_features, input_dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            z / sigma
        });
        Ok(Self {
            omega,
            scale: (1.0 / num_features as f64).sqrt(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.omega.cols()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.omega.rows()
    }

    /// `out = √(1/F) [cos ω₁ᵀx, sin ω₁ᵀx, …, cos ω_Fᵀx, sin ω_Fᵀx]`.
    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim());
        for i in 0..self.omega.rows() {
            let mut t = 0.0;
            for (w, v) in self.omega.row(i).iter().zip(x) {
                t += w * v;
            }
            out[2 * i] = self.scale * t.cos();
            out[2 * i + 1] = self.scale * t.sin();
        }
    }

    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        if x.cols() != self.input_dim() {
            return Err(Error::WidthMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut out = Mat::zeros(x.rows(), self.output_dim());
        for i in 0..x.rows() {
            self.apply_row(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

/// Maps every row of `x` to `2 * num_features` random Fourier features.
pub fn rff_map(x: &Mat, num_features: usize, sigma: f64, seed: u64) -> Result<Mat> {
    RffMap::new(x.cols(), num_features, sigma, seed)?.apply(x)
}
