//! Dense linear algebra with reproducible reductions.

pub mod cholesky;
pub mod exact;
pub mod kernel;
pub mod mat;
pub mod rff;
pub mod ridge;
pub mod whiten;

pub use cholesky::Cholesky;
pub use exact::ExactSum;
pub use kernel::{gaussian_kernel, krr_fit, krr_predict, median_pairwise_distance, KernelHead};
pub use mat::Mat;
pub use rff::{rff_map, RffMap};
pub use ridge::{gram_downdate, ridge_solve, RidgeStats};
pub use whiten::column_whiten;

use serde::{Deserialize, Serialize};

/// Storage precision of features and weights. Arithmetic is always `f64`;
/// `Fp32` rounds features and solved weights through `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Fp64,
    Fp32,
}

impl Precision {
    /// Maximum weight difference accepted as "identical to retrain".
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::Fp64 => 1e-12,
            Precision::Fp32 => 1e-3,
        }
    }

    pub fn round_row(self, row: &mut [f64]) {
        if self == Precision::Fp32 {
            row.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    pub fn round(self, m: Mat) -> Mat {
        match self {
            Precision::Fp64 => m,
            Precision::Fp32 => m.round_to_f32(),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "fp64" => Ok(Precision::Fp64),
            "fp32" => Ok(Precision::Fp32),
            _ => Err(crate::error::Error::Parse(format!("unknown precision {s:?}"))),
        }
    }
}
