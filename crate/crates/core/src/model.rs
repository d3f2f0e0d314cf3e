//! A fitted model of either pipeline, and its binary container.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! magic   "CFGM"
//! version u32 (= 1)
//! kind    u8  (0 = Pipeline A, 1 = LCF-Net)
//! config  u64 length + JSON bytes
//! body    kind-specific sequence of matrices and ridge statistics
//! ```
//!
//! A matrix is `rows: u64, cols: u64, rows*cols f64`. Ridge statistics are
//! `alpha: f64, dim: u64, targets: u64, count: i64`, then the Gram upper
//! triangle and the right-hand side as 256-bit accumulators (four `u64`
//! limbs each). Every value round-trips bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Pipeline};
use crate::error::{Error, Result};
use crate::lcfnet::{fit_lcfnet, LcfConfig, LcfNetModel};
use crate::numerics::exact::ExactSum;
use crate::numerics::mat::softmax_rows;
use crate::numerics::whiten::ColumnStats;
use crate::numerics::{KernelHead, Mat, Precision, RidgeStats};
use crate::pipeline_a::{fit_a, PipelineAConfig, PipelineAModel};

const MAGIC: &[u8; 4] = b"CFGM";
const VERSION: u32 = 1;

/// Configuration of either pipeline. Serialized with a `pipeline` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline")]
pub enum ModelConfig {
    A(PipelineAConfig),
    B(LcfConfig),
}

impl ModelConfig {
    pub fn pipeline(&self) -> Pipeline {
        match self {
            ModelConfig::A(_) => Pipeline::A,
            ModelConfig::B(_) => Pipeline::B,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            ModelConfig::A(c) => c.precision,
            ModelConfig::B(c) => c.precision,
        }
    }

    pub fn set_precision(&mut self, p: Precision) {
        match self {
            ModelConfig::A(c) => c.precision = p,
            ModelConfig::B(c) => c.precision = p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::A(c) => c.validate(),
            ModelConfig::B(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    A(PipelineAModel),
    B(LcfNetModel),
}

impl Model {
    pub fn fit(ds: &Dataset, cfg: &ModelConfig) -> Result<Model> {
        match cfg {
            ModelConfig::A(c) => Ok(Model::A(fit_a(ds, c)?)),
            ModelConfig::B(c) => Ok(Model::B(fit_lcfnet(ds, c)?)),
        }
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::A(m) => ModelConfig::A(m.config().clone()),
            Model::B(m) => ModelConfig::B(m.config().clone()),
        }
    }

    pub fn pipeline(&self) -> Pipeline {
        match self {
            Model::A(_) => Pipeline::A,
            Model::B(_) => Pipeline::B,
        }
    }

    pub fn precision(&self) -> Precision {
        self.config().precision()
    }

    /// Raw scores for every node.
    pub fn predict(&self, ds: &Dataset) -> Result<Mat> {
        match self {
            Model::A(m) => m.predict(ds),
            Model::B(m) => m.predict(ds),
        }
    }

    /// Like [`Model::predict`], evaluating the kernel head `chunk` query rows at a time.
    pub fn predict_chunked(&self, ds: &Dataset, chunk: usize) -> Result<Mat> {
        match self {
            Model::A(m) => m.predict(ds),
            Model::B(m) => m.predict_chunked(ds, chunk),
        }
    }

    pub fn predict_proba(&self, ds: &Dataset) -> Result<Mat> {
        Ok(softmax_rows(&self.predict(ds)?))
    }

    /// Every learned array, in a fixed order: `W` for Pipeline A;
    /// `W₁..W_K` then the kernel dual coefficients for LCF-Net.
    pub fn parameter_blocks(&self) -> Vec<&Mat> {
        match self {
            Model::A(m) => vec![m.weights()],
            Model::B(m) => {
                let mut v: Vec<&Mat> = m.weights().iter().collect();
                v.push(&m.head().dual);
                v
            }
        }
    }

    /// Whether a K-hop local update exists for this model.
    pub fn locality_eligible(&self) -> bool {
        match self {
            Model::A(_) => true,
            Model::B(m) => m.locality_eligible(),
        }
    }

    /// Rebuilds internal caches from the data the model reflects.
    pub fn attach(&mut self, ds: &Dataset) -> Result<()> {
        match self {
            Model::A(m) => m.attach(ds),
            Model::B(m) => m.attach(ds),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Model::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Model> {
        Model::read_from(&mut bytes)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u8(match self {
            Model::A(_) => 0,
            Model::B(_) => 1,
        })?;
        let cfg = serde_json::to_vec(&self.config())?;
        w.write_u64::<LittleEndian>(cfg.len() as u64)?;
        w.write_all(&cfg)?;
        match self {
            Model::A(m) => {
                w.write_u64::<LittleEndian>(m.input_dim() as u64)?;
                write_mat(w, m.weights())?;
                write_stats(w, m.stats())?;
            }
            Model::B(m) => {
                w.write_u64::<LittleEndian>(m.input_dim() as u64)?;
                w.write_u64::<LittleEndian>(m.num_targets() as u64)?;
                match m.whitening() {
                    Some(s) => {
                        w.write_u8(1)?;
                        write_vec(w, &s.mean)?;
                        write_vec(w, &s.std)?;
                    }
                    None => w.write_u8(0)?,
                }
                w.write_u64::<LittleEndian>(m.weights().len() as u64)?;
                for (wk, sk) in m.weights().iter().zip(m.layer_stats()) {
                    write_mat(w, wk)?;
                    write_stats(w, sk)?;
                }
                let h = m.head();
                w.write_f64::<LittleEndian>(h.sigma)?;
                w.write_f64::<LittleEndian>(h.lambda_prime)?;
                write_mat(w, &h.dual)?;
                write_mat(w, &h.train_repr)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Model> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let kind = r.read_u8()?;
        let len = r.read_u64::<LittleEndian>()? as usize;
        let mut cfg = vec![0u8; len];
        r.read_exact(&mut cfg)?;
        let cfg: ModelConfig = serde_json::from_slice(&cfg)?;
        match (kind, cfg) {
            (0, ModelConfig::A(c)) => {
                let input_dim = r.read_u64::<LittleEndian>()? as usize;
                let w = read_mat(r)?;
                let stats = read_stats(r)?;
                Ok(Model::A(PipelineAModel::from_parts(c, input_dim, w, stats)?))
            }
            (1, ModelConfig::B(c)) => {
                let input_dim = r.read_u64::<LittleEndian>()? as usize;
                let num_targets = r.read_u64::<LittleEndian>()? as usize;
                let whitening = match r.read_u8()? {
                    0 => None,
                    1 => Some(ColumnStats {
                        mean: read_vec(r)?,
                        std: read_vec(r)?,
                    }),
                    t => return Err(Error::Format(format!("bad whitening tag {t}"))),
                };
                let layers = r.read_u64::<LittleEndian>()? as usize;
                let mut weights = Vec::with_capacity(layers);
                let mut stats = Vec::with_capacity(layers);
                for _ in 0..layers {
                    weights.push(read_mat(r)?);
                    stats.push(read_stats(r)?);
                }
                let sigma = r.read_f64::<LittleEndian>()?;
                let lambda_prime = r.read_f64::<LittleEndian>()?;
                let dual = read_mat(r)?;
                let train_repr = read_mat(r)?;
                let head = KernelHead::from_parts(sigma, lambda_prime, dual, train_repr)?;
                Ok(Model::B(LcfNetModel::from_parts(
                    c,
                    input_dim,
                    num_targets,
                    whitening,
                    weights,
                    stats,
                    head,
                )?))
            }
            (k, _) => Err(Error::KindMismatch(format!("kind tag {k} does not match its configuration"))),
        }
    }
}

fn write_vec(w: &mut impl Write, v: &[f64]) -> Result<()> {
    w.write_u64::<LittleEndian>(v.len() as u64)?;
    for &x in v {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_vec(r: &mut impl Read) -> Result<Vec<f64>> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut v = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut v)?;
    Ok(v)
}

fn write_mat(w: &mut impl Write, m: &Mat) -> Result<()> {
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for &x in m.as_slice() {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_mat(r: &mut impl Read) -> Result<Mat> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("matrix header {rows}x{cols} overflows")))?;
    let mut data = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Mat::from_vec(rows, cols, data)
}

fn write_sums(w: &mut impl Write, sums: &[ExactSum]) -> Result<()> {
    for s in sums {
        for limb in s.limbs() {
            w.write_u64::<LittleEndian>(limb)?;
        }
    }
    Ok(())
}

fn read_sums(r: &mut impl Read, n: usize) -> Result<Vec<ExactSum>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut limbs = [0u64; 4];
        r.read_u64_into::<LittleEndian>(&mut limbs)?;
        out.push(ExactSum::from_limbs(limbs));
    }
    Ok(out)
}

fn write_stats(w: &mut impl Write, s: &RidgeStats) -> Result<()> {
    w.write_f64::<LittleEndian>(s.alpha())?;
    w.write_u64::<LittleEndian>(s.dim() as u64)?;
    w.write_u64::<LittleEndian>(s.targets() as u64)?;
    w.write_i64::<LittleEndian>(s.row_count())?;
    write_sums(w, s.gram_accumulators())?;
    write_sums(w, s.rhs_accumulators())
}

fn read_stats(r: &mut impl Read) -> Result<RidgeStats> {
    let alpha = r.read_f64::<LittleEndian>()?;
    let dim = r.read_u64::<LittleEndian>()? as usize;
    let targets = r.read_u64::<LittleEndian>()? as usize;
    let count = r.read_i64::<LittleEndian>()?;
    let gram = read_sums(r, dim * (dim + 1) / 2)?;
    let rhs = read_sums(r, dim * targets)?;
    RidgeStats::from_parts(alpha, dim, targets, gram, rhs, count)
}
