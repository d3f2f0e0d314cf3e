use rand::seq::SliceRandom;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{stratified_split, Dataset, Labels, Metric};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Mat;
use crate::rng;

/// Stochastic block model with Gaussian class-conditional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Euclidean distance between any two class means.
    pub class_mean_separation: f64,
    pub seed: u64,
}

impl SbmSpec {
    fn check(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.p_in) || !prob(self.p_out) {
            return Err(Error::InvalidConfig(format!(
                "edge probabilities must lie in [0, 1], got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.num_classes == 0 || self.n < self.num_classes {
            return Err(Error::InvalidConfig("need 1 <= num_classes <= n".into()));
        }
        if self.feature_dim < self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} cannot hold {} orthogonal class means",
                self.feature_dim, self.num_classes
            )));
        }
        if !self.class_mean_separation.is_finite() {
            return Err(Error::InvalidConfig("class_mean_separation must be finite".into()));
        }
        Ok(())
    }
}

/// Appends each pair of a block (or block pair) independently with probability `p`,
/// jumping between successes with geometric gaps.
fn sample_block<R: rand::Rng>(
    r: &mut R,
    p: f64,
    a: &[usize],
    b: Option<&[usize]>,
    out: &mut Vec<(usize, usize)>,
) {
    if p <= 0.0 {
        return;
    }
    let gap = Geometric::new(p).expect("p in (0, 1]");
    let total: u64 = match b {
        None => (a.len() as u64 * a.len().saturating_sub(1) as u64) / 2,
        Some(b) => a.len() as u64 * b.len() as u64,
    };
    let mut pos: u64 = 0;
    // Row-wise cursor for the upper triangle of a single block.
    let (mut row, mut row_start) = (0usize, 0u64);
    loop {
        pos = match pos.checked_add(gap.sample(r)) {
            Some(p) => p,
            None => break,
        };
        if pos >= total {
            break;
        }
        match b {
            Some(b) => {
                let (i, j) = ((pos / b.len() as u64) as usize, (pos % b.len() as u64) as usize);
                out.push((a[i], b[j]));
            }
            None => {
                let m = a.len() as u64;
                while pos >= row_start + (m - 1 - row as u64) {
                    row_start += m - 1 - row as u64;
                    row += 1;
                }
                let j = row + 1 + (pos - row_start) as usize;
                out.push((a[row], a[j]));
            }
        }
        pos += 1;
    }
}

/// Generates a balanced SBM dataset. Everything derives from `spec.seed`
/// through the `sbm.labels`, `sbm.edges`, `sbm.features` and `split` streams.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Dataset> {
    spec.check()?;
    let (n, c) = (spec.n, spec.num_classes);

    let mut classes: Vec<usize> = (0..n).map(|v| v % c).collect();
    classes.shuffle(&mut rng::stream(spec.seed, "sbm.labels"));
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &k) in classes.iter().enumerate() {
        blocks[k].push(v);
    }

    let mut er = rng::stream(spec.seed, "sbm.edges");
    let mut edges = Vec::new();
    for a in 0..c {
        sample_block(&mut er, spec.p_in, &blocks[a], None, &mut edges);
        for b in (a + 1)..c {
            sample_block(&mut er, spec.p_out, &blocks[a], Some(&blocks[b]), &mut edges);
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let mut fr = rng::stream(spec.seed, "sbm.features");
    let shift = spec.class_mean_separation / std::f64::consts::SQRT_2;
    let features = Mat::from_fn(n, spec.feature_dim, |v, j| {
        let z: f64 = StandardNormal.sample(&mut fr);
        if j == classes[v] {
            z + shift
        } else {
            z
        }
    });

    let labels: Vec<Option<usize>> = classes.into_iter().map(Some).collect();
    let (train, val, test) = stratified_split(&labels, spec.seed);
    Ok(Dataset {
        name: format!("sbm-n{}-c{}-seed{}", n, c, spec.seed),
        graph,
        features,
        labels: Labels::Single {
            classes: labels,
            num_classes: c,
        },
        train,
        val,
        test,
        metric: Metric::Accuracy,
        pipeline_override: None,
    })
}
