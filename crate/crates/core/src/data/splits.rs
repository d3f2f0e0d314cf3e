use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const STRATIFIED_60_20_20: &str = "stratified-60-20-20";

/// Contents of `splits.json`: explicit id lists, or a seeded protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Explicit {
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    },
    Protocol {
        seed: u64,
        protocol: String,
    },
}

/// Per-class 60/20/20 split of labeled nodes.
///
/// Nodes are grouped by `strata` (a class id, or one shared key for
/// multi-label data); unlabeled nodes (`None`) join no split. Within each
/// group the order is shuffled by the `split` stream, then the first
/// `⌊0.6 m⌋` go to train, the next `⌊0.2 m⌋` to validation and the rest to test.
pub fn stratified_split(strata: &[Option<usize>], seed: u64) -> (Vec<bool>, Vec<bool>, Vec<bool>) {
    let n = strata.len();
    let groups = strata.iter().flatten().max().map_or(0, |&c| c + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for (v, s) in strata.iter().enumerate() {
        if let Some(c) = s {
            members[*c].push(v);
        }
    }
    let mut r = rng::stream(seed, "split");
    let (mut train, mut val, mut test) = (vec![false; n], vec![false; n], vec![false; n]);
    for group in &mut members {
        group.shuffle(&mut r);
        let m = group.len();
        let n_tr = m * 3 / 5;
        let n_va = m / 5;
        for (i, &v) in group.iter().enumerate() {
            if i < n_tr {
                train[v] = true;
            } else if i < n_tr + n_va {
                val[v] = true;
            } else {
                test[v] = true;
            }
        }
    }
    (train, val, test)
}

impl SplitSpec {
    /// Resolves to boolean masks over `n` nodes.
    pub fn masks(&self, strata: &[Option<usize>]) -> Result<(Vec<bool>, Vec<bool>, Vec<bool>)> {
        let n = strata.len();
        match self {
            SplitSpec::Explicit { train, val, test } => {
                let mut out = [vec![false; n], vec![false; n], vec![false; n]];
                for (mask, ids) in out.iter_mut().zip([train, val, test]) {
                    for &v in ids {
                        if v >= n {
                            return Err(Error::NodeOutOfRange { id: v, n });
                        }
                        mask[v] = true;
                    }
                }
                let [a, b, c] = out;
                Ok((a, b, c))
            }
            SplitSpec::Protocol { seed, protocol } if protocol == STRATIFIED_60_20_20 => {
                Ok(stratified_split(strata, *seed))
            }
            SplitSpec::Protocol { protocol, .. } => {
                Err(Error::Parse(format!("unknown split protocol {protocol:?}")))
            }
        }
    }
}
