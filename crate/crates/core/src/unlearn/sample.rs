use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forget::{ForgetKind, ForgetRequest};
use crate::rng::stream;

fn pick(pool: &[usize], size: usize, rng: &mut impl Rng, what: &str) -> Result<Vec<usize>> {
    if size == 0 || size > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot draw {size} {what} from {} candidates",
            pool.len()
        )));
    }
    let mut out: Vec<usize> = index::sample(rng, pool.len(), size).into_iter().map(|i| pool[i]).collect();
    out.sort_unstable();
    Ok(out)
}

/// Draws a random forget request of the given kind and size.
///
/// Labels come from training nodes, features and nodes from live nodes, and
/// edges from the current edge list. A subgraph is grown breadth-first from
/// random live seeds until it holds `size` nodes. Each kind uses its own
/// named stream, so the draws are reproducible from `seed`.
pub fn sample_request(ds: &Dataset, kind: ForgetKind, size: usize, seed: u64) -> Result<ForgetRequest> {
    let mut rng = stream(seed, &format!("forget.{}", kind.name()));
    let live: Vec<usize> = (0..ds.n()).filter(|&v| !ds.graph.is_deleted(v)).collect();
    Ok(match kind {
        ForgetKind::Label => ForgetRequest::Label(pick(ds.train_nodes().as_slice(), size, &mut rng, "training nodes")?),
        ForgetKind::Feature => ForgetRequest::Feature(pick(&live, size, &mut rng, "nodes")?),
        ForgetKind::Node => ForgetRequest::Node(pick(&live, size, &mut rng, "nodes")?),
        ForgetKind::Edge => {
            let edges = ds.graph.edges();
            let ids: Vec<usize> = (0..edges.len()).collect();
            ForgetRequest::Edge(pick(&ids, size, &mut rng, "edges")?.into_iter().map(|i| edges[i]).collect())
        }
        ForgetKind::Subgraph => {
            if size == 0 || size > live.len() {
                return Err(Error::InvalidConfig(format!("cannot grow a subgraph of {size} from {} nodes", live.len())));
            }
            let mut taken = vec![false; ds.n()];
            let mut out = Vec::with_capacity(size);
            let mut queue = VecDeque::new();
            while out.len() < size {
                if queue.is_empty() {
                    let free: Vec<usize> = live.iter().copied().filter(|&v| !taken[v]).collect();
                    let s = free[rng.random_range(0..free.len())];
                    taken[s] = true;
                    queue.push_back(s);
                }
                while let Some(v) = queue.pop_front() {
                    if out.len() == size {
                        break;
                    }
                    out.push(v);
                    for &u in ds.graph.neighbors(v) {
                        if !taken[u] {
                            taken[u] = true;
                            queue.push_back(u);
                        }
                    }
                }
            }
            out.sort_unstable();
            ForgetRequest::Subgraph(out)
        }
    })
}
