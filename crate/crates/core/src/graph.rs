//! Undirected graphs in compressed-row form and the normalized propagation operator.
//!
//! `Ã = D̄^{-1/2}(A+I)D̄^{-1/2}` is never materialized as a separate matrix. Each
//! row is summed over `N(v) ∪ {v}` in ascending node order, and every path
//! that needs a row of `Ã·M` (full propagation, local refresh during
//! unlearning) goes through [`Graph::propagate_row`], so the same inputs always
//! produce the same bits.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forget::ForgetRequest;
use crate::numerics::Mat;

/// Sorted, duplicate-free node ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn empty() -> Self {
        NodeSet(Vec::new())
    }

    pub fn all(n: usize) -> Self {
        NodeSet((0..n).collect())
    }

    pub fn from_unsorted(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        NodeSet(ids)
    }

    /// Nodes whose mask entry is set.
    pub fn from_mask(mask: &[bool]) -> Self {
        NodeSet(mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&id) if id >= n => Err(Error::NodeOutOfRange { id, n }),
            _ => Ok(()),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            out.push(a.min(b));
            i += (a <= b) as usize;
            j += (b <= a) as usize;
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        NodeSet(out)
    }

    /// Members for which `mask` is set.
    pub fn filter_mask(&self, mask: &[bool]) -> NodeSet {
        NodeSet(self.0.iter().copied().filter(|&v| mask[v]).collect())
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl<'a> IntoIterator for &'a NodeSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Immutable undirected, unweighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Each undirected edge once as `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    /// `Ã[v][cols[i]]` for the CSR entry `i` of row `v`.
    weights: Vec<f64>,
    /// `Ã[v][v] = 1 / (deg(v) + 1)`.
    self_weight: Vec<f64>,
    deleted: Vec<bool>,
}

impl Graph {
    /// Builds a graph from undirected edges. Pairs are symmetrized and
    /// deduplicated; self-loops are discarded because `Ã` adds them itself.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build(n, edges, vec![false; n])
    }

    fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, deleted: Vec<bool>) -> Result<Self> {
        let mut list = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u != v {
                list.push((u.min(v), u.max(v)));
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut deg = vec![0usize; n];
        for &(u, v) in &list {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut cursor = offsets[..n].to_vec();
        let mut cols = vec![0usize; offsets[n]];
        // Visiting sorted (u, v) pairs fills each row in ascending column order:
        // row w first receives its smaller neighbors (as the `v` side), then its larger ones.
        let mut by_second: Vec<(usize, usize)> = list.iter().map(|&(u, v)| (v, u)).collect();
        by_second.sort_unstable();
        for &(v, u) in &by_second {
            cols[cursor[v]] = u;
            cursor[v] += 1;
        }
        for &(u, v) in &list {
            cols[cursor[u]] = v;
            cursor[u] += 1;
        }

        let dbar = |v: usize| (deg[v] + 1) as f64;
        let mut weights = vec![0.0; cols.len()];
        for v in 0..n {
            for i in offsets[v]..offsets[v + 1] {
                weights[i] = 1.0 / (dbar(v) * dbar(cols[i])).sqrt();
            }
        }
        let self_weight = (0..n).map(|v| 1.0 / dbar(v)).collect();

        Ok(Self {
            n,
            edges: list,
            offsets,
            cols,
            weights,
            self_weight,
            deleted,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.cols[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Degree in `A`, not counting the self-loop.
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Degrees of `A + I`.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v) + 1).collect()
    }

    pub fn csr(&self) -> (&[usize], &[usize]) {
        (&self.offsets, &self.cols)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Whether `v` was removed by a node or subgraph deletion.
    pub fn is_deleted(&self, v: usize) -> bool {
        self.deleted[v]
    }

    pub fn deleted_mask(&self) -> &[bool] {
        &self.deleted
    }

    /// `out = (Ã·src)[v]`, summed over `N(v) ∪ {v}` in ascending id order.
    pub fn propagate_row(&self, v: usize, src: &Mat, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let nbrs = self.neighbors(v);
        let ws = &self.weights[self.offsets[v]..self.offsets[v + 1]];
        let split = nbrs.partition_point(|&u| u < v);
        let mut axpy = |w: f64, u: usize| {
            for (o, &x) in out.iter_mut().zip(src.row(u)) {
                *o += w * x;
            }
        };
        for i in 0..split {
            axpy(ws[i], nbrs[i]);
        }
        axpy(self.self_weight[v], v);
        for i in split..nbrs.len() {
            axpy(ws[i], nbrs[i]);
        }
    }

    /// `Ã·m`.
    pub fn propagate(&self, m: &Mat) -> Result<Mat> {
        self.check_rows(m)?;
        let mut out = Mat::zeros(self.n, m.cols());
        for v in 0..self.n {
            self.propagate_row(v, m, out.row_mut(v));
        }
        Ok(out)
    }

    /// `Ã^k·m`.
    pub fn propagate_k(&self, m: &Mat, k: usize) -> Result<Mat> {
        self.check_rows(m)?;
        let mut cur = m.clone();
        for _ in 0..k {
            cur = self.propagate(&cur)?;
        }
        Ok(cur)
    }

    /// Overwrites `rows` of `dst` with the matching rows of `Ã·src`.
    pub fn propagate_rows_into(&self, rows: &[usize], src: &Mat, dst: &mut Mat) -> Result<()> {
        self.check_rows(src)?;
        self.check_rows(dst)?;
        for &v in rows {
            self.propagate_row(v, src, dst.row_mut(v));
        }
        Ok(())
    }

    fn check_rows(&self, m: &Mat) -> Result<()> {
        if m.rows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, graph has {} nodes",
                m.rows(),
                self.n
            )));
        }
        Ok(())
    }

    /// Nodes grouped by exact BFS distance from `seeds`, up to `max_depth`.
    /// Entry `k` holds the sorted ids at distance `k`.
    pub fn distance_layers(&self, seeds: &NodeSet, max_depth: usize) -> Result<Vec<Vec<usize>>> {
        seeds.check_bounds(self.n)?;
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        for &s in seeds {
            dist[s] = 0;
            queue.push_back(s);
        }
        let mut layers = vec![seeds.as_slice().to_vec()];
        while let Some(v) = queue.pop_front() {
            let d = dist[v];
            if d == max_depth {
                continue;
            }
            for &u in self.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = d + 1;
                    if layers.len() <= d + 1 {
                        layers.push(Vec::new());
                    }
                    layers[d + 1].push(u);
                    queue.push_back(u);
                }
            }
        }
        for layer in &mut layers {
            layer.sort_unstable();
        }
        Ok(layers)
    }

    /// `{v : d(v, seeds) ≤ l}`.
    pub fn k_hop_neighborhood(&self, seeds: &NodeSet, l: usize) -> Result<NodeSet> {
        let all = self.distance_layers(seeds, l)?.concat();
        Ok(NodeSet::from_unsorted(all))
    }

    /// Applies a deletion-style modification and returns the new graph with
    /// the set of nodes whose `Ã` row, feature row or label changes.
    /// Keeps the edges for which `keep` holds; `keep` is consulted only for
    /// edges with both endpoints in `touched`, and rows of untouched nodes are
    /// copied with their weights unless a neighbor's degree changed.
    /// Filtering the sorted CSR rows keeps them sorted, so the result equals a
    /// fresh build of the kept edges.
    fn filtered(&self, touched: &[bool], keep: impl Fn(usize, usize) -> bool, deleted: Vec<bool>) -> Graph {
        let n = self.n;
        let keep = |u: usize, v: usize| !(touched[u] && touched[v]) || keep(u, v);
        let edges: Vec<(usize, usize)> = self.edges.iter().copied().filter(|&(u, v)| keep(u, v)).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::with_capacity(2 * edges.len());
        for v in 0..n {
            if touched[v] {
                cols.extend(self.neighbors(v).iter().copied().filter(|&u| keep(v, u)));
            } else {
                cols.extend_from_slice(self.neighbors(v));
            }
            offsets.push(cols.len());
        }
        let dbar = |v: usize| (offsets[v + 1] - offsets[v] + 1) as f64;
        let mut weights = Vec::with_capacity(cols.len());
        for v in 0..n {
            let old = self.offsets[v];
            for (i, &u) in cols[offsets[v]..offsets[v + 1]].iter().enumerate() {
                weights.push(if touched[v] || touched[u] {
                    1.0 / (dbar(v) * dbar(u)).sqrt()
                } else {
                    self.weights[old + i]
                });
            }
        }
        let self_weight = (0..n)
            .map(|v| if touched[v] { 1.0 / dbar(v) } else { self.self_weight[v] })
            .collect();
        Graph {
            n,
            edges,
            offsets,
            cols,
            weights,
            self_weight,
            deleted,
        }
    }

    pub fn modify(&self, req: &ForgetRequest) -> Result<(Graph, NodeSet)> {
        req.validate(self.n)?;
        match req {
            ForgetRequest::Label(t) | ForgetRequest::Feature(t) => {
                Ok((self.clone(), NodeSet::from_unsorted(t.clone())))
            }
            ForgetRequest::Edge(pairs) => {
                let mut drop: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
                let mut touched = Vec::with_capacity(2 * pairs.len());
                for &(u, v) in pairs {
                    if !self.has_edge(u, v) {
                        return Err(Error::TargetMissing(format!("edge ({u}, {v})")));
                    }
                    drop.push((u.min(v), u.max(v)));
                    touched.extend([u, v]);
                }
                drop.sort_unstable();
                let mut mask = vec![false; self.n];
                touched.iter().for_each(|&v| mask[v] = true);
                let g = self.filtered(
                    &mask,
                    |u, v| drop.binary_search(&(u.min(v), u.max(v))).is_err(),
                    self.deleted.clone(),
                );
                Ok((g, NodeSet::from_unsorted(touched)))
            }
            ForgetRequest::Node(t) | ForgetRequest::Subgraph(t) => {
                let mut deleted = self.deleted.clone();
                let mut touched = Vec::new();
                for &v in t {
                    if !deleted[v] {
                        deleted[v] = true;
                        touched.push(v);
                        touched.extend_from_slice(self.neighbors(v));
                    }
                }
                let mut mask = vec![false; self.n];
                touched.iter().for_each(|&v| mask[v] = true);
                let g = self.filtered(&mask, |u, v| !deleted[u] && !deleted[v], deleted.clone());
                Ok((g, NodeSet::from_unsorted(touched)))
            }
        }
    }
}

/// Cached powers `P_k = Ã^k P_0` for `k = 0..=depth`.
///
/// After a deletion-style modification with affected set `S`, only rows
/// within distance `k` of `S` (measured on the old graph, which contains the
/// new one) can differ in `P_k`. [`HopStack::refresh`] recomputes exactly
/// those rows with [`Graph::propagate_row`], so the refreshed stack is
/// bitwise equal to one built from scratch on the new graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HopStack {
    hops: Vec<Mat>,
}

impl HopStack {
    pub fn build(g: &Graph, p0: Mat, depth: usize) -> Result<Self> {
        let mut hops = Vec::with_capacity(depth + 1);
        hops.push(p0);
        for k in 1..=depth {
            let next = g.propagate(&hops[k - 1])?;
            hops.push(next);
        }
        Ok(Self { hops })
    }

    pub fn depth(&self) -> usize {
        self.hops.len() - 1
    }

    pub fn hop(&self, k: usize) -> &Mat {
        &self.hops[k]
    }

    pub fn into_hops(self) -> Vec<Mat> {
        self.hops
    }

    /// Updates the stack for `new_graph`. `layers` are the BFS distance
    /// layers from `S` on the old graph (at least `depth + 1` entries or
    /// exhausted); `p0_row` writes the new `P_0` row of a node in `S`.
    /// Returns the number of row recomputations per hop.
    pub fn refresh(
        &mut self,
        new_graph: &Graph,
        layers: &[Vec<usize>],
        mut p0_row: impl FnMut(usize, &mut [f64]),
    ) -> Vec<usize> {
        let mut touched = Vec::with_capacity(self.hops.len());
        let seeds = layers.first().map_or(&[][..], |l| l.as_slice());
        for &v in seeds {
            p0_row(v, self.hops[0].row_mut(v));
        }
        touched.push(seeds.len());
        let mut within: Vec<usize> = seeds.to_vec();
        for k in 1..self.hops.len() {
            if let Some(layer) = layers.get(k) {
                within.extend_from_slice(layer);
                within.sort_unstable();
            }
            let (done, rest) = self.hops.split_at_mut(k);
            let (prev, cur) = (&done[k - 1], &mut rest[0]);
            for &v in &within {
                new_graph.propagate_row(v, prev, cur.row_mut(v));
            }
            touched.push(within.len());
        }
        touched
    }
}

/// Free-function form of [`Graph::modify`].
pub fn modify_graph(g: &Graph, req: &ForgetRequest) -> Result<(Graph, NodeSet)> {
    g.modify(req)
}

/// Free-function form of [`Graph::propagate`].
pub fn propagate(g: &Graph, m: &Mat) -> Result<Mat> {
    g.propagate(m)
}

/// Free-function form of [`Graph::k_hop_neighborhood`].
pub fn k_hop_neighborhood(g: &Graph, seeds: &NodeSet, l: usize) -> Result<NodeSet> {
    g.k_hop_neighborhood(seeds, l)
}

/// Adjusted homophily of the subgraph induced by labeled training nodes.
///
/// With `E_tr` the train-train edges, `h_edge` the fraction of them joining
/// equal labels and `p_c` the share of train-edge endpoints in class `c`,
/// `h_adj = (h_edge − Σ p_c²) / (1 − Σ p_c²)`. When every endpoint falls in
/// one class the ratio is 0/0 and the value is taken to be 1.
pub fn adjusted_homophily(g: &Graph, labels: &[Option<usize>], train_mask: &[bool]) -> Result<f64> {
    if labels.len() != g.n() || train_mask.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "labels ({}) and train mask ({}) must cover {} nodes",
            labels.len(),
            train_mask.len(),
            g.n()
        )));
    }
    let cls = |v: usize| if train_mask[v] { labels[v] } else { None };
    let num_classes = labels.iter().flatten().max().map_or(0, |&c| c + 1);
    let mut endpoint_mass = vec![0u64; num_classes];
    let (mut total, mut same) = (0u64, 0u64);
    for &(u, v) in g.edges() {
        if let (Some(a), Some(b)) = (cls(u), cls(v)) {
            total += 1;
            same += (a == b) as u64;
            endpoint_mass[a] += 1;
            endpoint_mass[b] += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoTrainEdges);
    }
    let h_edge = same as f64 / total as f64;
    let denom = 2.0 * total as f64;
    let sum_p2: f64 = endpoint_mass.iter().map(|&m| (m as f64 / denom).powi(2)).sum();
    if same == total && endpoint_mass.iter().filter(|&&m| m > 0).count() == 1 {
        return Ok(1.0);
    }
    Ok((h_edge - sum_p2) / (1.0 - sum_p2))
}
