//! Fixtures and dense reference computations shared by the integration tests.
#![allow(dead_code)]

use cfgraph::data::{generate_sbm, Dataset, SbmSpec};
use cfgraph::graph::Graph;
use cfgraph::lcfnet::{BaseFeatureFlags, LcfConfig, Phi};
use cfgraph::numerics::Mat;
use cfgraph::pipeline_a::PipelineAConfig;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sbm(n: usize, classes: usize, p_in: f64, p_out: f64, dim: usize, sep: f64, seed: u64) -> Dataset {
    generate_sbm(&SbmSpec {
        n,
        num_classes: classes,
        p_in,
        p_out,
        feature_dim: dim,
        class_mean_separation: sep,
        seed,
    })
    .unwrap()
}

/// A small assortative dataset most unit-scale tests can share.
pub fn small_homophilous(seed: u64) -> Dataset {
    sbm(120, 3, 0.12, 0.01, 6, 2.0, seed)
}

/// Erdős–Rényi graph on `n` nodes.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut r = rng(seed);
    Mat::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn to_dense(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_dense(d: &DMatrix<f64>) -> Mat {
    Mat::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)])
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `D̄^{-1/2}(A+I)D̄^{-1/2}` assembled from the edge list alone.
pub fn dense_a_tilde(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::<f64>::identity(n, n);
    for &(u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt())
}

/// All-pairs hop distances by Floyd–Warshall over the edge list.
pub fn all_pairs_hops(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for &(u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// `(Hᵀ H + α I)⁻¹ Hᵀ Y` by explicit inversion.
pub fn dense_ridge(h: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let d = h.ncols();
    let g = h.transpose() * h + DMatrix::identity(d, d) * alpha;
    g.try_inverse().expect("invertible") * h.transpose() * y
}

/// Row-normalized features, recomputed without the library.
pub fn dense_row_normalized(m: &Mat) -> DMatrix<f64> {
    let mut d = to_dense(m);
    for mut row in d.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    d
}

/// One-hop K=1 LCF-Net without whitening: the configuration that supports
/// K-hop unlearning.
pub fn lcf_local_config() -> LcfConfig {
    LcfConfig {
        k: 1,
        phi: Phi::Tanh,
        lambda: 0.5,
        sigma_scale: 1.0,
        sigma_abs: None,
        lambda_prime: 0.1,
        use_lcf: true,
        base: BaseFeatureFlags::default(),
        whiten: false,
        precision: Default::default(),
    }
}

pub fn plain_a_config(k: usize) -> PipelineAConfig {
    PipelineAConfig {
        k,
        alpha: 0.5,
        ..Default::default()
    }
}

/// Rows of `Ã^L X` that change under `req` but lie outside `N_L(S)`, with
/// both sides recomputed densely.
pub fn containment_violations(ds: &Dataset, req: &cfgraph::forget::ForgetRequest, l: usize) -> Vec<usize> {
    let (modified, s) = ds.apply_forget(req).unwrap();
    let power = |g: &Graph| {
        let a = dense_a_tilde(g);
        let mut p = DMatrix::identity(g.n(), g.n());
        for _ in 0..l {
            p = &a * p;
        }
        p
    };
    let before = power(&ds.graph) * to_dense(&ds.features);
    let after = power(&modified.graph) * to_dense(&modified.features);
    let region = ds.graph.k_hop_neighborhood(&s, l).unwrap();
    (0..ds.n())
        .filter(|&v| !region.contains(v))
        .filter(|&v| (0..before.ncols()).any(|j| (before[(v, j)] - after[(v, j)]).abs() > 1e-12))
        .collect()
}

/// Four classes in two pairs, {0, 1} and {2, 3}; every edge joins the two
/// pairs, so a node's neighborhood looks the same for both classes of its
/// pair while its own features still identify the class.
pub fn paired_heterophily(n: usize, mean_degree: f64, sep: f64, seed: u64) -> Dataset {
    use cfgraph::data::{stratified_split, Labels, Metric};
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let classes: Vec<usize> = (0..n).map(|v| v % 4).collect();
    let p = mean_degree / (n as f64 / 2.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if (classes[u] < 2) != (classes[v] < 2) && r.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let dim = 8;
    let features = Mat::from_fn(n, dim, |v, j| {
        let z: f64 = StandardNormal.sample(&mut r);
        if j == classes[v] {
            z + sep
        } else {
            z
        }
    });
    let strata: Vec<Option<usize>> = classes.iter().map(|&c| Some(c)).collect();
    let (train, val, test) = stratified_split(&strata, seed);
    Dataset {
        name: "paired-heterophily".into(),
        graph: Graph::from_edges(n, edges).unwrap(),
        features,
        labels: Labels::Single { classes: strata, num_classes: 4 },
        train,
        val,
        test,
        metric: Metric::Accuracy,
        pipeline_override: None,
    }
}

pub fn test_accuracy(pred: &Mat, ds: &Dataset) -> f64 {
    cfgraph::data::evaluate(pred, ds, &ds.test).unwrap()
}

/// Published adjusted-homophily values of the fourteen benchmarks.
pub fn homophily_table() -> Vec<cfgraph::router::HomophilyEntry> {
    serde_json::from_str(include_str!("../fixtures/homophily_table.json")).unwrap()
}

pub const SWEEP_TAUS: [f64; 7] = [-0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Datasets with a defined homophily that each threshold in [`SWEEP_TAUS`]
/// sends to Pipeline B.
pub fn expected_pipeline_b(tau: f64) -> Vec<&'static str> {
    let heterophilous = vec!["Minesweeper", "Tolokers", "Amazon-Ratings", "Roman-empire", "Questions"];
    match tau {
        t if t == -0.1 => vec![],
        t if t == 0.0 => vec!["Roman-empire"],
        t if t == 0.1 => vec!["Minesweeper", "Tolokers", "Roman-empire", "Questions"],
        t if t == 0.5 => {
            let mut v = vec!["ogbn-arxiv"];
            v.extend(heterophilous);
            v
        }
        _ => heterophilous,
    }
}

/// Runs the sweep over the table and returns, per threshold, the computed
/// Pipeline B set and whether the hand-assigned entry stayed in Pipeline B.
pub fn table_routing() -> Vec<(f64, Vec<String>, bool)> {
    use cfgraph::data::Pipeline;
    use cfgraph::router::{routing_table, RouteReason};
    routing_table(&homophily_table(), &SWEEP_TAUS)
        .unwrap()
        .into_iter()
        .map(|row| {
            let computed: Vec<String> = row
                .decisions
                .iter()
                .filter(|(_, d)| d.reason == RouteReason::Computed && d.pipeline == Pipeline::B)
                .map(|(n, _)| n.clone())
                .collect();
            let hand_ok = row
                .decisions
                .iter()
                .filter(|(_, d)| d.reason == RouteReason::HandAssigned)
                .all(|(_, d)| d.pipeline == Pipeline::B);
            (row.tau, computed, hand_ok)
        })
        .collect()
}
