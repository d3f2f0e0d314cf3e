mod common;

use cfgraph::data::{Dataset, Labels};
use cfgraph::graph::Graph;
use cfgraph::lcfnet::{base_features_h0, fit_lcfnet, lcf_layer, BaseFeatureFlags, LcfConfig, Phi};
use cfgraph::numerics::{krr_fit, Mat};
use cfgraph::pipeline_a::{
    appnp_label_propagation, build_features_a, correct_and_smooth, fit_a, smooth_labels, CnsParams,
    PipelineAConfig, Variant, XSource,
};
use common::*;
use nalgebra::DMatrix;

fn dense_power(a: &DMatrix<f64>, x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    (0..k).fold(x.clone(), |acc, _| a * acc)
}

fn one_hot_train(ds: &Dataset) -> DMatrix<f64> {
    let tr = ds.train_nodes();
    to_dense(&ds.labels.targets(tr.as_slice()))
}

fn select(d: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d.ncols(), |i, j| d[(rows[i], j)])
}

#[test]
fn zero_hops_returns_source() {
    let ds = small_homophilous(1);
    let cfg = PipelineAConfig {
        k: 0,
        x_src: XSource::Raw,
        ..Default::default()
    };
    assert!(build_features_a(&ds, &cfg).unwrap().bit_eq(&ds.features));
}

#[test]
fn row_normalized_rows_have_unit_norm() {
    let mut ds = small_homophilous(2);
    ds.features.row_mut(5).iter_mut().for_each(|x| *x = 0.0);
    let x = ds.row_normalized_features();
    for v in 0..ds.n() {
        let norm: f64 = x.row(v).iter().map(|a| a * a).sum::<f64>().sqrt();
        let expect = if v == 5 { 0.0 } else { 1.0 };
        assert!((norm - expect).abs() <= 1e-15);
    }
}

#[test]
fn sgc_features_match_dense_power() {
    let ds = sbm(50, 2, 0.2, 0.05, 4, 1.0, 3);
    let h = build_features_a(&ds, &plain_a_config(3)).unwrap();
    let oracle = dense_power(&dense_a_tilde(&ds.graph), &dense_row_normalized(&ds.features), 3);
    assert!(max_abs_diff(&to_dense(&h), &oracle) <= 1e-12);
}

#[test]
fn concat_variant_stacks_scaled_hops() {
    let ds = sbm(40, 2, 0.2, 0.05, 3, 1.0, 4);
    let cfg = PipelineAConfig {
        k: 2,
        alpha: 1.0,
        variant: Variant::MultihopConcat,
        group_alphas: Some(vec![1.0, 4.0, 0.25]),
        ..Default::default()
    };
    let h = to_dense(&build_features_a(&ds, &cfg).unwrap());
    let a = dense_a_tilde(&ds.graph);
    let x = dense_row_normalized(&ds.features);
    for (g, scale) in [(0, 1.0), (1, 0.5), (2, 2.0)] {
        let block = h.columns(g * 3, 3).into_owned();
        assert!(max_abs_diff(&block, &(dense_power(&a, &x, g) * scale)) <= 1e-12);
    }
}

#[test]
fn concat_scaling_equals_per_group_penalty() {
    // Scaling group g by sqrt(α/α_g) under a single α is the same problem as
    // penalizing each group's weights by its own α_g.
    let ds = sbm(60, 2, 0.2, 0.05, 3, 1.5, 5);
    let alphas = [0.5, 2.0, 8.0];
    let cfg = PipelineAConfig {
        k: 2,
        alpha: 1.0,
        variant: Variant::MultihopConcat,
        group_alphas: Some(alphas.to_vec()),
        ..Default::default()
    };
    let model = fit_a(&ds, &cfg).unwrap();
    let a = dense_a_tilde(&ds.graph);
    let x = dense_row_normalized(&ds.features);
    let tr = ds.train_nodes();
    let raw = DMatrix::from_fn(ds.n(), 9, |i, j| dense_power(&a, &x, j / 3)[(i, j % 3)]);
    let h = select(&raw, tr.as_slice());
    let penalty = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(9, |j, _| alphas[j / 3]));
    let w_raw = (h.transpose() * &h + penalty).try_inverse().unwrap() * h.transpose() * one_hot_train(&ds);
    let ours = to_dense(&model.predict(&ds).unwrap());
    assert!(max_abs_diff(&ours, &(raw * w_raw)) <= 1e-10);
}

#[test]
fn label_smoothing_values() {
    let y = Mat::from_rows(&[vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
    assert!(smooth_labels(&y, 0.0).bit_eq(&y));
    assert!(smooth_labels(&y, 1.0).as_slice().iter().all(|&v| v == 0.25));
    let s = smooth_labels(&y, 0.1);
    assert!((s[(0, 1)] - 0.925).abs() <= 1e-15);
    assert!((s[(0, 0)] - 0.025).abs() <= 1e-15);
}

#[test]
fn pipeline_a_weights_are_ridge_optimum() {
    let ds = small_homophilous(6);
    let cfg = PipelineAConfig {
        epsilon: 0.1,
        ..plain_a_config(2)
    };
    let model = fit_a(&ds, &cfg).unwrap();
    let h = to_dense(&build_features_a(&ds, &cfg).unwrap());
    let tr = ds.train_nodes();
    let y = to_dense(&smooth_labels(&ds.labels.targets(tr.as_slice()), 0.1));
    let oracle = dense_ridge(&select(&h, tr.as_slice()), &y, cfg.alpha);
    assert!(max_abs_diff(&to_dense(model.weights()), &oracle) <= 1e-12);
    assert_eq!(fit_a(&ds, &cfg).unwrap(), model);
    assert!(model.stats().solve().unwrap().bit_eq(model.weights()));
}

#[test]
fn pipeline_a_separates_assortative_sbm() {
    let ds = sbm(400, 2, 0.05, 0.002, 8, 2.0, 7);
    let model = fit_a(&ds, &plain_a_config(2)).unwrap();
    assert!(test_accuracy(&model.predict(&ds).unwrap(), &ds) > 0.95);
}

#[test]
fn single_class_training_predicts_that_class() {
    let mut ds = small_homophilous(8);
    let mut r = rng(9);
    ds.features = Mat::from_fn(ds.n(), 6, |_, _| 1.0 + 0.1 * rand::Rng::random_range(&mut r, 0.0..1.0));
    let n = ds.n();
    ds.labels = Labels::Single {
        classes: vec![Some(1); n],
        num_classes: 3,
    };
    let pred = fit_a(&ds, &plain_a_config(2)).unwrap().predict(&ds).unwrap();
    assert!((0..n).all(|v| cfgraph::numerics::mat::argmax(pred.row(v)) == 1));
}

#[test]
fn permuting_nodes_permutes_predictions() {
    let ds = small_homophilous(10);
    let n = ds.n();
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng(11));
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let Labels::Single { classes, num_classes } = &ds.labels else { unreachable!() };
    let pds = Dataset {
        graph: Graph::from_edges(n, ds.graph.edges().iter().map(|&(u, v)| (inv[u], inv[v]))).unwrap(),
        features: ds.features.select_rows(&perm),
        labels: Labels::Single {
            classes: perm.iter().map(|&o| classes[o]).collect(),
            num_classes: *num_classes,
        },
        train: perm.iter().map(|&o| ds.train[o]).collect(),
        val: perm.iter().map(|&o| ds.val[o]).collect(),
        test: perm.iter().map(|&o| ds.test[o]).collect(),
        ..ds.clone()
    };
    let cfg = plain_a_config(2);
    let p = fit_a(&ds, &cfg).unwrap().predict(&ds).unwrap();
    let q = fit_a(&pds, &cfg).unwrap().predict(&pds).unwrap();
    let q_back = q.select_rows(&inv);
    assert!(max_abs_diff(&to_dense(&p), &to_dense(&q_back)) <= 1e-12);
    assert!((0..n).all(|v| cfgraph::numerics::mat::argmax(p.row(v)) == cfgraph::numerics::mat::argmax(q_back.row(v))));
}

/// Straight transcription of the Huang et al. recipe with dense matrices.
fn cns_oracle(ds: &Dataset, base: &Mat, p: &CnsParams) -> DMatrix<f64> {
    let a = dense_a_tilde(&ds.graph);
    let n = ds.n();
    let c = base.cols();
    let tr = ds.train_nodes();
    let mut y = DMatrix::zeros(n, c);
    for &v in tr.iter() {
        y[(v, ds.labels.class_of(v).unwrap())] = 1.0;
    }
    let b = to_dense(base);
    let mut e0 = DMatrix::zeros(n, c);
    for &v in tr.iter() {
        e0.set_row(v, &(y.row(v) - b.row(v)));
    }
    let spread = |start: &DMatrix<f64>, alpha: f64| {
        let mut z = start.clone();
        for _ in 0..p.num_iters {
            z = start * (1.0 - alpha) + (&a * &z) * alpha;
        }
        z
    };
    let e = spread(&e0, p.alpha_correct);
    let sigma = tr.iter().map(|&v| e0.row(v).abs().sum()).sum::<f64>() / tr.len() as f64;
    let mut corrected = b.clone();
    for v in 0..n {
        let l1 = e.row(v).abs().sum();
        let s = if l1 == 0.0 || sigma / l1 > 1000.0 { 1.0 } else { sigma / l1 };
        corrected.set_row(v, &(b.row(v) + e.row(v) * s));
    }
    for &v in tr.iter() {
        corrected.set_row(v, &y.row(v));
    }
    spread(&corrected, p.alpha_smooth)
}

#[test]
fn correct_and_smooth_matches_reference() {
    let ds = sbm(100, 2, 0.1, 0.02, 4, 0.8, 12);
    let base = fit_a(&ds, &plain_a_config(1)).unwrap().predict(&ds).unwrap();
    let p = CnsParams {
        alpha_correct: 0.7,
        alpha_smooth: 0.6,
        num_iters: 30,
        autoscale: true,
    };
    let ours = correct_and_smooth(&ds, &base, &p).unwrap();
    assert!(max_abs_diff(&to_dense(&ours), &cns_oracle(&ds, &base, &p)) <= 1e-10);
    let before = test_accuracy(&base, &ds);
    let after = test_accuracy(&ours, &ds);
    let oracle_after = test_accuracy(&from_dense(&cns_oracle(&ds, &base, &p)), &ds);
    assert_eq!(after, oracle_after, "base accuracy {before}");
}

#[test]
fn smoothing_without_propagation_clamps_train_rows() {
    let ds = small_homophilous(13);
    let base = random_mat(ds.n(), 3, 14);
    let p = CnsParams {
        alpha_correct: 0.5,
        alpha_smooth: 0.0,
        ..Default::default()
    };
    let out = correct_and_smooth(&ds, &base, &p).unwrap();
    for v in ds.train_nodes().iter().copied() {
        let c = ds.labels.class_of(v).unwrap();
        assert!((0..3).all(|j| out[(v, j)] == if j == c { 1.0 } else { 0.0 }));
    }
}

#[test]
fn label_propagation_trivial_cases() {
    let ds = small_homophilous(15);
    let z0 = appnp_label_propagation(&ds, 0.1, 0).unwrap();
    assert!(appnp_label_propagation(&ds, 1.0, 10).unwrap().bit_eq(&z0));
    assert_eq!(z0.as_slice().iter().sum::<f64>(), ds.train_nodes().len() as f64);
}

#[test]
fn label_propagation_decays_along_path() {
    let n = 5;
    let ds = Dataset {
        name: "path".into(),
        graph: Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap(),
        features: Mat::zeros(n, 1),
        labels: Labels::Single {
            classes: vec![Some(0); n],
            num_classes: 1,
        },
        train: vec![true, false, false, false, false],
        val: vec![false; n],
        test: vec![false, true, true, true, true],
        metric: cfgraph::data::Metric::Accuracy,
        pipeline_override: None,
    };
    let z = appnp_label_propagation(&ds, 0.1, 10).unwrap();
    for v in 1..n {
        assert!(z[(v, 0)] < z[(v - 1, 0)], "{v}");
    }
}

/// `h₀` blocks recomputed densely from `X̂` and `Ã`.
fn h0_oracle(ds: &Dataset) -> DMatrix<f64> {
    let a = dense_a_tilde(&ds.graph);
    let x = dense_row_normalized(&ds.features);
    let p: Vec<DMatrix<f64>> = (0..4).map(|k| dense_power(&a, &x, k)).collect();
    let sq = x.component_mul(&x);
    let var = |k: usize| dense_power(&a, &sq, k) - p[k].component_mul(&p[k]);
    let n = ds.n();
    let mut attn = DMatrix::zeros(n, x.ncols());
    for v in 0..n {
        let nbrs = ds.graph.neighbors(v);
        if nbrs.is_empty() {
            attn.set_row(v, &x.row(v));
            continue;
        }
        let cos = |u: usize| {
            let (xv, xu) = (x.row(v), x.row(u));
            if xv.norm() == 0.0 || xu.norm() == 0.0 {
                0.0
            } else {
                (xv.dot(&xu) / (xv.norm() * xu.norm())).max(0.0)
            }
        };
        let total: f64 = nbrs.iter().map(|&u| cos(u)).sum();
        let row = if total > 0.0 {
            nbrs.iter().map(|&u| x.row(u) * cos(u)).fold(x.row(v) * 0.0, |s, r| s + r) / total
        } else {
            nbrs.iter().map(|&u| x.row(u).into_owned()).fold(x.row(v) * 0.0, |s, r| s + r) / nbrs.len() as f64
        };
        attn.set_row(v, &row);
    }
    let blocks = [
        p[0].clone(),
        p[1].clone(),
        p[2].clone(),
        p[3].clone(),
        var(1),
        var(2),
        &p[0] - &p[1],
        &p[1] - &p[2],
        &p[2] - &p[3],
        attn,
    ];
    let d = x.ncols();
    DMatrix::from_fn(n, 10 * d, |i, j| blocks[j / d][(i, j % d)])
}

#[test]
fn base_features_match_dense_oracle() {
    let ds = sbm(60, 3, 0.15, 0.05, 4, 1.0, 16);
    let h0 = base_features_h0(&ds, BaseFeatureFlags::default()).unwrap();
    assert!(max_abs_diff(&to_dense(&h0), &h0_oracle(&ds)) <= 1e-12);
}

#[test]
fn base_feature_edge_cases() {
    let mut ds = sbm(30, 2, 0.0, 0.0, 3, 1.0, 17);
    for v in 0..ds.n() {
        ds.features.row_mut(v).iter_mut().for_each(|x| *x = 2.0);
    }
    let flags = BaseFeatureFlags {
        x: false,
        hop1: false,
        hop2: false,
        hop3: false,
        var2: false,
        diff12: false,
        diff23: false,
        attn: false,
        ..Default::default()
    };
    // Constant features give zero variance; isolated nodes give zero differences.
    let h0 = base_features_h0(&ds, flags).unwrap();
    assert!(h0.as_slice().iter().all(|&v| v.abs() <= 1e-15));
}

#[test]
fn variance_block_on_star_matches_brute_force() {
    let n = 6;
    let mut ds = sbm(n, 2, 0.0, 0.0, 2, 1.0, 18);
    ds.graph = Graph::from_edges(n, (1..n).map(|i| (0, i))).unwrap();
    ds.features = random_mat(n, 2, 19);
    let flags = BaseFeatureFlags {
        x: false,
        hop1: false,
        hop2: false,
        hop3: false,
        var2: false,
        diff01: false,
        diff12: false,
        diff23: false,
        attn: false,
        ..Default::default()
    };
    let h0 = base_features_h0(&ds, flags).unwrap();
    let x = ds.row_normalized_features();
    for v in 0..n {
        let mut support: Vec<usize> = ds.graph.neighbors(v).to_vec();
        support.push(v);
        let w = |u: usize| 1.0 / (((ds.graph.degree(v) + 1) * (ds.graph.degree(u) + 1)) as f64).sqrt();
        for j in 0..2 {
            let m1: f64 = support.iter().map(|&u| w(u) * x[(u, j)]).sum();
            let m2: f64 = support.iter().map(|&u| w(u) * x[(u, j)] * x[(u, j)]).sum();
            assert!((h0[(v, j)] - (m2 - m1 * m1)).abs() <= 1e-14);
        }
    }
}

#[test]
fn lcf_layer_matches_dense_equations() {
    let ds = sbm(60, 3, 0.15, 0.05, 4, 1.0, 20);
    let h = random_mat(60, 5, 21);
    let tr = ds.train_nodes();
    let y = ds.labels.targets(tr.as_slice());
    let (p, w, h_next) = lcf_layer(&ds.graph, &h, Phi::Tanh, 0.3, &y, &tr).unwrap();
    let a = (dense_a_tilde(&ds.graph) * to_dense(&h)).map(f64::tanh);
    let w_oracle = dense_ridge(&select(&a, tr.as_slice()), &to_dense(&y), 0.3);
    assert!(max_abs_diff(&to_dense(&w), &w_oracle) <= 1e-12);
    assert!(max_abs_diff(&to_dense(&p), &(&a * &w_oracle)) <= 1e-12);
    assert_eq!(h_next.cols(), 5 + 3);
    assert!(h_next.select_rows(&[0]).as_slice()[..5] == *h.row(0));
}

#[test]
fn lcf_layer_recovers_linear_labels() {
    // One-hot labels placed directly in the post-aggregation space.
    let ds = sbm(40, 2, 0.0, 0.0, 2, 1.0, 22);
    let tr = ds.train_nodes();
    let y = ds.labels.targets(tr.as_slice());
    let mut h = Mat::zeros(40, 2);
    for v in 0..40 {
        h[(v, ds.labels.class_of(v).unwrap())] = 1.0;
    }
    let (p, _, _) = lcf_layer(&ds.graph, &h, Phi::None, 1e-10, &y, &tr).unwrap();
    assert!(p.select_rows(tr.as_slice()).max_abs_diff(&y).unwrap() <= 1e-8);
}

fn lcf(k: usize) -> LcfConfig {
    LcfConfig {
        k,
        whiten: false,
        ..lcf_local_config()
    }
}

#[test]
fn krr_only_equals_head_on_base_features() {
    let ds = small_homophilous(23);
    let cfg = LcfConfig {
        use_lcf: false,
        sigma_abs: Some(1.5),
        ..lcf(3)
    };
    let model = fit_lcfnet(&ds, &cfg).unwrap();
    let tr = ds.train_nodes();
    let h0 = base_features_h0(&ds, cfg.base).unwrap();
    let head = krr_fit(&h0.select_rows(tr.as_slice()), &ds.labels.targets(tr.as_slice()), 1.5, cfg.lambda_prime).unwrap();
    assert_eq!(model.head(), &head);
}

#[test]
fn layer_widths_follow_recurrence() {
    let ds = small_homophilous(24);
    let model = fit_lcfnet(&ds, &lcf(4)).unwrap();
    let (d0, c) = (model.base_width(), 3);
    for (k, w) in model.weights().iter().enumerate() {
        assert_eq!(w.rows(), d0 + k * c);
        assert_eq!(model.layer_width(k + 1), d0 + k * c);
    }
    assert_eq!(model.representation(&ds).unwrap().cols(), d0 + 4 * c);
}

#[test]
fn layer_weights_equal_ridge_oracle_and_residual_shrinks() {
    let ds = small_homophilous(25);
    let cfg = lcf(3);
    let model = fit_lcfnet(&ds, &cfg).unwrap();
    let tr = ds.train_nodes();
    let y = to_dense(&ds.labels.targets(tr.as_slice()));
    let a_tilde = dense_a_tilde(&ds.graph);
    let mut h = to_dense(&base_features_h0(&ds, cfg.base).unwrap());
    let mut last_residual = f64::INFINITY;
    for w in model.weights() {
        let a = (&a_tilde * &h).map(f64::tanh);
        let oracle = dense_ridge(&select(&a, tr.as_slice()), &y, cfg.lambda);
        assert!(max_abs_diff(&to_dense(w), &oracle) <= 1e-9);
        // Best linear fit of the labels from h at fixed penalty.
        let h_tr = select(&h, tr.as_slice());
        let fit = &h_tr * dense_ridge(&h_tr, &y, 1e-8);
        let residual = (&fit - &y).norm();
        assert!(residual <= last_residual + 1e-9);
        last_residual = residual;
        let p = &a * oracle;
        h = DMatrix::from_fn(h.nrows(), h.ncols() + p.ncols(), |i, j| {
            if j < h.ncols() {
                h[(i, j)]
            } else {
                p[(i, j - h.ncols())]
            }
        });
    }
}

#[test]
fn replay_reproduces_fit_and_monolithic_oracle() {
    let ds = sbm(80, 3, 0.15, 0.05, 4, 1.0, 26);
    let cfg = LcfConfig {
        sigma_abs: Some(2.0),
        ..lcf(2)
    };
    let model = fit_lcfnet(&ds, &cfg).unwrap();
    assert_eq!(fit_lcfnet(&ds, &cfg).unwrap(), model);
    let pred = model.predict(&ds).unwrap();
    assert!(pred.bit_eq(&model.predict(&ds).unwrap()));
    assert_eq!(pred.rows(), ds.n());

    let tr = ds.train_nodes();
    let y = to_dense(&ds.labels.targets(tr.as_slice()));
    let a_tilde = dense_a_tilde(&ds.graph);
    let mut h = h0_oracle(&ds);
    for _ in 0..2 {
        let a = (&a_tilde * &h).map(f64::tanh);
        let p = &a * dense_ridge(&select(&a, tr.as_slice()), &y, cfg.lambda);
        let (r, c) = (h.nrows(), h.ncols());
        h = DMatrix::from_fn(r, c + p.ncols(), |i, j| if j < c { h[(i, j)] } else { p[(i, j - c)] });
    }
    let h_tr = select(&h, tr.as_slice());
    let gauss = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            (-(a.row(i) - b.row(j)).norm_squared() / (2.0 * 2.0 * 2.0)).exp()
        })
    };
    let dual = (gauss(&h_tr, &h_tr) + DMatrix::identity(tr.len(), tr.len()) * cfg.lambda_prime)
        .try_inverse()
        .unwrap()
        * &y;
    let oracle = gauss(&h, &h_tr) * dual;
    assert!(max_abs_diff(&to_dense(&pred), &oracle) <= 1e-8);
}

#[test]
fn lcf_beats_sgc_under_heterophily() {
    let ds = paired_heterophily(600, 8.0, 2.0, 27);
    let a = test_accuracy(&fit_a(&ds, &plain_a_config(2)).unwrap().predict(&ds).unwrap(), &ds);
    let b = test_accuracy(&fit_lcfnet(&ds, &LcfConfig::default()).unwrap().predict(&ds).unwrap(), &ds);
    assert!(b >= a + 0.05, "LCF-Net {b} vs SGC {a}");
}

#[test]
fn predict_rejects_shape_mismatch() {
    let ds = small_homophilous(28);
    let model = fit_lcfnet(&ds, &lcf(1)).unwrap();
    let other = sbm(50, 3, 0.1, 0.01, 5, 1.0, 29);
    assert!(matches!(model.predict(&other), Err(cfgraph::Error::ShapeMismatch(_))));
}
