mod common;

use cfgraph::forget::{ForgetKind, ForgetRequest};
use cfgraph::graph::NodeSet;
use cfgraph::lcfnet::{fit_lcfnet, LcfConfig};
use cfgraph::model::{Model, ModelConfig};
use cfgraph::numerics::Precision;
use cfgraph::pipeline_a::{fit_a, PipelineAModel};
use cfgraph::unlearn::{
    audit, bench_unlearn, locality_radius, mia_attack, parameter_delta, retrain_from_scratch, sample_request,
    unlearn, unlearn_khop, unlearn_label_krr_experimental, verify_exact, BenchGrid, Strategy,
};
use common::*;
use proptest::prelude::*;

fn configs() -> Vec<ModelConfig> {
    vec![
        ModelConfig::A(plain_a_config(2)),
        ModelConfig::A(cfgraph::pipeline_a::PipelineAConfig {
            variant: cfgraph::pipeline_a::Variant::MultihopConcat,
            epsilon: 0.1,
            ..plain_a_config(3)
        }),
        ModelConfig::B(lcf_local_config()),
    ]
}

fn check_exact(ds: &cfgraph::data::Dataset, cfg: &ModelConfig, req: &ForgetRequest) {
    let model = Model::fit(ds, cfg).unwrap();
    let khop = unlearn_khop(&model, ds, req).unwrap();
    let reference = retrain_from_scratch(cfg, ds, req).unwrap();
    assert_eq!(khop.dataset, reference.dataset);
    assert_eq!(parameter_delta(&khop.model, &reference.model).unwrap(), 0.0, "{cfg:?} {req:?}");
    let pu = khop.model.predict_proba(&khop.dataset).unwrap();
    let pr = reference.model.predict_proba(&reference.dataset).unwrap();
    assert!(pu.bit_eq(&pr));
}

#[test]
fn khop_equals_retrain_for_every_kind() {
    let ds = sbm(150, 3, 0.08, 0.01, 5, 1.5, 1);
    for cfg in configs() {
        for (i, kind) in ForgetKind::ALL.into_iter().enumerate() {
            for size in [1, 5] {
                let req = sample_request(&ds, kind, size, 10 * i as u64 + size as u64).unwrap();
                check_exact(&ds, &cfg, &req);
            }
        }
    }
}

#[test]
fn khop_is_exact_in_single_precision_too() {
    let ds = sbm(120, 3, 0.08, 0.01, 5, 1.5, 2);
    for mut cfg in configs() {
        cfg.set_precision(Precision::Fp32);
        for kind in [ForgetKind::Edge, ForgetKind::Node] {
            let req = sample_request(&ds, kind, 3, 7).unwrap();
            let model = Model::fit(&ds, &cfg).unwrap();
            let out = audit(&model, &ds, &req, Strategy::Khop).unwrap();
            assert!(out.report.delta_theta.unwrap() <= Precision::Fp32.tolerance());
        }
    }
}

#[test]
fn sequential_requests_stay_exact() {
    let ds = sbm(150, 3, 0.08, 0.01, 5, 1.5, 3);
    let cfg = ModelConfig::A(plain_a_config(2));
    let mut model = Model::fit(&ds, &cfg).unwrap();
    let mut cur = ds.clone();
    for (i, kind) in ForgetKind::ALL.into_iter().enumerate() {
        let req = sample_request(&cur, kind, 2, 100 + i as u64).unwrap();
        let out = unlearn_khop(&model, &cur, &req).unwrap();
        model = out.model;
        cur = out.dataset;
    }
    assert_eq!(parameter_delta(&model, &Model::fit(&cur, &cfg).unwrap()).unwrap(), 0.0);
}

#[test]
fn deep_or_whitened_lcf_is_not_local() {
    let ds = small_homophilous(4);
    let req = ForgetRequest::Edge(vec![ds.graph.edges()[0]]);
    for cfg in [
        LcfConfig { k: 2, ..lcf_local_config() },
        LcfConfig { whiten: true, ..lcf_local_config() },
    ] {
        let model = Model::fit(&ds, &ModelConfig::B(cfg)).unwrap();
        assert!(!model.locality_eligible());
        assert!(matches!(unlearn_khop(&model, &ds, &req), Err(cfgraph::Error::NotLocalityEligible(_))));
        let full = unlearn(&model, &ds, &req, Strategy::Full).unwrap();
        let retrain = unlearn(&model, &ds, &req, Strategy::Retrain).unwrap();
        assert_eq!(full.model.to_bytes(), retrain.model.to_bytes());
    }
}

#[test]
fn full_resolve_is_byte_identical_to_retrain() {
    let ds = small_homophilous(5);
    for cfg in configs() {
        let model = Model::fit(&ds, &cfg).unwrap();
        let req = sample_request(&ds, ForgetKind::Subgraph, 6, 1).unwrap();
        let a = unlearn(&model, &ds, &req, Strategy::Full).unwrap();
        let b = unlearn(&model, &ds, &req, Strategy::Retrain).unwrap();
        assert_eq!(a.model.to_bytes(), b.model.to_bytes());
    }
}

#[test]
fn deleting_a_deleted_node_changes_nothing() {
    let ds = small_homophilous(6);
    let cfg = ModelConfig::A(plain_a_config(2));
    let req = ForgetRequest::Node(vec![7]);
    let model = Model::fit(&ds, &cfg).unwrap();
    let first = unlearn_khop(&model, &ds, &req).unwrap();
    let second = unlearn_khop(&first.model, &first.dataset, &req).unwrap();
    assert!(second.affected.is_empty());
    assert_eq!(second.dataset, first.dataset);
    assert_eq!(second.model.to_bytes(), first.model.to_bytes());
}

#[test]
fn forgetting_far_from_training_leaves_weights_untouched() {
    // Node 0 is a non-training node with no edges.
    let mut ds = small_homophilous(7);
    let u = 0usize;
    ds.train[u] = false;
    ds.test[u] = true;
    ds.val[u] = false;
    let edges: Vec<_> = ds.graph.edges().iter().copied().filter(|&(a, b)| a != u && b != u).collect();
    ds.graph = cfgraph::graph::Graph::from_edges(ds.n(), edges).unwrap();
    let model = Model::fit(&ds, &ModelConfig::A(plain_a_config(2))).unwrap();
    let out = unlearn_khop(&model, &ds, &ForgetRequest::Feature(vec![u])).unwrap();
    assert_eq!(out.report.affected_size, 0);
    assert!(out.model.parameter_blocks()[0].bit_eq(model.parameter_blocks()[0]));
}

#[test]
fn touched_rows_match_neighborhood_size() {
    let ds = sbm(200, 3, 0.03, 0.005, 4, 1.0, 8);
    for k in 1..=3 {
        let cfg = ModelConfig::A(plain_a_config(k));
        assert_eq!(locality_radius(&cfg), k);
        let model = Model::fit(&ds, &cfg).unwrap();
        for kind in [ForgetKind::Feature, ForgetKind::Edge, ForgetKind::Node] {
            let req = sample_request(&ds, kind, 3, k as u64).unwrap();
            let out = unlearn_khop(&model, &ds, &req).unwrap();
            let region = ds.graph.k_hop_neighborhood(&out.affected, k).unwrap();
            assert_eq!(out.report.touched_rows, Some(region.len()), "k={k} {kind:?}");
        }
    }
    let label = sample_request(&ds, ForgetKind::Label, 4, 1).unwrap();
    let model = Model::fit(&ds, &ModelConfig::A(plain_a_config(2))).unwrap();
    assert_eq!(unlearn_khop(&model, &ds, &label).unwrap().report.affected_size, 4);
}

#[test]
fn label_forget_requires_training_targets() {
    let ds = small_homophilous(9);
    let outsider = (0..ds.n()).find(|&v| !ds.train[v]).unwrap();
    let model = Model::fit(&ds, &ModelConfig::A(plain_a_config(2))).unwrap();
    let err = unlearn_khop(&model, &ds, &ForgetRequest::Label(vec![outsider])).unwrap_err();
    assert!(matches!(err, cfgraph::Error::TargetMissing(_)));
    assert!(unlearn_khop(&model, &ds, &ForgetRequest::Node(vec![ds.n()])).is_err());
}

#[test]
fn verification_flags_a_perturbed_model() {
    let ds = small_homophilous(10);
    let cfg = plain_a_config(2);
    let req = sample_request(&ds, ForgetKind::Edge, 3, 2).unwrap();
    let model = Model::fit(&ds, &ModelConfig::A(cfg.clone())).unwrap();
    let out = unlearn_khop(&model, &ds, &req).unwrap();
    let reference = retrain_from_scratch(&model.config(), &ds, &req).unwrap();
    let forget = NodeSet::from_unsorted(req.forget_nodes());

    let clean = verify_exact(&out.model, &reference.model, &ds, &out.dataset, &forget).unwrap();
    assert!(clean.within_tolerance(&out.model) && clean.prob_equal);
    assert_eq!(clean.pred_agreement, 1.0);

    let Model::A(m) = &out.model else { unreachable!() };
    let mut w = m.weights().clone();
    w[(0, 0)] += 1e-3;
    let bad = Model::A(PipelineAModel::from_parts(cfg, m.input_dim(), w, m.stats().clone()).unwrap());
    let v = verify_exact(&bad, &reference.model, &ds, &out.dataset, &forget).unwrap();
    assert!((v.delta_theta - 1e-3).abs() <= 1e-12);
    assert!(!v.within_tolerance(&bad) && !v.prob_equal);
}

#[test]
fn identical_models_are_indistinguishable() {
    let ds = small_homophilous(11);
    let model = Model::fit(&ds, &ModelConfig::A(plain_a_config(2))).unwrap();
    let forget = NodeSet::from_unsorted(ds.train_nodes().as_slice()[..10].to_vec());
    let r = mia_attack(&model, &model.clone(), &ds, &forget, &ds.test_nodes()).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.distinguish_auc, 0.5);
    assert!(r.small_sample);
    assert!(matches!(
        mia_attack(&model, &model, &ds, &NodeSet::empty(), &ds.test_nodes()),
        Err(cfgraph::Error::DegenerateSets)
    ));
}

#[test]
fn audit_fills_report() {
    let ds = small_homophilous(12);
    let model = Model::fit(&ds, &ModelConfig::B(lcf_local_config())).unwrap();
    let req = sample_request(&ds, ForgetKind::Node, 3, 3).unwrap();
    let out = audit(&model, &ds, &req, Strategy::Khop).unwrap();
    let r = &out.report;
    assert_eq!(r.delta_theta, Some(0.0));
    assert_eq!(r.prob_equal, Some(true));
    assert_eq!(r.mia, Some(0.5));
    assert_eq!(r.mia_unlearned, r.mia_retrained);
    assert!(r.speedup.is_some() && r.test_delta.is_some());
    let json = serde_json::to_value(r).unwrap();
    assert!(json.get("t_A").is_some());
}

#[test]
fn requests_are_seeded() {
    let ds = small_homophilous(13);
    for kind in ForgetKind::ALL {
        let a = sample_request(&ds, kind, 5, 42).unwrap();
        assert_eq!(a, sample_request(&ds, kind, 5, 42).unwrap());
        assert_eq!(a.kind(), kind);
        a.validate(ds.n()).unwrap();
    }
    let json = serde_json::to_string(&ForgetRequest::Edge(vec![(1, 2)])).unwrap();
    assert_eq!(json, r#"{"kind":"edge","targets":[[1,2]]}"#);
}

#[test]
fn bench_reports_exact_rows() {
    let ds = small_homophilous(14);
    let grid = BenchGrid {
        kinds: vec![ForgetKind::Label, ForgetKind::Edge],
        sizes: vec![2],
        repeats: 1,
        seed: 1,
    };
    let rows = bench_unlearn(&ds, &ModelConfig::A(plain_a_config(2)), &grid).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.delta_theta == Some(0.0)));
    let mut csv = Vec::new();
    cfgraph::unlearn::write_bench_csv(&rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

#[test]
fn block_inverse_label_forget_is_close_to_retrain() {
    let ds = small_homophilous(15);
    let cfg = LcfConfig {
        use_lcf: false,
        sigma_abs: Some(1.0),
        ..lcf_local_config()
    };
    let model = fit_lcfnet(&ds, &cfg).unwrap();
    let targets = ds.train_nodes().as_slice()[..5].to_vec();
    let (fast, modified) = unlearn_label_krr_experimental(&model, &ds, &targets).unwrap();
    let retrained = fit_lcfnet(&modified, &cfg).unwrap();
    assert!(fast.head().dual.max_abs_diff(&retrained.head().dual).unwrap() <= 1e-8);
}

#[test]
fn pipeline_a_direct_update_equals_fit() {
    let ds = small_homophilous(16);
    let cfg = plain_a_config(2);
    let mut model = fit_a(&ds, &cfg).unwrap();
    let req = sample_request(&ds, ForgetKind::Feature, 4, 5).unwrap();
    let (new, s) = ds.apply_forget(&req).unwrap();
    model.unlearn_local(&ds, &new, &req, &s).unwrap();
    assert_eq!(model, fit_a(&new, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_requests_unlearn_exactly(seed in 0u64..10_000, kind in prop::sample::select(ForgetKind::ALL.to_vec()), size in 1usize..8, k in 0usize..4) {
        let ds = sbm(90, 3, 0.09, 0.02, 4, 1.0, seed);
        let req = match sample_request(&ds, kind, size, seed) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        check_exact(&ds, &ModelConfig::A(plain_a_config(k)), &req);
        if k == 0 {
            check_exact(&ds, &ModelConfig::B(lcf_local_config()), &req);
        }
    }
}
