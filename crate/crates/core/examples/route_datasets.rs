//! Routes a family of synthetic graphs, from strongly assortative to strongly
//! disassortative, and shows how the choice moves with the threshold.

use cfgraph::data::{generate_sbm, Pipeline, SbmSpec};
use cfgraph::router::{route, tau_sweep, DEFAULT_TAU};

fn main() -> cfgraph::Result<()> {
    let total = 0.03;
    let mut datasets = Vec::new();
    for within in [0.9, 0.7, 0.5, 0.3, 0.1] {
        let mut ds = generate_sbm(&SbmSpec {
            n: 1500,
            num_classes: 3,
            p_in: within * total,
            p_out: (1.0 - within) * total,
            feature_dim: 8,
            class_mean_separation: 1.0,
            seed: 1,
        })?;
        ds.name = format!("sbm-within-{within}");
        datasets.push(ds);
    }

    println!("tau = {DEFAULT_TAU}");
    for ds in &datasets {
        let d = route(ds, DEFAULT_TAU)?;
        println!("  {:<18} h_adj {:+.3} -> {:?}", ds.name, d.h_adj.unwrap_or(f64::NAN), d.pipeline);
    }

    let refs: Vec<_> = datasets.iter().collect();
    let taus = [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75];
    println!("\nthreshold sweep (datasets sent to Pipeline B)");
    for row in tau_sweep(&refs, &taus)? {
        println!("  tau {:+.2}: {:?}", row.tau, row.routed_to(Pipeline::B));
    }

    // A stored override is always honored.
    let mut forced = datasets[0].clone();
    forced.pipeline_override = Some(Pipeline::B);
    let d = route(&forced, DEFAULT_TAU)?;
    println!("\noverride: {:?} ({:?})", d.pipeline, d.reason);
    Ok(())
}
