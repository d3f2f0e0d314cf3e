//! Generates a stochastic block model dataset, writes it in the on-disk
//! layout, and loads it back.
//!
//! cargo run --example generate_synthetic -- [out-dir]

use cfgraph::data::{generate_sbm, load_dataset, save_dataset, FeatureFormat, SbmSpec};
use cfgraph::router::train_homophily;

fn main() -> cfgraph::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cfgraph-sbm"));
    let spec = SbmSpec {
        n: 2000,
        num_classes: 4,
        p_in: 0.01,
        p_out: 0.001,
        feature_dim: 16,
        class_mean_separation: 1.0,
        seed: 7,
    };
    let ds = generate_sbm(&spec)?;
    save_dataset(&ds, &out, FeatureFormat::Binary)?;
    let back = load_dataset(&out)?;
    assert_eq!(back, ds);

    let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
    println!("wrote {} to {}", ds.name, out.display());
    println!("  nodes {}  edges {}  features {}", ds.n(), ds.graph.num_edges(), ds.features.cols());
    println!("  train/val/test {}/{}/{}", count(&ds.train), count(&ds.val), count(&ds.test));
    println!("  adjusted homophily {:.3}", train_homophily(&ds)?.unwrap_or(f64::NAN));
    Ok(())
}
