//! Reproduction script for the citation benchmarks. Needs user-supplied data
//! in the directory layout read by `load_dataset`:
//!
//!   <root>/cora, <root>/citeseer, <root>/pubmed           fixed splits
//!   <root>/<name>-shchur-123 ... <root>/<name>-shchur-127  random splits
//!
//! Each dataset gets the default Pipeline A grid, selected on validation.
//!
//! cargo run --release --example reproduce_citation -- <root>

use std::path::Path;

use cfgraph::data::{evaluate, load_dataset, Pipeline};
use cfgraph::sweep::{run_sweep, SweepConfig};

const FIXED: [(&str, f64); 3] = [("cora", 84.00), ("citeseer", 73.70), ("pubmed", 80.70)];
const RANDOM: [(&str, f64, f64); 3] = [("cora", 80.72, 2.21), ("citeseer", 71.68, 1.11), ("pubmed", 76.82, 3.21)];

fn test_accuracy(dir: &Path) -> cfgraph::Result<f64> {
    let ds = load_dataset(dir)?;
    let (model, _) = run_sweep(&ds, &SweepConfig::default(), Pipeline::A)?;
    Ok(100.0 * evaluate(&model.predict(&ds)?, &ds, &ds.test)?)
}

fn main() -> cfgraph::Result<()> {
    let Some(root) = std::env::args().nth(1) else {
        eprintln!("usage: reproduce_citation <dataset-root>");
        std::process::exit(2);
    };
    let root = Path::new(&root);
    for (name, target) in FIXED {
        let dir = root.join(name);
        if dir.is_dir() {
            let acc = test_accuracy(&dir)?;
            let ok = (acc - target).abs() <= 0.5;
            println!("{name:<9} fixed split   {acc:6.2}  target {target:.2} +/- 0.50  {}", if ok { "ok" } else { "off" });
        }
    }
    for (name, mean, std) in RANDOM {
        let dirs: Vec<_> = (123..=127).map(|s| root.join(format!("{name}-shchur-{s}"))).collect();
        if dirs.iter().all(|d| d.is_dir()) {
            let accs = dirs.iter().map(|d| test_accuracy(d)).collect::<cfgraph::Result<Vec<_>>>()?;
            let m = accs.iter().sum::<f64>() / accs.len() as f64;
            let ok = (m - mean).abs() <= std;
            println!("{name:<9} 5 splits mean {m:6.2}  band {mean:.2} +/- {std:.2}  {}", if ok { "ok" } else { "off" });
        }
    }
    Ok(())
}
