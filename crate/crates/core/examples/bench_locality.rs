//! Times K-hop unlearning against a full re-solve and against retraining as
//! the forget set grows, and writes the curve as CSV.
//!
//! cargo run --release --example bench_locality -- [n] [out.csv]

use cfgraph::data::{generate_sbm, SbmSpec};
use cfgraph::model::ModelConfig;
use cfgraph::pipeline_a::PipelineAConfig;
use cfgraph::unlearn::{bench_unlearn, write_bench_csv, BenchGrid};

fn main() -> cfgraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(20_000), |s| s.parse()).map_err(|e| cfgraph::Error::Parse(format!("{e}")))?;
    let out = args.next();

    // Mean degree about five, independent of n.
    let ds = generate_sbm(&SbmSpec {
        n,
        num_classes: 4,
        p_in: 15.0 / n as f64,
        p_out: 5.0 / (3.0 * n as f64),
        feature_dim: 16,
        class_mean_separation: 1.0,
        seed: 7,
    })?;
    let grid = BenchGrid {
        sizes: vec![1, 10, 100, 1000],
        ..Default::default()
    };
    let rows = bench_unlearn(&ds, &ModelConfig::A(PipelineAConfig::default()), &grid)?;

    println!("{:<9} {:>5} {:>9} {:>10} {:>10} {:>10} {:>8}", "kind", "|F|", "|N_L(S)|", "khop ms", "full ms", "retrain ms", "speedup");
    for r in &rows {
        println!(
            "{:<9} {:>5} {:>9} {:>10.3} {:>10.3} {:>10.3} {:>8.1}",
            r.kind.name(),
            r.forget_size,
            r.neighborhood.unwrap_or(0),
            1e3 * r.t_khop.unwrap_or(f64::NAN),
            1e3 * r.t_full,
            1e3 * r.t_retrain,
            r.speedup.unwrap_or(f64::NAN)
        );
    }
    if let Some(path) = out {
        write_bench_csv(&rows, std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
