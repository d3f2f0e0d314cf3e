use cfgraph::data::{generate_sbm, Pipeline, SbmSpec};
use cfgraph::router::{route, DEFAULT_TAU};
use cfgraph::sweep::{run_sweep, SweepConfig};

const GRID: &str = r#"
[pipeline_a]
k = [1, 2, 3]
x_src = ["row-normalized", "raw"]
alpha = [0.01, 0.1, 1.0, 10.0]
epsilon = [0.0, 0.1]
cns = [false, true]

[pipeline_b]
k = [1, 2]
phi = ["tanh"]
lambda = [0.1, 1.0]
sigma_scale = [0.5, 1.0]
lambda_prime = [0.01, 0.1]
whiten = [true]
"#;

fn main() -> cfgraph::Result<()> {
    let grid = SweepConfig::from_toml(GRID)?;
    for (name, p_in, p_out) in [("assortative", 0.008, 0.001), ("disassortative", 0.001, 0.008)] {
        let ds = generate_sbm(&SbmSpec {
            n: 1500,
            num_classes: 3,
            p_in,
            p_out,
            feature_dim: 8,
            class_mean_separation: 0.8,
            seed: 9,
        })?;
        let decision = route(&ds, DEFAULT_TAU)?;
        let (_, report) = run_sweep(&ds, &grid, decision.pipeline)?;
        let best = &report.cells[report.selected];
        println!(
            "{name}: h_adj {:+.3}, routed to {:?}, {} cells",
            decision.h_adj.unwrap_or(f64::NAN),
            decision.pipeline,
            report.cells.len()
        );
        println!("  selected on validation {:.4}, test {:.4}", best.val.unwrap_or(f64::NAN), best.test.unwrap_or(f64::NAN));
        println!("  {}", serde_json::to_string(&best.config)?);
        // The other pipeline, for comparison.
        let other = if decision.pipeline == Pipeline::A { Pipeline::B } else { Pipeline::A };
        let (_, alt) = run_sweep(&ds, &grid, other)?;
        let alt_best = &alt.cells[alt.selected];
        println!("  best {other:?} cell: validation {:.4}, test {:.4}", alt_best.val.unwrap_or(f64::NAN), alt_best.test.unwrap_or(f64::NAN));
    }
    Ok(())
}
