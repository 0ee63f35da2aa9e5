//! A small Monte Carlo experiment through the harness: every solver on a grid
//! of sparsity weights, written to CSV and a summary with a stable digest.
//!
//! `cargo run --release --example experiment [output-dir]`

use prdl::harness::{read_trials, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
seed = 5
n_trials = 3
n_inits = 2

[scenario]
case = 2
n = 8
p = 4
i = 64
m1 = 24
l = [1, 2]
snr_db = 20.0

[[solvers]]
kind = "compact"
grid = [18, 22]
config = { debias = true }

[[solvers]]
kind = "scaphase"
grid = [18]
config = { debias = true }

[[solvers]]
kind = "scprime"
grid = [18]
"#;

fn main() -> prdl::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("prdl_experiment_example"));
    let out = run_experiment(&cfg)?;
    for w in &out.warnings {
        println!("warning: {w}");
    }
    println!("{:>3} {:>9} {:>3} {:>6} {:>8} {:>10} {:>6}", "L", "solver", "k", "conv", "iters", "MNSE(D)dB", "F");
    for g in &out.summary.groups {
        println!(
            "{:>3} {:>9} {:>3} {:>6.2} {:>8.0} {:>10.2} {:>6.3}",
            g.l,
            g.solver.tag(),
            g.exponent,
            g.converged_fraction,
            g.median_iterations,
            g.median_mnse_d_db,
            g.median_f_measure
        );
    }
    let rows = read_trials(&cfg.output_dir.join("trials.csv"))?;
    println!("{} rows in {}", rows.len(), cfg.output_dir.display());
    println!("summary digest {}", out.summary_digest);
    Ok(())
}
