use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prdl::harness::{estimate_complexity, run_experiment, ExperimentConfig, SolverKind};
use prdl::scenario::{generate, MixingCase, Scenario, ScenarioParams};
use prdl::tuning;

#[derive(Parser)]
#[command(name = "prdl", version, about = "Dictionary learning from magnitude-only measurements")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        inits: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a synthetic scenario and write it as JSON.
    Gen {
        /// Mixing case: 1 (spatial), 2 (spatial + STFT) or 3 (per snapshot).
        case: u8,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        p: usize,
        /// Snapshots (default 16·N).
        #[arg(long)]
        i: Option<usize>,
        /// Spatial measurements (default 4·N).
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// SNR in dB; omit or pass `inf` for noiseless data.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        normalize_dict: bool,
        #[arg(long)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print λ_max, ρ_max and the default μ of a scenario.
    Bounds {
        scenario: PathBuf,
        /// μ as a multiple of σ²_min,nz(F).
        #[arg(long, default_value_t = 1.0)]
        mu_scale: f64,
    },
    /// Print dominant per-iteration flop counts of a solver on a scenario.
    Complexity { solver: String, scenario: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> prdl::Result<()> {
    match cli.cmd {
        Command::Run { config, seed, trials, inits, out, threads } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if let Some(k) = inits {
                cfg.n_inits = k;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let res = run_experiment(&cfg)?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            println!("{:>4} {:>9} {:>3} {:>9} {:>8} {:>10} {:>10} {:>6}",
                "L", "solver", "k", "conv", "iters", "MNSE(D)dB", "MNSE(Z)dB", "F");
            for g in &res.summary.groups {
                println!(
                    "{:>4} {:>9} {:>3} {:>9.2} {:>8.0} {:>10.2} {:>10.2} {:>6.3}",
                    g.l, g.solver.tag(), g.exponent, g.converged_fraction, g.median_iterations,
                    g.median_mnse_d_db, g.median_mnse_z_db, g.median_f_measure
                );
            }
            println!("wrote {} rows to {}", res.rows.len(), cfg.output_dir.display());
            println!("summary sha256 {}", res.summary_digest);
        }
        Command::Gen { case, n, p, i, m1, l, snr, normalize_dict, seed, out } => {
            let params = ScenarioParams {
                case: MixingCase::try_from(case)?,
                n,
                p,
                i: i.unwrap_or(16 * n),
                m1: m1.unwrap_or(4 * n),
                l,
                snr_db: snr.filter(|s| s.is_finite()),
                normalize_dict,
            };
            let s = generate(&params, seed)?;
            s.save(&out)?;
            let (m1, m2) = s.inst.op().output_dim();
            println!("wrote case {case} scenario (Y is {m1}×{m2}) to {}", out.display());
        }
        Command::Bounds { scenario, mu_scale } => {
            let s = Scenario::load(&scenario)?;
            let mu = mu_scale * tuning::mu_default(&s.inst);
            let inst = s.inst.with_mu(mu);
            println!("lambda_max          {:.6e}", tuning::lambda_max(&inst));
            println!("lambda_max_general  {:.6e}", tuning::lambda_max_general(&inst));
            println!("mu                  {:.6e}", inst.mu);
            println!("rho_max             {:.6e}", tuning::rho_max(&inst)?);
            println!("rho_max_general     {:.6e}", tuning::rho_max_general(&inst)?);
        }
        Command::Complexity { solver, scenario } => {
            let kind: SolverKind = solver.parse()?;
            let s = Scenario::load(&scenario)?;
            let c = estimate_complexity(kind, &s.inst);
            println!("solver            {kind}");
            println!("c(F)              {:.6e} (structural {:.6e})", c.c_f, c.c_f_structural);
            println!("gradient          {:.6e}", c.gradient);
            println!("partial Hessians  {:.6e}", c.partial_hessians);
            println!("line search       {:.6e}", c.line_search);
            println!("total             {:.6e}", c.total);
        }
    }
    Ok(())
}
