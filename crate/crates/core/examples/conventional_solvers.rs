//! SCAphase against the block-coordinate SC-PRIME baseline from the same
//! starting point and the same ρ.
//!
//! `cargo run --release --example conventional_solvers`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::scenario::{generate, MixingCase, ScenarioParams};
use prdl::scprime::StepBounds;
use prdl::solver::{Init, SolverConfig, SolverReport};
use prdl::{scaphase, scprime, tuning};

fn at(rep: &SolverReport, iteration: usize) -> f64 {
    rep.trace.iter().take_while(|r| r.iteration <= iteration).last().map_or(f64::NAN, |r| r.objective)
}

fn main() -> prdl::Result<()> {
    let params = ScenarioParams {
        case: MixingCase::Spatial,
        n: 16,
        p: 8,
        i: 256,
        m1: 64,
        l: 1,
        snr_db: Some(15.0),
        normalize_dict: false,
    };
    let s = generate(&params, 21)?;
    let mu = tuning::mu_default(&s.inst);
    let inst = s.inst.clone().with_mu(mu);
    let rho = tuning::rho_max(&inst)? * 0.75f64.powi(14);
    let inst = inst.with_rho(rho);
    println!("μ = {mu:.4}, ρ = {rho:.4}");

    let init = Init::random_conventional(&inst, &mut ChaCha8Rng::seed_from_u64(5), None);
    let cfg = SolverConfig::default();
    let sca = scaphase::run(&inst, &init, &cfg)?;
    let prime = scprime::run(&inst, &init, &cfg, StepBounds::Rough)?;
    let (r_d, r_z, r_x) = scaphase::stationarity_residual(&inst, &{
        prdl::problem::Iterate::conventional(&inst, sca.x.clone().unwrap(), sca.d.clone(), sca.z.clone())?
    });
    println!(
        "SCAphase: {} iterations, converged {}, residuals (D {r_d:.1e}, Z {r_z:.1e}, X {r_x:.1e})",
        sca.iterations, sca.converged
    );
    println!("SC-PRIME: {} iterations, converged {}", prime.iterations, prime.converged);
    println!("{:>10} {:>14} {:>14}", "iteration", "SCAphase", "SC-PRIME");
    for k in [0, 10, 50, 100, 200, 500, sca.iterations, 2000] {
        println!("{k:>10} {:>14.4} {:>14.4}", at(&sca, k), at(&prime, k));
    }
    Ok(())
}
