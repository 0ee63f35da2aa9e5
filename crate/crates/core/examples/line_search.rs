//! Exact step size along a compact-SCAphase direction: the surrogate is a
//! quartic in γ, minimized in closed form on [0, 1].
//!
//! `cargo run --release --example line_search`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::compact;
use prdl::problem::Iterate;
use prdl::scenario::{generate, MixingCase, ScenarioParams};
use prdl::solver::Init;
use prdl::tuning;

fn main() -> prdl::Result<()> {
    let params = ScenarioParams {
        case: MixingCase::Stft,
        n: 8,
        p: 4,
        i: 64,
        m1: 24,
        l: 1,
        snr_db: Some(20.0),
        normalize_dict: false,
    };
    let s = generate(&params, 3)?;
    let lambda = tuning::lambda_max(&s.inst) * 0.75f64.powi(8);
    let inst = s.inst.with_lambda(lambda);
    let init = Init::random_compact(&inst, &mut ChaCha8Rng::seed_from_u64(4), None);
    let it = Iterate::compact(&inst, init.d, init.z)?;

    let dd = compact::direction_d(&inst, &it, 1e-9)?;
    let dz = compact::direction_z(&inst, &it);
    let gamma = compact::line_search(&inst, &it, &dd, &dz)?;
    println!("exact step γ = {gamma:.6}");
    for g in [0.0, 0.25, 0.5, 0.75, 1.0, gamma] {
        println!("  surrogate at γ = {g:.4}: {:.6}", compact::line_search_objective(&inst, &it, &dd, &dz, g));
    }
    let coarse = (0..=1000)
        .map(|k| compact::line_search_objective(&inst, &it, &dd, &dz, k as f64 / 1000.0))
        .fold(f64::INFINITY, f64::min);
    println!("best of a 1001-point grid: {coarse:.6}");
    Ok(())
}
