//! Upper bounds on the sparsity weights and the grid built from them.
//!
//! `cargo run --release --example tuning`

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::compact;
use prdl::linalg::complex_gaussian;
use prdl::problem::Iterate;
use prdl::scenario::{generate, MixingCase, ScenarioParams};
use prdl::{scaphase, tuning};

fn main() -> prdl::Result<()> {
    for case in [MixingCase::Spatial, MixingCase::Stft, MixingCase::PerSnapshot] {
        let params = ScenarioParams {
            case,
            n: 8,
            p: 4,
            i: 64,
            m1: 24,
            l: 1,
            snr_db: Some(15.0),
            normalize_dict: false,
        };
        let s = generate(&params, 7)?;
        let inst = s.inst.clone().with_mu(tuning::mu_default(&s.inst));
        let lam = tuning::lambda_max(&inst);
        let rho = tuning::rho_max(&inst)?;
        println!(
            "case {}: λ_max {lam:.3} (general {:.3})  μ {:.3}  ρ_max {rho:.3} (general {:.3})",
            case.number(),
            tuning::lambda_max_general(&inst),
            inst.mu,
            tuning::rho_max_general(&inst)?
        );
        println!("  λ grid k = 0, 4, 8, 12: {:?}", tuning::grid(lam, &[0, 4, 8, 12]));

        // At λ_max, Z = 0 is stationary for any feasible dictionary.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut d = complex_gaussian(&mut rng, (8, 4));
        prdl::linalg::normalize_columns(&mut d);
        let zero = Array2::<Complex64>::zeros((4, 64));
        let at_max = inst.clone().with_lambda(lam);
        let it = Iterate::compact(&at_max, d.clone(), zero.clone())?;
        println!("  compact residuals at λ_max, Z = 0: {:?}", compact::stationarity_residual(&at_max, &it));

        // At ρ_max, Z = 0 with the matching signal is stationary too.
        let at_max = inst.with_rho(rho);
        let target = at_max.y().mapv(|v| Complex64::new(v, 0.0));
        let x = tuning::zero_code_signal(&at_max, &target)?;
        let it = Iterate::conventional(&at_max, x, d, zero)?.with_target(target)?;
        println!("  conventional residuals at ρ_max, Z = 0: {:?}", scaphase::stationarity_residual(&at_max, &it));
    }
    Ok(())
}
