//! Scoring an estimate up to the trivial ambiguities: global phase, per-atom
//! scaling and atom order.
//!
//! `cargo run --release --example evaluate`

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::evaluate::{evaluate, match_permutation, EvalOptions, Matching};
use prdl::linalg::complex_gaussian;
use prdl::scenario::{generate, MixingCase, ScenarioParams};

fn main() -> prdl::Result<()> {
    let params = ScenarioParams {
        case: MixingCase::Stft,
        n: 8,
        p: 4,
        i: 64,
        m1: 24,
        l: 1,
        snr_db: None,
        normalize_dict: false,
    };
    let s = generate(&params, 9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    // Truth rotated, rescaled per atom, reordered, then perturbed on its support.
    let order = [2, 0, 3, 1];
    let phase = Complex64::from_polar(1.0, 1.2);
    let mut d = s.d_true.clone();
    let mut z = s.z_true.clone();
    for (q, &p) in order.iter().enumerate() {
        let scale = Complex64::from_polar(0.5 + q as f64, 0.3 * q as f64);
        d.column_mut(p).assign(&s.d_true.column(q).mapv(|v| v * scale * phase));
        z.row_mut(p).assign(&s.z_true.row(q).mapv(|v| v / scale));
    }
    d = &d + &complex_gaussian(&mut rng, d.dim()).mapv(|v| v * 0.01);
    let noise = complex_gaussian(&mut rng, z.dim());
    z.zip_mut_with(&noise, |v, n| {
        if v.norm() > 0.0 {
            *v += n * 0.01;
        }
    });
    let x = d.dot(&z);

    let perm = match_permutation(&d, &s.d_true, Matching::Hungarian)?;
    println!("recovered order (estimated atom per true atom): {perm:?}");
    for matching in [Matching::Greedy, Matching::Hungarian] {
        let m = evaluate(&x, &d, &z, &s.x_true, &s.d_true, &s.z_true, false, EvalOptions { matching, support_threshold: 0.0 })?;
        println!(
            "{matching:?}: MNSE(D) {:.1} dB, MNSE(Z) {:.1} dB, F-measure {:.3}",
            10.0 * m.mnse_d.log10(),
            10.0 * m.mnse_z.log10(),
            m.f_measure
        );
    }
    Ok(())
}
