//! Synthetic scenarios for the three mixing cases, the STFT matrix, and the
//! JSON round trip used by the CLI.
//!
//! `cargo run --release --example scenarios`

use prdl::linalg::fro_norm;
use prdl::scenario::{generate, stft_matrix, MixingCase, Scenario, ScenarioParams};

fn main() -> prdl::Result<()> {
    let b = stft_matrix(16)?;
    println!("STFT matrix for I = 16: {:?} (5 frames × 16 bins)", b.dim());

    for case in [MixingCase::Spatial, MixingCase::Stft, MixingCase::PerSnapshot] {
        let params = ScenarioParams {
            case,
            n: 8,
            p: 4,
            i: 128,
            m1: 32,
            l: 2,
            snr_db: Some(15.0),
            normalize_dict: true,
        };
        let s = generate(&params, 42)?;
        let nnz = s.z_true.iter().filter(|v| v.norm() > 0.0).count();
        println!(
            "case {}: Y {:?}, {nnz} nonzero codes, SNR target {:?} dB, realized {:.2} dB",
            case.number(),
            s.inst.y().dim(),
            s.snr_db(),
            s.realized_snr_db()
        );
    }

    let params = ScenarioParams {
        case: MixingCase::Stft,
        n: 4,
        p: 2,
        i: 16,
        m1: 8,
        l: 1,
        snr_db: None,
        normalize_dict: false,
    };
    let s = generate(&params, 1)?;
    let back = Scenario::from_json(&s.to_json()?)?;
    println!(
        "JSON round trip: ‖ΔD‖ = {:.1e}, ‖ΔY‖ = {:.1e}",
        fro_norm(&(&back.d_true - &s.d_true)),
        (back.inst.y() - s.inst.y()).iter().map(|v| v * v).sum::<f64>().sqrt()
    );
    Ok(())
}
