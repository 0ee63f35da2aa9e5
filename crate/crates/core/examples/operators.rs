//! The three mixing structures and their fast paths.
//!
//! `cargo run --release --example operators`

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::linalg::{complex_gaussian, fro_norm, re_inner};
use prdl::operators::MixingOperator;
use prdl::scenario::stft_matrix;

fn main() -> prdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, i) = (4, 8);

    let spatial = MixingOperator::spatial_only(complex_gaussian(&mut rng, (12, n)), i)?;
    let stft = MixingOperator::time_invariant(complex_gaussian(&mut rng, (12, n)), stft_matrix(i)?)?;
    let per_snapshot =
        MixingOperator::snapshot_selectors((0..i).map(|_| complex_gaussian(&mut rng, (6, n))).collect())?;
    let generic = MixingOperator::general(
        vec![complex_gaussian(&mut rng, (5, n)), complex_gaussian(&mut rng, (5, n))],
        vec![complex_gaussian(&mut rng, (i, 3)), complex_gaussian(&mut rng, (i, 3))],
    )?;

    let x = complex_gaussian(&mut rng, (n, i));
    for (name, op) in [
        ("spatial only", &spatial),
        ("spatial + STFT", &stft),
        ("per snapshot", &per_snapshot),
        ("general, K = 2", &generic),
    ] {
        let fx = op.apply(&x)?;
        // Adjoint identity <F(x), y> = <x, F*(y)> on a random y.
        let y = complex_gaussian(&mut rng, fx.dim());
        let gap = (re_inner(&fx, &y) - re_inner(&x, &op.adjoint(&y)?)).abs();
        let b = op.spectral_bounds();
        println!(
            "{name:<16} {:?} K={:<2} Y is {:?}  σmax {:.3}  σmin,nz {:.3}  adjoint gap {gap:.1e}  c(F) {:.0}",
            op.case(),
            op.diversity(),
            op.output_dim(),
            b.sigma_max,
            b.sigma_min_nonzero,
            op.structural_cost(),
        );
    }

    // The assembled matrix acts on vec(X) (column-major).
    let f = stft.assemble();
    let vx = Array2::from_shape_fn((n * i, 1), |(k, _)| x[[k % n, k / n]]);
    let fx = stft.apply(&x)?;
    let (m1, _) = stft.output_dim();
    let direct = Array2::from_shape_fn(fx.dim(), |(r, c)| f.row(c * m1 + r).dot(&vx.column(0)));
    let diff: Array2<Complex64> = &direct - &fx;
    println!("assembled vs structured apply: {:.1e}", fro_norm(&diff));
    Ok(())
}
