//! Ball-constrained least squares through the secular equation, including the
//! Kronecker shortcut used by the compact atom update.
//!
//! `cargo run --release --example secular`

use ndarray::Array1;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use prdl::linalg::{complex_gaussian, kron, vec_norm, vectorize, Svd};
use prdl::secular::{
    ball_ls_objective, kkt_residual, psi, solve_ball_ls, solve_ball_ls_kron, solve_secular,
    SecularSpectrum, DEFAULT_SECULAR_TOL,
};

fn main() -> prdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let spec = SecularSpectrum::new(
        vec![0.5, 1.0, 2.0, 4.0],
        [3.0, 1.0, 2.0, 5.0].iter().map(|&c| Complex64::new(c, 0.0)).collect(),
    )?;
    let root = solve_secular(&spec, DEFAULT_SECULAR_TOL)?;
    println!(
        "ψ(0) = {:.3}, root ν = {:.10}, ψ(ν) − 1 = {:.1e}, {} rational steps",
        psi(&spec, 0.0)?.0,
        root.nu,
        psi(&spec, root.nu)?.0 - 1.0,
        root.iterations
    );

    let h = complex_gaussian(&mut rng, (10, 4));
    let y: Array1<Complex64> = complex_gaussian(&mut rng, (10, 1)).column(0).mapv(|v| v * 4.0);
    let sol = solve_ball_ls(&h, y.view(), DEFAULT_SECULAR_TOL)?;
    println!(
        "ball LS: ‖d‖ = {:.12}, ν = {:.4}, objective {:.6}, KKT residual {:.1e}",
        vec_norm(sol.d.view()),
        sol.nu,
        ball_ls_objective(&h, y.view(), sol.d.view()),
        kkt_residual(&h, y.view(), &sol)
    );

    // H = (Bᵀz) ⊗ A without forming H or taking its SVD.
    let a = complex_gaussian(&mut rng, (6, 3));
    let b = complex_gaussian(&mut rng, (5, 7));
    let z = complex_gaussian(&mut rng, (5, 1));
    let y_p = complex_gaussian(&mut rng, (6, 7)).mapv(|v| v * 3.0);
    let svd = Svd::new(&a).truncated(6, 3);
    let fast = solve_ball_ls_kron(&svd, &b, z.column(0), &y_p, 1e-12)?.expect("Bᵀz ≠ 0");
    let w = b.t().dot(&z);
    let slow = solve_ball_ls(&kron(&w, &a), vectorize(&y_p).view(), 1e-12)?;
    println!("Kronecker path vs explicit H: ‖Δd‖ = {:.1e}", vec_norm((&fast.d - &slow.d).view()));
    Ok(())
}
