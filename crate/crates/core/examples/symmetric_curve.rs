//! Closed-form symmetric solitons and their curves in the `(Lambda, J)` plane.

use std::sync::Arc;

use ckn::analysis::{lambda_fs, symmetric_theta_curve};
use ckn::model::{build_grid, evaluate_norms, theta_critical, MeasureMode, ProblemParams};
use ckn::symmetric::{mu_fs, soliton, soliton_norms};

fn main() -> ckn::Result<()> {
    let (d, p) = (5, 2.8);
    let params = ProblemParams::new(d, p, 1.0, MeasureMode::Surface)?;
    let m = mu_fs(p, d)?;
    let big_theta = theta_critical(p, d)?;
    println!("mu_FS = {m:.6}, Theta = {big_theta:.6}");

    // Critical value at the threshold, exact and by quadrature.
    let exact = soliton_norms(m, p, d, MeasureMode::Surface)?;
    let grid = Arc::new(build_grid(10.0, 400, 48, params)?);
    let u = soliton(m, p)?.to_field(grid);
    let quad = evaluate_norms(&u)?;
    println!(
        "Q at mu_FS: closed form {:.6}, quadrature {:.6}",
        exact.z.powf(1.0 - 2.0 / p),
        quad.z.powf(1.0 - 2.0 / p)
    );

    for theta in [big_theta, 0.8, 1.0] {
        let curve = symmetric_theta_curve(&[0.5 * m, m, 2.0 * m], theta, &params)?;
        println!("theta = {theta:.4}, Lambda_FS = {:.6}", lambda_fs(p, theta, d)?);
        for pt in &curve.points {
            println!("  mu {:8.4}  Lambda {:8.4}  J {:8.4}", pt.mu, pt.lambda, pt.j);
        }
    }
    Ok(())
}
