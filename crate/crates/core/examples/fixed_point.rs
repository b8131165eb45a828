//! The alternating eigen-solve / potential-update iteration at fixed `kappa`,
//! started from a tilted soliton. The eigenvalue sequence never increases.

use std::sync::Arc;

use ckn::fixedpoint::{critical_value, eqmu_residual, potential_from, roothan_solve, FixedPointOptions};
use ckn::model::{build_grid, Field, MeasureMode, ProblemParams};
use ckn::symmetric::{mu_fs, soliton};

fn main() -> ckn::Result<()> {
    let p = 2.8;
    let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface)?;
    let grid = Arc::new(build_grid(8.0, 160, 24, params)?);
    let mu0 = 1.3 * mu_fs(p, 5)?;
    let sol = soliton(mu0, p)?;
    let tilted = Field::from_fn(Arc::clone(&grid), |s, phi| sol.value(s) * (1.0 + 0.3 * phi.cos()));
    let kappa = critical_value(&sol.to_field(Arc::clone(&grid)));

    let res = roothan_solve(kappa, &potential_from(&tilted)?, &FixedPointOptions::default())?;
    for (k, l) in res.lambda_history.iter().enumerate().take(8) {
        println!("iteration {k:2}: lambda = {l:.12}");
    }
    println!(
        "{} iterations ({} accelerated), mu = {:.6}, asymmetry = {:.4}",
        res.iterations,
        res.accelerated,
        res.mu,
        res.asymmetry()
    );
    println!(
        "critical value {:.6} (kappa {kappa:.6}), equation residual {:.2e}",
        res.critical_value(),
        eqmu_residual(&res.u_eq, res.mu)
    );
    Ok(())
}
