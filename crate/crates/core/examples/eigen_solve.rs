//! Lowest eigenpair of `-Delta - kappa V` with the soliton's own potential:
//! the eigenvalue is `-mu` up to discretization error.

use std::sync::Arc;

use ckn::eigensolver::{lowest_eigenpair, DEFAULT_EIGEN_TOL};
use ckn::fixedpoint::{critical_value, potential_from};
use ckn::model::{build_grid, MeasureMode, ProblemParams};
use ckn::symmetric::{mu_fs, soliton};

fn main() -> ckn::Result<()> {
    let p = 2.8;
    let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface)?;
    for n_s in [100, 200, 400] {
        let grid = Arc::new(build_grid(10.0, n_s, 24, params)?);
        for mu in [2.0, mu_fs(p, 5)?, 8.0] {
            let u = soliton(mu, p)?.to_field(Arc::clone(&grid));
            let kappa = critical_value(&u);
            let res = lowest_eigenpair(kappa, &potential_from(&u)?, DEFAULT_EIGEN_TOL)?;
            println!(
                "n_s {n_s:4}  mu {mu:7.4}  lambda {:10.6}  rel. error {:.2e}  ({} iterations)",
                res.lambda,
                (res.lambda + mu).abs() / mu,
                res.iterations
            );
        }
    }
    Ok(())
}
