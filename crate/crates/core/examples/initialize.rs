//! Saddle descent from the perturbed soliton: symmetry breaks above the
//! threshold and the descent falls back to the soliton below it.

use std::sync::Arc;

use ckn::continuation::{default_eps, initialize, InitOptions};
use ckn::model::{build_grid, MeasureMode, ProblemParams};
use ckn::symmetric::mu_fs;
use ckn::Error;

fn main() -> ckn::Result<()> {
    let p = 2.8;
    let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface)?;
    let grid = Arc::new(build_grid(8.0, 160, 24, params)?);
    let m = mu_fs(p, 5)?;
    for factor in [1.2, 0.9] {
        let mu0 = factor * m;
        match initialize(mu0, default_eps(mu0, &grid)?, &grid, &InitOptions::default()) {
            Ok(init) => println!(
                "mu0 = {mu0:.4}: asymmetry {:.4}, critical value {:.6} < symmetric {:.6} ({} descent iterations)",
                init.point.asymmetry,
                init.result.critical_value(),
                init.symmetric_value,
                init.descent_iterations
            ),
            Err(Error::FellBackToSymmetric { asymmetry }) => {
                println!("mu0 = {mu0:.4}: fell back to the soliton (asymmetry {asymmetry:.2e})")
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
