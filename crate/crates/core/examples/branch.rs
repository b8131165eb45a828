//! Full non-symmetric branch at `d = 5`, `p = 2.8`, with the pitchfork
//! exponent near the bifurcation.
//!
//! `cargo run --release --example branch -- [p] [n_s] [n_phi]`

use std::sync::Arc;

use ckn::continuation::{build_branch, pitchfork_exponent, BranchOptions};
use ckn::io::checkpoint::CheckpointStore;
use ckn::model::{build_grid, MeasureMode, ProblemParams};
use ckn::symmetric::mu_fs;

fn main() -> ckn::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let p = args.first().copied().unwrap_or(2.8);
    let n_s = args.get(1).map_or(200, |v| *v as usize);
    let n_phi = args.get(2).map_or(32, |v| *v as usize);
    let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface)?;
    let grid = Arc::new(build_grid(8.0, n_s, n_phi, params)?);
    let mut store = CheckpointStore::in_memory();
    let branch = build_branch(&grid, &BranchOptions::default(), &mut store)?;
    let m = mu_fs(p, 5)?;

    println!("{:>10} {:>10} {:>12} {:>12}", "kappa", "mu", "asymmetry", "Q");
    for pt in branch.non_symmetric().step_by(10) {
        println!(
            "{:10.5} {:10.5} {:12.4e} {:12.6}",
            pt.kappa,
            pt.mu,
            pt.asymmetry,
            pt.critical_value(p)
        );
    }
    if let Some(t) = &branch.terminal {
        println!(
            "terminal point: mu = {:.5} ({:+.2}% from mu_FS), asymmetry {:.2e}",
            t.mu,
            100.0 * (t.mu / m - 1.0),
            t.asymmetry
        );
    }
    if let Some(e) = pitchfork_exponent(&branch.points, m, 8) {
        println!("asymmetry^2 ~ (mu - mu_FS)^{e:.3}");
    }
    println!("{:?}", branch.stats);
    Ok(())
}
