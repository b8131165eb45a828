//! Crossing of the symmetric and non-symmetric curves at `theta = 5/7`:
//! present for `p = 2.78`, absent for `p = 2.7`.

use std::sync::Arc;

use ckn::analysis::{detect_crossing, map_points_to_theta, min_envelope};
use ckn::continuation::{build_branch, BranchOptions, BranchPoint};
use ckn::io::checkpoint::CheckpointStore;
use ckn::model::{build_grid, MeasureMode, ProblemParams};

fn main() -> ckn::Result<()> {
    let theta = 5.0 / 7.0;
    for p in [2.78, 2.7] {
        let params = ProblemParams::new(5, p, 1.0, MeasureMode::Surface)?;
        let grid = Arc::new(build_grid(8.0, 200, 32, params)?);
        let branch = build_branch(&grid, &BranchOptions::default(), &mut CheckpointStore::in_memory())?;
        let (sym, non): (Vec<BranchPoint>, Vec<BranchPoint>) = branch.points.iter().cloned().partition(|p| p.symmetric);
        let sym = map_points_to_theta(&sym, &params, theta, "symmetric")?;
        let non = map_points_to_theta(&non, &params, theta, "non-symmetric")?;
        println!("p = {p}: Lambda non-monotone along the branch: {}", non.non_monotone);
        match detect_crossing(&sym, &non)? {
            Some(c) => {
                println!(
                    "  Lambda1 = {:.5}, mu1* = {:.4}, mu1 = {:.4}, J = {:.5}",
                    c.lambda1, c.mu1_star, c.mu1, c.j
                );
                let grid: Vec<f64> = (0..200).map(|k| c.lambda1 - 0.2 + 0.4 * k as f64 / 199.0).collect();
                let env = min_envelope(&[sym, non], &grid)?;
                println!("  minimizer switches at Lambda = {:?}", env.switches);
            }
            None => println!("  no crossing"),
        }
    }
    Ok(())
}
