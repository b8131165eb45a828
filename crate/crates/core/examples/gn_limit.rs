//! Euclidean ground state by shooting, the limit level `J_inf` and the
//! threshold `Lambda_GN`.

use ckn::analysis::lambda_gn;
use ckn::gn::{j_infinity_of, radial_ground_state};
use ckn::model::MeasureMode;

fn main() -> ckn::Result<()> {
    let (d, p) = (5, 2.8);
    let profile = radial_ground_state(p, d, 1e-12)?;
    println!("u(0) = {:.8}, {} radial nodes", profile.u0, profile.r_nodes.len());
    println!("Pohozaev residuals {:?}", profile.pohozaev_residuals());
    for mode in [MeasureMode::Surface, MeasureMode::Probability] {
        let j_inf = j_infinity_of(&profile, mode);
        let gn = lambda_gn(p, d, mode, j_inf)?;
        println!(
            "{mode:>11}: J_inf = {j_inf:.8}, Lambda_GN = {:.8} at mu = {:.6} (residual {:.1e})",
            gn.lambda_gn, gn.mu, gn.residual
        );
    }
    Ok(())
}
