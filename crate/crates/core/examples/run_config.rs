//! Driving the command layer from a JSON configuration, as the `ckn`
//! binary does.

use ckn::io::commands::{cmd_gn_limit, cmd_symmetric_curve};
use ckn::io::config::RunConfig;
use ckn::io::table::Table;

fn main() -> ckn::Result<()> {
    let mut cfg = RunConfig::from_json(r#"{"p": 2.8, "theta_list": [0.75, 1.0], "run_id": "example"}"#)?;
    cfg.out = std::env::temp_dir().join("ckn_run_config");
    cfg.validate()?;
    println!("{}", cfg.to_json());
    for path in cmd_symmetric_curve(&cfg)? {
        let t = Table::load(&path)?;
        println!("{}: {} rows, columns {:?}", path.display(), t.rows.len(), t.columns);
    }
    let (gn, files) = cmd_gn_limit(&cfg)?;
    println!(
        "J_inf = {:.6}, Lambda_GN = {:.6}; wrote {files:?}",
        gn.j_inf, gn.threshold.lambda_gn
    );
    Ok(())
}
