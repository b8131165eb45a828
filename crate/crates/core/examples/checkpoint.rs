//! Binary field checkpoints: save, reload and compare bit for bit.

use std::sync::Arc;

use ckn::io::checkpoint::{encode, load, save};
use ckn::model::{build_grid, Field, MeasureMode, ProblemParams};

fn main() -> ckn::Result<()> {
    let params = ProblemParams::new(5, 2.8, 1.0, MeasureMode::Surface)?;
    let grid = Arc::new(build_grid(8.0, 64, 16, params)?);
    let u = Field::from_fn(grid, |s, phi| (1.0 + 0.2 * phi.cos()) / s.cosh());
    let path = std::env::temp_dir().join("ckn_example.ckpt");
    save(&path, &u)?;
    let back = load(&path)?;
    let same = u
        .values
        .iter()
        .zip(&back.values)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "{} bytes written to {}, bitwise identical: {same}",
        encode(&u).len(),
        path.display()
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
