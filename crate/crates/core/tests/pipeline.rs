//! Branch and analysis commands on a coarse grid, with every emitted file
//! parsed back.

use std::path::Path;

use ckn::io::checkpoint;
use ckn::io::commands::{branch_points, cmd_analyze, cmd_branch, cmd_symmetric_curve, Manifest};
use ckn::io::config::RunConfig;
use ckn::io::table::Table;
use ckn::symmetric::mu_fs;

fn config(dir: &Path) -> RunConfig {
    RunConfig {
        n_s: 120,
        n_phi: 20,
        theta_list: vec![5.0 / 7.0, 0.8, 1.0],
        curve_points: 61,
        symmetric_points: 16,
        out: dir.to_path_buf(),
        run_id: "pipeline".into(),
        ..RunConfig::default()
    }
}

#[test]
fn branch_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    cmd_symmetric_curve(&cfg).unwrap();
    let run = cmd_branch(&cfg).unwrap();

    let table = Table::load(&dir.path().join("branch.csv")).unwrap();
    assert_eq!(table.meta("run_id"), Some("pipeline"));
    let points = branch_points(&table).unwrap();
    assert_eq!(points, run.branch.points);
    let kappa = table.column_f64("kappa").unwrap();
    assert!(kappa.windows(2).all(|w| w[1] > w[0]));
    let m = mu_fs(2.8, 5).unwrap();
    for p in points.iter().filter(|p| p.mu > 1.02 * m) {
        assert!(p.asymmetry > 1e-3, "mu = {}: asymmetry {}", p.mu, p.asymmetry);
    }
    // theta = 1 columns collapse to (mu, Z^{(p-2)/p}).
    let lam = table.column_f64("Lambda_1.0000").unwrap();
    let j = table.column_f64("J_1.0000").unwrap();
    for (k, p) in points.iter().enumerate() {
        assert!((lam[k] - p.mu).abs() <= 1e-12 * p.mu);
        assert!((j[k] - p.critical_value(2.8)).abs() <= 1e-10 * j[k]);
    }
    // Stored checkpoints load on the run's grid.
    let id = points.iter().find_map(|p| p.field_ref.clone()).unwrap();
    let f = checkpoint::load(&dir.path().join("checkpoints").join(format!("{id}.ckpt"))).unwrap();
    assert_eq!((f.grid.n_s, f.grid.n_phi), (120, 20));

    let manifest = Manifest::load(&dir.path().join("manifest_branch.json")).unwrap();
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.stats.unwrap().eta_halvings, run.branch.stats.eta_halvings);
    let text = std::fs::read_to_string(dir.path().join("manifest_branch.json")).unwrap();
    assert!(text.contains("\"eta_halvings\""));

    let report = cmd_analyze(&cfg).unwrap();
    assert_eq!(report.thetas.len(), 3);
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let t = Table::load(&path).unwrap();
                assert_eq!(t.meta("format_version"), Some("1"));
                let again = Table::parse(&t.to_bytes(), &path).unwrap();
                assert_eq!(again, t);
            }
            Some("svg") => {
                let text = std::fs::read_to_string(&path).unwrap();
                let doc = roxmltree::Document::parse(&text).unwrap();
                let polys: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
                assert_eq!(polys.len(), 2, "{}", path.display());
                let dashed = polys
                    .iter()
                    .filter(|n| n.attribute("stroke-dasharray").is_some())
                    .count();
                assert_eq!(dashed, 1);
            }
            _ => {}
        }
    }
    assert!(dir.path().join("gn.csv").exists());
    assert!(dir.path().join("crossings.csv").exists());
}

#[test]
fn analyze_rejects_foreign_branch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let t = Table::new("other", "d=5 p=2.7", &["kappa"]);
    t.save(&dir.path().join("branch.csv")).unwrap();
    assert!(matches!(cmd_analyze(&cfg), Err(ckn::Error::Config(_))));
}
