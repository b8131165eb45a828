use std::path::Path;
use std::process::Command;

use ckn::io::table::Table;

fn ckn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ckn"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn symmetric_curve_is_deterministic_and_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    for name in ["a", "b"] {
        let o = ckn(&[
            "symmetric-curve",
            "--theta",
            "0.75,1",
            "--out",
            out(name).to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["sym_curve_0.7500.csv", "sym_curve_1.0000.csv"] {
        let a = std::fs::read(out("a").join(file)).unwrap();
        let b = std::fs::read(out("b").join(file)).unwrap();
        assert_eq!(a, b);
    }
    let t = Table::load(&out("a").join("sym_curve_1.0000.csv")).unwrap();
    let mu = t.column_f64("mu").unwrap();
    let j = t.column_f64("J").unwrap();
    let tt = t.column_f64("t").unwrap();
    let m_fs = ckn::symmetric::mu_fs(2.8, 5).unwrap();
    let k = mu.iter().position(|m| *m == m_fs).expect("mu_FS row");
    assert!((j[k] - 15.65).abs() <= 0.01, "J = {}", j[k]);
    for (m, t) in mu.iter().zip(&tt) {
        assert!((t - m * 0.8 / 4.8).abs() <= 1e-12 * m);
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"p": 2.7, "theta_list": [0.9], "run_id": "cfg"}"#).unwrap();
    let out = dir.path().join("out");
    let o = ckn(&[
        "symmetric-curve",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "2.8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let t = Table::load(&out.join("sym_curve_0.9000.csv")).unwrap();
    assert_eq!(t.meta("run_id"), Some("cfg"));
    assert!(t.meta("params").unwrap().contains("p=2.8 "));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad_theta = ckn(&["symmetric-curve", "--theta", "0.5", "--out", out]);
    assert_eq!(bad_theta.status.code(), Some(2));
    let missing = ckn(&["symmetric-curve", "--config", "/nonexistent/run.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let no_branch = ckn(&["analyze", "--out", out]);
    assert_eq!(no_branch.status.code(), Some(4));
    let bad_grid = ckn(&["branch", "--ns", "8", "--out", out]);
    assert_eq!(bad_grid.status.code(), Some(2));
}

#[test]
fn gn_limit_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ckn(&["gn-limit", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let t = Table::load(&dir.path().join("gn.csv")).unwrap();
    let j = t.column_f64("J_inf").unwrap()[0];
    let l = t.column_f64("Lambda_GN").unwrap()[0];
    assert!(j > 0.0 && l > 0.0);
    assert!(Path::new(&dir.path().join("gn_profile.csv")).exists());
}
