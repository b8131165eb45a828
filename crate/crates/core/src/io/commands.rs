//! The subcommands of the `ckn` driver. Each one reads a [`RunConfig`],
//! writes its files under `config.out` and returns what it computed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    detect_crossing, geometric_grid, lambda_gn, map_points_to_theta, min_envelope, symmetric_theta_curve,
    theta_coordinates, Crossing, GnThreshold, ThetaCurve,
};
use crate::continuation::{
    build_branch, pitchfork_exponent, solve_at_mu, Branch, BranchPoint, BranchStats, InitRecord,
};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointResult;
use crate::gn::{j_infinity_of, radial_ground_state, RadialProfile};
use crate::io::checkpoint::{self, CheckpointStore};
use crate::io::config::{theta_label, RunConfig};
use crate::io::svg::Diagram;
use crate::io::table::Table;
use crate::io::write_atomic;
use crate::model::{evaluate_q, theta_critical, Field, ProblemParams};
use crate::symmetric::{mu_fs, soliton_norms};

pub const BRANCH_FILE: &str = "branch.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub stats: Option<BranchStats>,
    pub provenance: Option<InitRecord>,
    pub terminal: Option<BranchPoint>,
    pub pitchfork_exponent: Option<f64>,
    pub files: Vec<String>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            timings: BTreeMap::new(),
            stats: None,
            provenance: None,
            terminal: None,
            pitchfork_exponent: None,
            files: Vec::new(),
        }
    }

    fn save(&mut self, out: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        let path = out.join(format!("manifest_{}.json", self.command));
        self.files = files.iter().map(|f| f.display().to_string()).collect();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

fn table(cfg: &RunConfig, columns: &[&str]) -> Table {
    Table::new(&cfg.run_id, &cfg.echo(), columns)
}

/// Geometric grid on `[mu_FS / 20, 20 mu_FS]` containing `mu_FS` exactly.
pub fn symmetric_mu_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    let m = mu_fs(cfg.p, cfg.d)?;
    let mut grid = geometric_grid(m / 20.0, 20.0 * m, cfg.curve_points);
    let k = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - m).abs().total_cmp(&(b.1 - m).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    grid[k] = m;
    Ok(grid)
}

pub fn cmd_symmetric_curve(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let params = cfg.params()?;
    let mus = symmetric_mu_grid(cfg)?;
    let mut files = Vec::new();
    for theta in cfg.thetas()? {
        let mut t = table(cfg, &["mu", "Lambda", "J", "t", "X", "Y", "Z"]);
        for &mu in &mus {
            let n = soliton_norms(mu, params.p, params.d, params.measure_mode)?;
            let (lambda, j) = theta_coordinates(mu, &n, theta, params.p);
            t.push_f64(&[mu, lambda, j, n.t(), n.x, n.y, n.z]);
        }
        let path = cfg.out.join(format!("sym_curve_{}.csv", theta_label(theta)));
        t.save(&path)?;
        files.push(path);
    }
    Ok(files)
}

/// `branch.csv` for the configured theta values.
pub fn branch_table(cfg: &RunConfig, points: &[BranchPoint]) -> Result<Table> {
    let thetas = cfg.thetas()?;
    let mut cols = vec!["kappa".to_string(), "mu".to_string()];
    cols.extend(thetas.iter().map(|t| format!("Lambda_{}", theta_label(*t))));
    cols.extend(thetas.iter().map(|t| format!("J_{}", theta_label(*t))));
    for c in ["t", "asymmetry", "checkpoint", "X", "Y", "Z", "symmetric"] {
        cols.push(c.into());
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = table(cfg, &col_refs);
    for pt in points {
        let coords: Vec<(f64, f64)> = thetas
            .iter()
            .map(|&th| theta_coordinates(pt.mu, &pt.norms(), th, cfg.p))
            .collect();
        let mut row = vec![pt.kappa.to_string(), pt.mu.to_string()];
        row.extend(coords.iter().map(|c| c.0.to_string()));
        row.extend(coords.iter().map(|c| c.1.to_string()));
        row.push(pt.t.to_string());
        row.push(pt.asymmetry.to_string());
        row.push(pt.field_ref.clone().unwrap_or_default());
        row.extend([pt.x, pt.y, pt.z].iter().map(|v| v.to_string()));
        row.push(pt.symmetric.to_string());
        t.push(row);
    }
    Ok(t)
}

/// Branch points back from a `branch.csv` table.
pub fn branch_points(t: &Table) -> Result<Vec<BranchPoint>> {
    let f = |name: &str| t.column_f64(name);
    let (kappa, mu, tt, asym, x, y, z) = (
        f("kappa")?,
        f("mu")?,
        f("t")?,
        f("asymmetry")?,
        f("X")?,
        f("Y")?,
        f("Z")?,
    );
    let refs = t.column("checkpoint")?;
    let sym = t.column("symmetric")?;
    (0..t.rows.len())
        .map(|k| {
            Ok(BranchPoint {
                kappa: kappa[k],
                mu: mu[k],
                x: x[k],
                y: y[k],
                z: z[k],
                t: tt[k],
                asymmetry: asym[k],
                field_ref: (!refs[k].is_empty()).then(|| refs[k].to_string()),
                symmetric: sym[k]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad symmetric flag `{}`", sym[k])))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BranchRun {
    pub branch: Branch,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

pub fn cmd_branch(cfg: &RunConfig) -> Result<BranchRun> {
    cfg.validate()?;
    let grid = Arc::new(cfg.grid()?);
    let mut store = CheckpointStore::on_disk(cfg.out.join(CHECKPOINT_DIR))?;
    let mut manifest = Manifest::new("branch", cfg);
    let start = Instant::now();
    let branch = build_branch(&grid, &cfg.branch_options(), &mut store)?;
    manifest.timings.insert("branch".into(), start.elapsed().as_secs_f64());

    let path = cfg.out.join(BRANCH_FILE);
    branch_table(cfg, &branch.points)?.save(&path)?;
    let files = vec![path, cfg.out.join(CHECKPOINT_DIR)];
    manifest.stats = Some(branch.stats.clone());
    manifest.provenance = Some(branch.provenance.clone());
    manifest.terminal = branch.terminal.clone();
    manifest.pitchfork_exponent = pitchfork_exponent(&branch.points, mu_fs(cfg.p, cfg.d)?, 8);
    let mpath = manifest.save(&cfg.out, &files)?;
    let mut files = files;
    files.push(mpath);
    Ok(BranchRun {
        branch,
        manifest,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrossingOutcome {
    None,
    Found(Crossing),
    Ambiguous(Vec<Crossing>),
}

/// The two solutions re-solved at the crossing and compared at `Lambda_1`.
#[derive(Debug, Clone)]
pub struct CoexistingPair {
    pub lambda1: f64,
    pub symmetric: FixedPointResult,
    pub non_symmetric: FixedPointResult,
    /// `Q^theta_{Lambda_1}` of each solution.
    pub j_symmetric: f64,
    pub j_non_symmetric: f64,
}

#[derive(Debug, Clone)]
pub struct ThetaAnalysis {
    pub theta: f64,
    pub symmetric: ThetaCurve,
    pub non_symmetric: ThetaCurve,
    pub crossing: CrossingOutcome,
    pub envelope_switches: Vec<f64>,
    pub pair: Option<CoexistingPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnRow {
    pub big_theta: f64,
    pub j_inf: f64,
    pub threshold: GnThreshold,
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub thetas: Vec<ThetaAnalysis>,
    pub gn: GnRow,
    pub files: Vec<PathBuf>,
}

fn gn_row(cfg: &RunConfig) -> Result<(GnRow, RadialProfile)> {
    let profile = radial_ground_state(cfg.p, cfg.d, cfg.tolerances.shooting)?;
    let j_inf = j_infinity_of(&profile, cfg.measure_mode);
    let threshold = lambda_gn(cfg.p, cfg.d, cfg.measure_mode, j_inf)?;
    Ok((
        GnRow {
            big_theta: theta_critical(cfg.p, cfg.d)?,
            j_inf,
            threshold,
        },
        profile,
    ))
}

fn gn_table(cfg: &RunConfig, row: &GnRow, u0: f64) -> Table {
    let mut t = table(cfg, &["Theta", "J_inf", "Lambda_GN", "mu_GN", "residual", "u0"]);
    t.push_f64(&[
        row.big_theta,
        row.j_inf,
        row.threshold.lambda_gn,
        row.threshold.mu,
        row.threshold.residual,
        u0,
    ]);
    t
}

/// Re-solves both branches at the preimages of a crossing.
pub fn coexisting_pair(
    cfg: &RunConfig,
    points: &[BranchPoint],
    store: &CheckpointStore,
    theta: f64,
    c: &Crossing,
) -> Result<CoexistingPair> {
    let fp = cfg.fixed_point_options();
    let symmetric = solve_at_mu(points, c.mu1_star, true, store, &fp)?;
    let non_symmetric = solve_at_mu(points, c.mu1, false, store, &fp)?;
    let j_symmetric = evaluate_q(&symmetric.u, c.lambda1, theta)?;
    let j_non_symmetric = evaluate_q(&non_symmetric.u, c.lambda1, theta)?;
    Ok(CoexistingPair {
        lambda1: c.lambda1,
        symmetric,
        non_symmetric,
        j_symmetric,
        j_non_symmetric,
    })
}

/// Nodal values `(s, phi, u)` for external contour plotting.
pub fn contour_table(cfg: &RunConfig, u: &Field) -> Table {
    let g = &u.grid;
    let mut t = table(cfg, &["s", "phi", "u"]);
    for (i, &s) in g.s_nodes.iter().enumerate() {
        for (j, &phi) in g.phi_nodes.iter().enumerate() {
            t.push_f64(&[s, phi, u.at(i, j)]);
        }
    }
    t
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let bpath = cfg.out.join(BRANCH_FILE);
    if !bpath.exists() {
        return Err(Error::io(
            &bpath,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run `branch` first"),
        ));
    }
    let btable = Table::load(&bpath)?;
    if btable.meta("params") != Some(cfg.echo().as_str()) {
        return Err(Error::Config(format!(
            "{} was written for `{}`, not `{}`",
            bpath.display(),
            btable.meta("params").unwrap_or(""),
            cfg.echo()
        )));
    }
    let points = branch_points(&btable)?;
    let store = CheckpointStore::on_disk(cfg.out.join(CHECKPOINT_DIR))?;
    let params: ProblemParams = cfg.params()?;
    let sym_pts: Vec<BranchPoint> = points.iter().filter(|p| p.symmetric).cloned().collect();
    let non_pts: Vec<BranchPoint> = points.iter().filter(|p| !p.symmetric).cloned().collect();
    let mus = symmetric_mu_grid(cfg)?;
    let (gn, profile) = gn_row(cfg)?;
    let big_theta = gn.big_theta;

    let mut files = Vec::new();
    let mut crossings = table(
        cfg,
        &[
            "theta",
            "Lambda1",
            "mu1_star",
            "mu1",
            "found",
            "J_symmetric",
            "J_non_symmetric",
        ],
    );
    let mut thetas = Vec::new();
    for theta in cfg.thetas()? {
        let label = theta_label(theta);
        let sym = map_points_to_theta(&sym_pts, &params, theta, "symmetric")?;
        let non = map_points_to_theta(&non_pts, &params, theta, "non-symmetric")?;
        let crossing = match detect_crossing(&sym, &non) {
            Ok(Some(c)) => CrossingOutcome::Found(c),
            Ok(None) => CrossingOutcome::None,
            Err(Error::AmbiguousCrossing(all)) => CrossingOutcome::Ambiguous(all),
            Err(e) => return Err(e),
        };
        let mut pair = None;
        match &crossing {
            CrossingOutcome::None => crossings.push(vec![
                theta.to_string(),
                "NaN".into(),
                "NaN".into(),
                "NaN".into(),
                "false".into(),
                "NaN".into(),
                "NaN".into(),
            ]),
            CrossingOutcome::Found(c) => {
                let pr = coexisting_pair(cfg, &points, &store, theta, c)?;
                for (name, field) in [("mu1_star", &pr.symmetric.u), ("mu1", &pr.non_symmetric.u)] {
                    let cpath = cfg.out.join(format!("contour_{name}_{label}.csv"));
                    contour_table(cfg, field).save(&cpath)?;
                    let fpath = cfg.out.join(format!("field_{name}_{label}.ckpt"));
                    checkpoint::save(&fpath, field)?;
                    files.push(cpath);
                    files.push(fpath);
                }
                crossings.push(vec![
                    theta.to_string(),
                    c.lambda1.to_string(),
                    c.mu1_star.to_string(),
                    c.mu1.to_string(),
                    "true".into(),
                    pr.j_symmetric.to_string(),
                    pr.j_non_symmetric.to_string(),
                ]);
                pair = Some(pr);
            }
            CrossingOutcome::Ambiguous(all) => {
                for c in all {
                    crossings.push(vec![
                        theta.to_string(),
                        c.lambda1.to_string(),
                        c.mu1_star.to_string(),
                        c.mu1.to_string(),
                        "ambiguous".into(),
                        c.j.to_string(),
                        c.j.to_string(),
                    ]);
                }
            }
        }

        // Envelope over the common Lambda range of the computed curves.
        let curves = [sym.clone(), non.clone()];
        let lambdas = curves.iter().flat_map(|c| c.points.iter().map(|p| p.lambda));
        let (lo, hi) = lambdas.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l), b.max(l)));
        let mut switches = Vec::new();
        let mut env_pts = Vec::new();
        if lo < hi {
            let grid: Vec<f64> = (0..400).map(|k| lo + (hi - lo) * k as f64 / 399.0).collect();
            let env = min_envelope(&curves, &grid)?;
            let mut t = table(cfg, &["Lambda", "J_min", "source"]);
            for e in &env.points {
                t.push(vec![e.lambda.to_string(), e.j_min.to_string(), e.source_id.clone()]);
                env_pts.push((e.lambda, e.j_min));
            }
            let epath = cfg.out.join(format!("envelope_{label}.csv"));
            t.save(&epath)?;
            files.push(epath);
            switches = env.switches;
        }

        let closed = symmetric_theta_curve(&mus, theta, &params)?;
        let diagram = Diagram {
            title: format!("d = {}, p = {}, theta = {label}", cfg.d, cfg.p),
            symmetric: closed.points.iter().map(|p| (p.lambda, p.j)).collect(),
            non_symmetric: non.points.iter().map(|p| (p.lambda, p.j)).collect(),
            envelope: env_pts,
            level: ((theta - big_theta).abs() < 1e-9).then_some(gn.j_inf),
        };
        let spath = cfg.out.join(format!("diagram_{label}.svg"));
        write_atomic(&spath, diagram.render().as_bytes())?;
        files.push(spath);

        thetas.push(ThetaAnalysis {
            theta,
            symmetric: sym,
            non_symmetric: non,
            crossing,
            envelope_switches: switches,
            pair,
        });
    }
    let cpath = cfg.out.join("crossings.csv");
    crossings.save(&cpath)?;
    files.push(cpath);
    let gpath = cfg.out.join("gn.csv");
    gn_table(cfg, &gn, profile.u0).save(&gpath)?;
    files.push(gpath);
    let mut manifest = Manifest::new("analyze", cfg);
    files.push(manifest.save(&cfg.out, &files)?);
    Ok(AnalysisReport { thetas, gn, files })
}

pub fn cmd_gn_limit(cfg: &RunConfig) -> Result<(GnRow, Vec<PathBuf>)> {
    cfg.validate()?;
    let (gn, profile) = gn_row(cfg)?;
    let gpath = cfg.out.join("gn.csv");
    gn_table(cfg, &gn, profile.u0).save(&gpath)?;
    let mut t = table(cfg, &["r", "u"]);
    for (r, u) in profile.r_nodes.iter().zip(&profile.u_values) {
        t.push_f64(&[*r, *u]);
    }
    let ppath = cfg.out.join("gn_profile.csv");
    t.save(&ppath)?;
    Ok((gn, vec![gpath, ppath]))
}

/// Configurations of the figure set: the theta sweep at `p = 2.8`, the
/// three regimes at `theta = Theta(2.8, 5)` and the sweep close to it.
pub fn figure_configs(base: &RunConfig) -> Vec<RunConfig> {
    let big = 5.0 / 7.0;
    let mk = |name: &str, p: f64, thetas: &[f64]| RunConfig {
        d: 5,
        p,
        theta_list: thetas.to_vec(),
        out: base.out.join(name),
        run_id: format!("{}-{name}", base.run_id),
        ..base.clone()
    };
    vec![
        mk("p2.8", 2.8, &crate::io::config::DEFAULT_THETAS),
        mk("p2.78", 2.78, &[big, 1.0]),
        mk("p2.7", 2.7, &[big, 1.0]),
        mk("p2.8-near-critical", 2.8, &[big, 0.7213, 0.7283]),
    ]
}

/// Runs every command for each figure configuration.
pub fn cmd_reproduce_figures(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for c in figure_configs(cfg) {
        log::info!("reproducing {}", c.out.display());
        files.extend(cmd_symmetric_curve(&c)?);
        files.extend(cmd_branch(&c)?.files);
        files.extend(cmd_analyze(&c)?.files);
    }
    Ok(files)
}
