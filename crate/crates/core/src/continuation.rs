//! Non-symmetric branch construction.
//!
//! A non-symmetric critical point is first found at some `mu0 > mu_FS` by
//! minimizing `F(u) = (X + mu0 Y) / Z^{2/p}` with preconditioned nonlinear
//! conjugate gradients, starting from the symmetric soliton pushed along the
//! unstable direction `phi_1(s) cos(phi)`. The point is polished with the
//! fixed-point iteration and then followed in `kappa`, reusing the previous
//! potential and eigenfunction at every step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigensolver::{assemble_operator, CylinderOperator};
use crate::error::{Error, Result};
pub use crate::fixedpoint::asymmetry;
use crate::fixedpoint::{critical_value, potential_from, roothan_solve_warm, FixedPointOptions, FixedPointResult};
use crate::io::checkpoint::CheckpointStore;
use crate::linalg::BandCholesky;
use crate::model::{evaluate_norms, CylinderGrid, Field, Norms, ProblemParams};
use crate::symmetric::{mu_fs, perturbation_direction, soliton, soliton_norms};

/// Asymmetry below which a field counts as symmetric.
pub const SYMMETRIC_ASYMMETRY: f64 = 1e-4;
/// Minimal asymmetry of an accepted initial point.
pub const MIN_INIT_ASYMMETRY: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub kappa: f64,
    pub mu: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub asymmetry: f64,
    /// Checkpoint id of the stored solution, if any.
    pub field_ref: Option<String>,
    /// True for points on the symmetric branch.
    pub symmetric: bool,
}

impl BranchPoint {
    pub fn from_result(res: &FixedPointResult, field_ref: Option<String>) -> Self {
        let n = res.norms;
        let asym = res.asymmetry();
        Self {
            kappa: res.kappa,
            mu: res.mu,
            x: n.x,
            y: n.y,
            z: n.z,
            t: n.t(),
            asymmetry: asym,
            field_ref,
            symmetric: asym <= SYMMETRIC_ASYMMETRY,
        }
    }

    /// Closed-form point on the symmetric branch.
    pub fn symmetric(mu: f64, params: &ProblemParams) -> Result<Self> {
        let n = soliton_norms(mu, params.p, params.d, params.measure_mode)?;
        Ok(Self {
            kappa: n.z.powf((params.p - 2.0) / params.p),
            mu,
            x: n.x,
            y: n.y,
            z: n.z,
            t: n.t(),
            asymmetry: 0.0,
            field_ref: None,
            symmetric: true,
        })
    }

    pub fn norms(&self) -> Norms {
        Norms {
            x: self.x,
            y: self.y,
            z: self.z,
        }
    }

    /// `Q^1_mu = Z^{(p-2)/p}`.
    pub fn critical_value(&self, p: f64) -> f64 {
        self.z.powf((p - 2.0) / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub mu0: f64,
    pub eps: f64,
    pub eta: f64,
    pub kappa0: f64,
    pub seed_direction: String,
    pub descent_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchStats {
    pub steps: usize,
    pub fixed_point_iterations: usize,
    pub accelerated_steps: usize,
    pub eta_halvings: usize,
    pub rejected_steps: usize,
}

impl BranchStats {
    fn merge(&mut self, other: &BranchStats) {
        self.steps += other.steps;
        self.fixed_point_iterations += other.fixed_point_iterations;
        self.accelerated_steps += other.accelerated_steps;
        self.eta_halvings += other.eta_halvings;
        self.rejected_steps += other.rejected_steps;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub params: ProblemParams,
    /// Ordered by increasing `kappa`.
    pub points: Vec<BranchPoint>,
    pub provenance: InitRecord,
    pub stats: BranchStats,
    /// Last solved point of the downward continuation.
    pub terminal: Option<BranchPoint>,
}

impl Branch {
    pub fn non_symmetric(&self) -> impl Iterator<Item = &BranchPoint> {
        self.points.iter().filter(|p| !p.symmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub max_iter: usize,
    /// Stop when the preconditioned gradient has this `L^2` norm.
    pub grad_tol: f64,
    pub restart: usize,
    pub fixed_point: FixedPointOptions,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-7,
            restart: 20,
            fixed_point: FixedPointOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub point: BranchPoint,
    pub result: FixedPointResult,
    /// Set when no perturbation was applied.
    pub degenerate: bool,
    pub descent_iterations: usize,
    /// Closed-form symmetric critical value at the converged `mu`.
    pub symmetric_value: f64,
}

/// `F(u) = (X + mu Y) / Z^{2/p}` on interior unknowns.
struct Functional {
    op: CylinderOperator,
    precond: BandCholesky,
    weights: Vec<f64>,
    mu: f64,
    p: f64,
}

struct Eval {
    value: f64,
    /// Half the gradient times `Z^{2/p}`.
    grad: Vec<f64>,
    zpow: f64,
}

impl Functional {
    fn new(mu: f64, grid: &Arc<CylinderGrid>) -> Result<Self> {
        let op = assemble_operator(0.0, &Field::zeros(Arc::clone(grid)));
        let precond = op
            .shifted_band(-mu)
            .cholesky()
            .ok_or_else(|| Error::Domain("preconditioner is not positive definite".into()))?;
        Ok(Self {
            weights: op.weights().to_vec(),
            op,
            precond,
            mu,
            p: grid.params.p,
        })
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, false).value
    }

    fn eval(&self, x: &[f64], with_grad: bool) -> Eval {
        let mut kx = vec![0.0; x.len()];
        self.op.apply_stiffness(x, &mut kx);
        let (mut dx, mut y, mut z) = (0.0, 0.0, 0.0);
        for ((u, ku), w) in x.iter().zip(&kx).zip(&self.weights) {
            dx += u * ku;
            y += w * u * u;
            z += w * u.abs().powf(self.p);
        }
        let num = dx + self.mu * y;
        let zpow = z.powf(2.0 / self.p);
        let grad = if with_grad {
            let ratio = num / z;
            kx.iter()
                .zip(x)
                .zip(&self.weights)
                .map(|((ku, u), w)| ku + w * (self.mu * u - ratio * u.abs().powf(self.p - 2.0) * u))
                .collect()
        } else {
            Vec::new()
        };
        Eval {
            value: num / zpow,
            grad,
            zpow,
        }
    }

    fn normalize(&self, x: &mut [f64]) -> f64 {
        let n = x.iter().zip(&self.weights).map(|(u, w)| w * u * u).sum::<f64>().sqrt();
        x.iter_mut().for_each(|u| *u /= n);
        n
    }

    fn w_norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(u, w)| w * u * u).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned Polak-Ribiere nonlinear CG with Armijo backtracking.
/// Returns the minimizer (unit `L^2` norm) and the iteration count.
fn descend(f: &Functional, mut x: Vec<f64>, opts: &InitOptions) -> (Vec<f64>, usize) {
    f.normalize(&mut x);
    let mut cur = f.eval(&x, true);
    let mut z = cur.grad.clone();
    f.precond.solve_in_place(&mut z);
    let mut dir: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut gz = dot(&cur.grad, &z);
    for iter in 0..opts.max_iter {
        if f.w_norm(&z) <= opts.grad_tol {
            return (x, iter);
        }
        let mut slope = 2.0 / cur.zpow * dot(&cur.grad, &dir);
        if slope >= 0.0 {
            dir = z.iter().map(|v| -v).collect();
            slope = 2.0 / cur.zpow * dot(&cur.grad, &dir);
        }
        let mut alpha = 1.0;
        let mut trial = vec![0.0; x.len()];
        let mut accepted = false;
        for _ in 0..40 {
            trial
                .iter_mut()
                .zip(&x)
                .zip(&dir)
                .for_each(|((t, u), d)| *t = u + alpha * d);
            if f.value(&trial) <= cur.value + 1e-4 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return (x, iter);
        }
        let scale = f.normalize(&mut trial);
        x = trial;
        dir.iter_mut().for_each(|d| *d /= scale);
        let next = f.eval(&x, true);
        let mut z_next = next.grad.clone();
        f.precond.solve_in_place(&mut z_next);
        let gz_next = dot(&next.grad, &z_next);
        let beta = if (iter + 1) % opts.restart == 0 {
            0.0
        } else {
            let pr: f64 = next
                .grad
                .iter()
                .zip(z_next.iter().zip(&z))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            (pr / gz).max(0.0)
        };
        dir.iter_mut().zip(&z_next).for_each(|(d, zn)| *d = -zn + beta * *d);
        z = z_next;
        gz = gz_next;
        cur = next;
    }
    (x, opts.max_iter)
}

/// Default perturbation size `0.05 |u_{mu0,*}|_2`.
pub fn default_eps(mu0: f64, grid: &Arc<CylinderGrid>) -> Result<f64> {
    Ok(0.05 * soliton(mu0, grid.params.p)?.to_field(Arc::clone(grid)).l2_norm())
}

/// Finds a non-symmetric critical point of `Q^1_{mu0}` near the symmetric
/// soliton; `eps` is the absolute size of the initial perturbation.
pub fn initialize(mu0: f64, eps: f64, grid: &Arc<CylinderGrid>, opts: &InitOptions) -> Result<Initialization> {
    let params = grid.params;
    if !(mu0 > 0.0) || !(eps >= 0.0) {
        return Err(Error::Domain(format!("need mu0 > 0 and eps >= 0, got {mu0}, {eps}")));
    }
    let base = soliton(mu0, params.p)?.to_field(Arc::clone(grid));
    let (field, iterations, degenerate) = if eps == 0.0 {
        (base, 0, true)
    } else {
        let w = perturbation_direction(mu0, Arc::clone(grid))?;
        let start: Vec<f64> = base
            .to_dofs()
            .iter()
            .zip(w.field.to_dofs())
            .map(|(u, w)| u + eps * w)
            .collect();
        let f = Functional::new(mu0, grid)?;
        let (x, iterations) = descend(&f, start, opts);
        (Field::from_dofs(Arc::clone(grid), &x), iterations, false)
    };
    // At a critical point of F the fixed-point parameter is the value of F.
    let n = evaluate_norms(&field)?;
    let kappa = (n.x + mu0 * n.y) / n.z.powf(2.0 / params.p);
    let v = potential_from(&field)?;
    let result = roothan_solve_warm(kappa, &v, Some(&field), &opts.fixed_point)?;
    let sym = soliton_norms(result.mu, params.p, params.d, params.measure_mode)?;
    let symmetric_value = sym.z.powf((params.p - 2.0) / params.p);
    let asym = result.asymmetry();
    if !degenerate && (asym < MIN_INIT_ASYMMETRY || result.critical_value() >= symmetric_value) {
        return Err(Error::FellBackToSymmetric { asymmetry: asym });
    }
    Ok(Initialization {
        point: BranchPoint::from_result(&result, None),
        result,
        degenerate,
        descent_iterations: iterations,
        symmetric_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub eta: f64,
    /// Upper end of the upward continuation.
    pub kappa_stop: f64,
    /// Smallest step is `eta / min_eta_divisor`.
    pub min_eta_divisor: f64,
    /// Accept a step when `|u_new - u_old| <= factor * sqrt(eta / kappa)`.
    pub continuity_factor: f64,
    pub max_points: usize,
    pub fixed_point: FixedPointOptions,
}

impl ContinuationOptions {
    pub fn new(eta: f64, kappa_stop: f64) -> Self {
        Self {
            eta,
            kappa_stop,
            min_eta_divisor: 64.0,
            continuity_factor: 5.0,
            max_points: 5000,
            fixed_point: FixedPointOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOutput {
    /// Stored points in stepping order.
    pub points: Vec<BranchPoint>,
    pub stats: BranchStats,
    /// Last accepted solve, stored or not.
    pub terminal: Option<BranchPoint>,
}

fn relative_change(a: &Field, b: &Field) -> f64 {
    let diff = Field {
        grid: Arc::clone(&a.grid),
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
    };
    diff.l2_norm() / b.l2_norm()
}

/// Steps `kappa` from `start` in one direction; every stored field is written
/// to `store` under `<label><index>`.
pub fn continue_branch(
    start: &FixedPointResult,
    direction: Direction,
    opts: &ContinuationOptions,
    store: &mut CheckpointStore,
    label: &str,
) -> Result<ContinuationOutput> {
    if !(opts.eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {}", opts.eta)));
    }
    let params = start.u.grid.params;
    let mu_bif = mu_fs(params.p, params.d)?;
    let min_eta = opts.eta / opts.min_eta_divisor;
    let mut stats = BranchStats::default();
    let mut points = Vec::new();
    let mut terminal = None;
    let mut prev = start.clone();
    let mut eta = opts.eta;
    let mut streak = 0;

    while points.len() < opts.max_points {
        let kappa = match direction {
            Direction::Down => prev.kappa - eta,
            Direction::Up => {
                if prev.kappa >= opts.kappa_stop * (1.0 - 1e-12) {
                    break;
                }
                (prev.kappa + eta).min(opts.kappa_stop)
            }
        };
        if kappa <= 0.0 {
            break;
        }
        let attempt = roothan_solve_warm(kappa, &prev.v, Some(&prev.u), &opts.fixed_point);
        let accepted = match attempt {
            Ok(res) if res.usable => {
                let change = relative_change(&res.u, &prev.u);
                let bound = opts.continuity_factor * (eta / prev.kappa).sqrt();
                if change <= bound {
                    Some(res)
                } else {
                    log::debug!("kappa {kappa}: change {change:e} exceeds {bound:e}");
                    None
                }
            }
            Ok(_) => None,
            Err(Error::NonConvergence { .. }) => None,
            Err(e) => return Err(e),
        };
        let Some(res) = accepted else {
            stats.rejected_steps += 1;
            eta *= 0.5;
            stats.eta_halvings += 1;
            streak = 0;
            if eta < min_eta {
                return Err(Error::StepFailure { kappa, eta });
            }
            continue;
        };
        stats.steps += 1;
        stats.fixed_point_iterations += res.iterations;
        stats.accelerated_steps += res.accelerated;
        streak += 1;
        if streak >= 2 && eta < opts.eta {
            eta = (eta * 2.0).min(opts.eta);
            streak = 0;
        }
        let asym = res.asymmetry();
        let finished = direction == Direction::Down && (res.mu <= mu_bif || asym < SYMMETRIC_ASYMMETRY);
        let keep = !finished || asym <= SYMMETRIC_ASYMMETRY;
        let mut point = BranchPoint::from_result(&res, None);
        if keep {
            let id = format!("{label}{:04}", points.len());
            store.put(&id, &res.u_eq)?;
            point.field_ref = Some(id);
            points.push(point.clone());
        }
        terminal = Some(point);
        prev = res;
        if finished {
            break;
        }
    }
    Ok(ContinuationOutput {
        points,
        stats,
        terminal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    pub mu0_factor: f64,
    /// Perturbation size relative to `|u_{mu0,*}|_2`.
    pub eps_factor: f64,
    /// Step in `kappa`; defaults to `kappa0 / 200`.
    pub eta: Option<f64>,
    /// Defaults to `1.6 kappa0`.
    pub kappa_stop: Option<f64>,
    /// Symmetric points solved on the grid below `mu_FS`.
    pub symmetric_points: usize,
    pub init: InitOptions,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self {
            mu0_factor: 1.2,
            eps_factor: 0.05,
            eta: None,
            kappa_stop: None,
            symmetric_points: 40,
            init: InitOptions::default(),
        }
    }
}

/// Initializes at `mu0 = mu0_factor * mu_FS` and continues in both
/// directions; the result is ordered by `kappa` and extended below `mu_FS`
/// by symmetric points.
pub fn build_branch(grid: &Arc<CylinderGrid>, opts: &BranchOptions, store: &mut CheckpointStore) -> Result<Branch> {
    let params = grid.params;
    let mu_bif = mu_fs(params.p, params.d)?;
    let mu0 = opts.mu0_factor * mu_bif;
    let eps = opts.eps_factor * soliton(mu0, params.p)?.to_field(Arc::clone(grid)).l2_norm();
    let init = initialize(mu0, eps, grid, &opts.init)?;
    let kappa0 = init.result.kappa;
    let eta = opts.eta.unwrap_or(kappa0 / 200.0);
    let kappa_stop = opts.kappa_stop.unwrap_or(1.6 * kappa0);
    let mut copts = ContinuationOptions::new(eta, kappa_stop);
    copts.fixed_point = opts.init.fixed_point;

    let mut start = init.point.clone();
    let id = "init".to_string();
    store.put(&id, &init.result.u_eq)?;
    start.field_ref = Some(id);

    let down = continue_branch(&init.result, Direction::Down, &copts, store, "d")?;
    let up = continue_branch(&init.result, Direction::Up, &copts, store, "u")?;

    let mut points: Vec<BranchPoint> = down.points.into_iter().rev().collect();
    points.push(start);
    points.extend(up.points);

    let mut all = symmetric_points(grid, opts.symmetric_points, &opts.init.fixed_point, store)?;
    all.extend(points);
    all.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    all.dedup_by(|a, b| (a.kappa - b.kappa).abs() <= 1e-10 * b.kappa);

    let mut stats = down.stats;
    stats.merge(&up.stats);
    Ok(Branch {
        params,
        points: all,
        provenance: InitRecord {
            mu0,
            eps,
            eta,
            kappa0,
            seed_direction: "phi_1(s) cos(phi)".into(),
            descent_iterations: init.descent_iterations,
        },
        stats,
        terminal: down.terminal,
    })
}

/// Symmetric solutions of the discrete problem for `mu` spaced
/// geometrically up to `mu_FS`, starting where the truncation still
/// resolves the soliton tail.
pub fn symmetric_points(
    grid: &Arc<CylinderGrid>,
    count: usize,
    fp: &FixedPointOptions,
    store: &mut CheckpointStore,
) -> Result<Vec<BranchPoint>> {
    let params = grid.params;
    let mu_hi = mu_fs(params.p, params.d)?;
    let mu_lo = (0.25 * mu_hi).max((12.0 / grid.half_length).powi(2));
    let mut out = Vec::with_capacity(count);
    if count == 0 || mu_lo >= mu_hi {
        return Ok(out);
    }
    for k in 0..count {
        let frac = if count == 1 { 1.0 } else { k as f64 / (count - 1) as f64 };
        let mu = mu_lo * (mu_hi / mu_lo).powf(frac);
        let u = soliton(mu, params.p)?.to_field(Arc::clone(grid));
        let kappa = critical_value(&u);
        let res = roothan_solve_warm(kappa, &potential_from(&u)?, Some(&u), fp)?;
        let id = format!("s{k:04}");
        store.put(&id, &res.u_eq)?;
        let mut pt = BranchPoint::from_result(&res, Some(id));
        pt.symmetric = true;
        out.push(pt);
    }
    Ok(out)
}

/// Re-solves the branch at `mu`: `kappa` is interpolated between the two
/// bracketing points of the requested kind and the nearer stored field is
/// used as the starting point.
pub fn solve_at_mu(
    points: &[BranchPoint],
    mu: f64,
    symmetric: bool,
    store: &CheckpointStore,
    fp: &FixedPointOptions,
) -> Result<FixedPointResult> {
    let kind: Vec<&BranchPoint> = points.iter().filter(|p| p.symmetric == symmetric).collect();
    let (a, b) = kind
        .windows(2)
        .map(|w| (w[0], w[1]))
        .find(|(a, b)| (a.mu - mu) * (b.mu - mu) <= 0.0 && a.mu != b.mu)
        .ok_or_else(|| Error::NoSolution(format!("no stored points bracket mu = {mu}")))?;
    let w = (mu - a.mu) / (b.mu - a.mu);
    let kappa = a.kappa + w * (b.kappa - a.kappa);
    let near = if w < 0.5 { a } else { b };
    let id = near
        .field_ref
        .as_deref()
        .ok_or_else(|| Error::NoSolution(format!("point at mu = {} has no stored field", near.mu)))?;
    let u = store.get(id)?;
    roothan_solve_warm(kappa, &potential_from(&u)?, Some(&u), fp)
}

/// Least-squares exponent `e` in `asymmetry^2 ~ (mu - mu_FS)^e` over the
/// `count` non-symmetric points closest to `mu_FS`.
pub fn pitchfork_exponent(points: &[BranchPoint], mu_fs: f64, count: usize) -> Option<f64> {
    let mut near: Vec<&BranchPoint> = points.iter().filter(|p| !p.symmetric && p.mu > mu_fs).collect();
    near.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    near.truncate(count);
    if near.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = near.iter().map(|p| (p.mu - mu_fs).ln()).collect();
    let ys: Vec<f64> = near.iter().map(|p| (p.asymmetry * p.asymmetry).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
