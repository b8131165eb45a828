//! Alternating eigen-solve / potential-update iteration for critical points
//! of `Q^1` at fixed `kappa`.
//!
//! Each step solves for the ground state `u_i` of `-Delta - kappa V_{i-1}` and
//! sets `V_i = |u_i|^{p-2} / |u_i|_p^{p-2}`. By Holder's inequality the
//! eigenvalues never increase, which is checked on every step. Anderson
//! extrapolation of the potential is tried first and kept only when it does
//! not raise the eigenvalue.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::eigensolver::{assemble_operator, check_potential, solve_ground_state};
use crate::error::{Error, Result};
use crate::model::{evaluate_norms, Field, Norms};

/// Allowed increase of the eigenvalue between consecutive steps.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Relative tolerance on successive eigenvalues.
    pub tol: f64,
    /// Tolerance on `|V_{i+1} - V_i|_q`.
    pub potential_tol: f64,
    pub eigen_tol: f64,
    /// Linear mixing factor in `(0, 1]`; `1` is the plain update.
    pub mixing: f64,
    /// Anderson history length; `0` disables extrapolation.
    pub anderson_depth: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
            potential_tol: 1e-9,
            eigen_tol: 1e-10,
            mixing: 1.0,
            anderson_depth: 4,
        }
    }
}

impl FixedPointOptions {
    /// Couples the potential tolerance to `sqrt(tol)`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            potential_tol: tol.sqrt(),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::Domain(format!("mixing factor {} outside (0, 1]", self.mixing)));
        }
        if !(self.tol > 0.0 && self.potential_tol > 0.0 && self.eigen_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub kappa: f64,
    /// `-lambda` at convergence.
    pub mu: f64,
    /// Ground state with unit `L^2` norm.
    pub u: Field,
    /// `u` rescaled to solve `-Delta w + mu w = w^{p-1}`.
    pub u_eq: Field,
    /// Converged potential, `|v|_q = 1`.
    pub v: Field,
    pub norms: Norms,
    pub lambda_history: Vec<f64>,
    pub iterations: usize,
    /// Number of accepted extrapolated steps.
    pub accelerated: usize,
    /// False when `mu <= 0`; such points cannot sit on a branch.
    pub usable: bool,
}

impl FixedPointResult {
    pub fn critical_value(&self) -> f64 {
        critical_value(&self.u_eq)
    }

    pub fn asymmetry(&self) -> f64 {
        asymmetry(&self.u)
    }
}

/// `|u - u_bar|_2 / |u|_2`, `u_bar` the angular average at each `s`.
pub fn asymmetry(u: &Field) -> f64 {
    let g = &*u.grid;
    let avg = u.angular_average();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g.n_s {
        for j in 0..g.n_phi {
            let k = g.index(i, j);
            let w = g.quad_weights[k];
            num += w * (u.values[k] - avg[i]).powi(2);
            den += w * u.values[k].powi(2);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// `|u|^{p-2} / |u|_p^{p-2}`.
pub fn potential_from(u: &Field) -> Result<Field> {
    let p = u.grid.params.p;
    let norm = u.lr_norm(p);
    if !(norm > 0.0) {
        return Err(Error::ZeroField);
    }
    let scale = norm.powf(p - 2.0);
    Ok(Field {
        grid: Arc::clone(&u.grid),
        values: u.values.iter().map(|v| v.abs().powf(p - 2.0) / scale).collect(),
    })
}

fn q_distance(a: &[f64], b: &[f64], weights: &[f64], q: f64) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| w * (x - y).abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Clips to non-negative values and rescales to unit `q`-norm.
fn project_potential(values: &mut [f64], weights: &[f64], q: f64) -> bool {
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    let norm = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v.powf(q))
        .sum::<f64>()
        .powf(1.0 / q);
    if !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    values.iter_mut().for_each(|v| *v /= norm);
    true
}

struct Anderson {
    depth: usize,
    xs: Vec<Vec<f64>>,
    fs: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            xs: Vec::new(),
            fs: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.xs.clear();
        self.fs.clear();
    }

    fn push(&mut self, x: &[f64], f: &[f64]) {
        self.xs.push(x.to_vec());
        self.fs.push(f.to_vec());
        if self.xs.len() > self.depth + 1 {
            self.xs.remove(0);
            self.fs.remove(0);
        }
    }

    /// Extrapolated iterate from the stored history, weighted by `sqrt_w`.
    fn extrapolate(&self, beta: f64, sqrt_w: &[f64]) -> Option<Vec<f64>> {
        let m = self.xs.len().checked_sub(1)?;
        if m == 0 {
            return None;
        }
        let n = sqrt_w.len();
        let last_f = &self.fs[m];
        let mut df = DMatrix::zeros(n, m);
        for c in 0..m {
            for r in 0..n {
                df[(r, c)] = (self.fs[c + 1][r] - self.fs[c][r]) * sqrt_w[r];
            }
        }
        let rhs = DVector::from_iterator(n, last_f.iter().zip(sqrt_w).map(|(f, w)| f * w));
        let gamma = df.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let x = &self.xs[m];
        let mut out: Vec<f64> = x.iter().zip(last_f).map(|(x, f)| x + beta * f).collect();
        for c in 0..m {
            let g = gamma[c];
            for (r, o) in out.iter_mut().enumerate() {
                let dx = self.xs[c + 1][r] - self.xs[c][r];
                let df = self.fs[c + 1][r] - self.fs[c][r];
                *o -= g * (dx + beta * df);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// Runs the fixed-point iteration from potential `v0`.
pub fn roothan_solve(kappa: f64, v0: &Field, opts: &FixedPointOptions) -> Result<FixedPointResult> {
    roothan_solve_warm(kappa, v0, None, opts)
}

/// As [`roothan_solve`], with an optional eigenfunction warm start.
pub fn roothan_solve_warm(
    kappa: f64,
    v0: &Field,
    warm: Option<&Field>,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    opts.validate()?;
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    check_potential(v0)?;
    let grid = Arc::clone(&v0.grid);
    let q = grid.params.q();
    let weights = grid.quad_weights.clone();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    let mut v = v0.values.clone();
    let warm_dofs = warm.map(Field::to_dofs);
    let op = assemble_operator(kappa, v0);
    let mut eig = solve_ground_state(&op, warm_dofs.as_deref(), opts.eigen_tol)?;
    let mut history = vec![eig.lambda];
    let mut anderson = Anderson::new(opts.anderson_depth);
    let mut accelerated = 0;

    for iter in 1..=opts.max_iter {
        let target = potential_from(&eig.u)?.values;
        let f: Vec<f64> = target.iter().zip(&v).map(|(t, x)| t - x).collect();
        let change = q_distance(&target, &v, &weights, q);
        if iter > 1 {
            let prev = history[history.len() - 2];
            let lambda = eig.lambda;
            if (lambda - prev).abs() <= opts.tol * (1.0 + prev.abs()) && change <= opts.potential_tol {
                return finish(kappa, eig.u, target, history, iter - 1, accelerated, &grid);
            }
        }
        anderson.push(&v, &f);

        let mut candidates: Vec<(Vec<f64>, bool)> = Vec::with_capacity(3);
        if opts.anderson_depth > 0 {
            if let Some(mut x) = anderson.extrapolate(opts.mixing, &sqrt_w) {
                if project_potential(&mut x, &weights, q) {
                    candidates.push((x, true));
                }
            }
        }
        if opts.mixing < 1.0 {
            let mut x: Vec<f64> = v.iter().zip(&f).map(|(x, f)| x + opts.mixing * f).collect();
            if project_potential(&mut x, &weights, q) {
                candidates.push((x, false));
            }
        }
        candidates.push((target, false));

        let last = candidates.len() - 1;
        let warm_dofs = eig.u.to_dofs();
        for (k, (x, extrapolated)) in candidates.into_iter().enumerate() {
            let trial = Field {
                grid: Arc::clone(&grid),
                values: x,
            };
            let op = assemble_operator(kappa, &trial);
            let next = solve_ground_state(&op, Some(&warm_dofs), opts.eigen_tol)?;
            if next.lambda <= eig.lambda + MONOTONE_SLACK {
                if extrapolated {
                    accelerated += 1;
                }
                v = trial.values;
                eig = next;
                break;
            }
            if k == last {
                // The plain update cannot raise the eigenvalue.
                return Err(Error::Tolerance(format!(
                    "eigenvalue increased from {} to {} at kappa = {kappa}",
                    eig.lambda, next.lambda
                )));
            }
            anderson.reset();
        }
        history.push(eig.lambda);
    }
    let residual = history
        .windows(2)
        .last()
        .map(|w| (w[1] - w[0]).abs())
        .unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        what: "fixed-point iteration",
        iterations: opts.max_iter,
        residual,
    })
}

fn finish(
    kappa: f64,
    u: Field,
    v: Vec<f64>,
    lambda_history: Vec<f64>,
    iterations: usize,
    accelerated: usize,
    grid: &Arc<crate::model::CylinderGrid>,
) -> Result<FixedPointResult> {
    let mu = -lambda_history[lambda_history.len() - 1];
    let u_eq = rescale_to_eqmu(&u, kappa)?;
    let norms = evaluate_norms(&u_eq)?;
    Ok(FixedPointResult {
        kappa,
        mu,
        u,
        u_eq,
        v: Field {
            grid: Arc::clone(grid),
            values: v,
        },
        norms,
        lambda_history,
        iterations,
        accelerated,
        usable: mu > 0.0,
    })
}

/// Rescales a solution of `-Delta u + mu u = kappa V u` to `-Delta w + mu w
/// = w^{p-1}`: `w = c u` with `c^{p-2} = kappa / |u|_p^{p-2}`.
pub fn rescale_to_eqmu(u: &Field, kappa: f64) -> Result<Field> {
    let p = u.grid.params.p;
    let norm = u.lr_norm(p);
    if !(norm > 0.0) {
        return Err(Error::ZeroField);
    }
    let c = (kappa / norm.powf(p - 2.0)).powf(1.0 / (p - 2.0));
    Ok(u.scaled(c))
}

/// `Q^1_mu[u] = Z^{(p-2)/p}` for a solution of the Euler-Lagrange equation.
pub fn critical_value(u_eq: &Field) -> f64 {
    let p = u_eq.grid.params.p;
    let z: f64 = u_eq
        .values
        .iter()
        .zip(&u_eq.grid.quad_weights)
        .map(|(v, w)| w * v.abs().powf(p))
        .sum();
    z.powf((p - 2.0) / p)
}

/// Discrete `L^2` norm of `-Delta w + mu w - |w|^{p-2} w` on interior nodes.
pub fn eqmu_residual(u_eq: &Field, mu: f64) -> f64 {
    let g = &u_eq.grid;
    let p = g.params.p;
    let zero = Field::zeros(Arc::clone(g));
    let lap = assemble_operator(0.0, &zero);
    let x = u_eq.to_dofs();
    let mut y = vec![0.0; x.len()];
    lap.apply_stiffness(&x, &mut y);
    y.iter()
        .zip(&x)
        .zip(lap.weights())
        .map(|((ax, u), w)| {
            let r = ax / w + mu * u - u.abs().powf(p - 2.0) * u;
            w * r * r
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, evaluate_q, CylinderGrid, MeasureMode, ProblemParams};
    use crate::symmetric::{mu_fs, perturbation_direction, soliton, soliton_norms};
    use approx::assert_relative_eq;

    const P: f64 = 2.8;

    fn grid(ns: usize, nphi: usize, mode: MeasureMode) -> Arc<CylinderGrid> {
        let pp = ProblemParams::new(5, P, 1.0, mode).unwrap();
        Arc::new(build_grid(10.0, ns, nphi, pp).unwrap())
    }

    fn soliton_start(mu: f64, g: &Arc<CylinderGrid>) -> (f64, Field) {
        let u = soliton(mu, P).unwrap().to_field(Arc::clone(g));
        let v = potential_from(&u).unwrap();
        (critical_value(&u), v)
    }

    fn assert_monotone(h: &[f64]) {
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + MONOTONE_SLACK, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn soliton_is_a_fixed_point() {
        let g = grid(200, 12, MeasureMode::Probability);
        let mu = mu_fs(P, 5).unwrap();
        let (kappa, v) = soliton_start(mu, &g);
        let res = roothan_solve(kappa, &v, &FixedPointOptions::with_tol(1e-8)).unwrap();
        assert!(res.iterations <= 3, "{} iterations", res.iterations);
        assert_relative_eq!(res.mu, mu, max_relative = 1e-3);
        assert_monotone(&res.lambda_history);
        assert!(res.usable);
    }

    #[test]
    fn symmetric_start_stays_symmetric() {
        let g = grid(200, 16, MeasureMode::Surface);
        let (kappa, v) = soliton_start(3.0, &g);
        let res = roothan_solve(0.9 * kappa, &v, &FixedPointOptions::default()).unwrap();
        assert_monotone(&res.lambda_history);
        let a = res.asymmetry();
        assert!(a * a <= 1e-8, "asymmetry {a}");
    }

    #[test]
    fn converged_point_is_self_consistent() {
        let g = grid(200, 16, MeasureMode::Surface);
        let (kappa, v) = soliton_start(3.5, &g);
        let res = roothan_solve(1.05 * kappa, &v, &FixedPointOptions::default()).unwrap();
        let again = potential_from(&res.u).unwrap();
        let q = g.params.q();
        assert!(q_distance(&again.values, &res.v.values, &g.quad_weights, q) <= 1e-8);
        assert!(
            eqmu_residual(&res.u_eq, res.mu) <= 1e-6,
            "{}",
            eqmu_residual(&res.u_eq, res.mu)
        );
        let n = res.norms;
        assert_relative_eq!(n.x + res.mu * n.y, n.z, max_relative = 1e-6);
        let q1 = evaluate_q(&res.u_eq, res.mu, 1.0).unwrap();
        assert_relative_eq!(res.critical_value(), q1, max_relative = 1e-8);
        assert_relative_eq!(res.critical_value(), res.kappa, max_relative = 1e-6);
    }

    #[test]
    fn broken_symmetry_lowers_critical_value() {
        let g = grid(200, 24, MeasureMode::Surface);
        let mu = 1.2 * mu_fs(P, 5).unwrap();
        let sol = soliton(mu, P).unwrap();
        let w = perturbation_direction(mu, Arc::clone(&g)).unwrap();
        let base = sol.to_field(Arc::clone(&g));
        let amp = 0.3 * base.l2_norm();
        let u = Field {
            grid: Arc::clone(&g),
            values: base
                .values
                .iter()
                .zip(&w.field.values)
                .map(|(a, b)| a + amp * b)
                .collect(),
        };
        let kappa = critical_value(&base);
        let res = roothan_solve(kappa, &potential_from(&u).unwrap(), &FixedPointOptions::default()).unwrap();
        assert_monotone(&res.lambda_history);
        assert!(res.asymmetry() > 1e-3);
        let sym = soliton_norms(res.mu, P, 5, MeasureMode::Surface).unwrap();
        let sym_value = sym.z.powf((P - 2.0) / P);
        assert!(
            res.critical_value() < sym_value,
            "{} vs {}",
            res.critical_value(),
            sym_value
        );
    }

    #[test]
    fn rescale_identities() {
        let g = grid(200, 8, MeasureMode::Surface);
        let u = soliton(3.0, P).unwrap().to_field(Arc::clone(&g));
        let kappa = critical_value(&u);
        let same = rescale_to_eqmu(&u, kappa).unwrap();
        assert_relative_eq!(
            same.values[g.index(100, 3)],
            u.values[g.index(100, 3)],
            max_relative = 1e-12
        );
        let back = rescale_to_eqmu(&u.scaled(2.0), kappa).unwrap();
        assert_relative_eq!(
            back.values[g.index(100, 3)],
            u.values[g.index(100, 3)],
            max_relative = 1e-12
        );
        assert!(matches!(rescale_to_eqmu(&Field::zeros(g), 1.0), Err(Error::ZeroField)));
    }

    #[test]
    fn critical_value_surface_anchor() {
        let g = grid(400, 8, MeasureMode::Surface);
        let u = soliton(mu_fs(P, 5).unwrap(), P).unwrap().to_field(g);
        assert!((critical_value(&u) - 15.65).abs() < 0.05);
    }

    #[test]
    fn asymmetry_examples() {
        let g = grid(100, 40, MeasureMode::Surface);
        let f = |s: f64| (-(s * s)).exp();
        assert!(asymmetry(&Field::from_fn(Arc::clone(&g), |s, _| f(s))) < 1e-14);
        let odd = Field::from_fn(Arc::clone(&g), |s, phi| f(s) * phi.cos());
        assert_relative_eq!(asymmetry(&odd), 1.0, max_relative = 1e-10);
        let mixed = Field::from_fn(g, |s, phi| f(s) * (1.0 + 0.1 * phi.cos()));
        let expect = 0.1 * (0.2f64).sqrt() / (1.0 + 0.01 / 5.0f64).sqrt();
        assert_relative_eq!(asymmetry(&mixed), expect, max_relative = 1e-6);
        assert_relative_eq!(expect, 0.04468, max_relative = 1e-4);
    }

    #[test]
    fn mixing_and_plain_agree() {
        let g = grid(120, 12, MeasureMode::Surface);
        let (kappa, v) = soliton_start(3.0, &g);
        let plain = FixedPointOptions {
            anderson_depth: 0,
            ..FixedPointOptions::default()
        };
        let mixed = FixedPointOptions { mixing: 0.7, ..plain };
        let a = roothan_solve(1.1 * kappa, &v, &plain).unwrap();
        let b = roothan_solve(1.1 * kappa, &v, &mixed).unwrap();
        let c = roothan_solve(1.1 * kappa, &v, &FixedPointOptions::default()).unwrap();
        assert_relative_eq!(a.mu, b.mu, max_relative = 1e-9);
        assert_relative_eq!(a.mu, c.mu, max_relative = 1e-9);
        assert!(c.iterations <= a.iterations);
    }

    #[test]
    fn invalid_inputs() {
        let g = grid(60, 8, MeasureMode::Surface);
        let (kappa, v) = soliton_start(3.0, &g);
        assert!(roothan_solve(-1.0, &v, &FixedPointOptions::default()).is_err());
        assert!(matches!(
            roothan_solve(kappa, &v.scaled(2.0), &FixedPointOptions::default()),
            Err(Error::Normalization { .. })
        ));
        let bad = FixedPointOptions {
            mixing: 0.0,
            ..FixedPointOptions::default()
        };
        assert!(roothan_solve(kappa, &v, &bad).is_err());
    }
}
