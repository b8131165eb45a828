//! Ground state of `-Delta - kappa V` on the truncated cylinder.
//!
//! The operator is discretized as a symmetric pencil `(K - kappa W V, W)` on
//! the interior unknowns, where `K` is the staggered-difference stiffness
//! matrix and `W` the diagonal quadrature mass. The ground state is found by
//! shifted inverse iteration; the shifted matrix is factored once per shift
//! with a banded Cholesky, which also certifies that the shift lies below the
//! spectrum.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{BandCholesky, BandMatrix};
use crate::model::{CylinderGrid, Field};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;
const MAX_INVERSE_ITERATIONS: usize = 500;
const SHIFT_GAP: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    /// Eigenfunction with unit `L^2` norm and positive mass.
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
}

/// Discrete `-Delta - kappa V` acting on interior unknowns.
#[derive(Debug, Clone)]
pub struct CylinderOperator {
    grid: Arc<CylinderGrid>,
    /// `kappa V_k W_k` per unknown.
    potential: Vec<f64>,
    weights: Vec<f64>,
    s_coef: Vec<f64>,
    phi_coef: Vec<f64>,
}

/// Assembles the operator for potential `V` (a field on the same grid).
pub fn assemble_operator(kappa: f64, potential: &Field) -> CylinderOperator {
    let grid = Arc::clone(&potential.grid);
    let weights = grid.dof_weights();
    let v = potential.to_dofs();
    let potential = v.iter().zip(&weights).map(|(v, w)| kappa * v * w).collect();
    let h = grid.s_step();
    let s_coef = grid.phi_weights[1..grid.n_phi - 1].iter().map(|w| w / h).collect();
    // Edge j joins interior columns j and j + 1 (grid columns j + 1, j + 2).
    let phi_coef = grid.phi_edges[1..grid.n_phi - 2].to_vec();
    CylinderOperator {
        grid,
        potential,
        weights,
        s_coef,
        phi_coef,
    }
}

impl CylinderOperator {
    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `y = (K - kappa W V) x` on unknowns.
    pub fn apply_stiffness(&self, x: &[f64], y: &mut [f64]) {
        let g = &*self.grid;
        let (ni, nj) = (g.n_s_interior(), g.n_phi_interior());
        for i in 0..ni {
            let ws = g.s_weights[i + 1];
            for j in 0..nj {
                let k = i * nj + j;
                let xk = x[k];
                let cs = self.s_coef[j];
                let mut acc = 2.0 * cs * xk;
                if i > 0 {
                    acc -= cs * x[k - nj];
                }
                if i + 1 < ni {
                    acc -= cs * x[k + nj];
                }
                if j > 0 {
                    let c = ws * self.phi_coef[j - 1];
                    acc += c * (xk - x[k - 1]);
                }
                if j + 1 < nj {
                    let c = ws * self.phi_coef[j];
                    acc += c * (xk - x[k + 1]);
                }
                y[k] = acc - self.potential[k] * xk;
            }
        }
    }

    /// `W^{-1} (K - kappa W V) u`, the operator in the weighted inner product.
    pub fn apply(&self, u: &Field) -> Field {
        let x = u.to_dofs();
        let mut y = vec![0.0; x.len()];
        self.apply_stiffness(&x, &mut y);
        y.iter_mut().zip(&self.weights).for_each(|(v, w)| *v /= w);
        Field::from_dofs(Arc::clone(&self.grid), &y)
    }

    /// Banded `K - kappa W V - sigma W`.
    pub fn shifted_band(&self, sigma: f64) -> BandMatrix {
        let g = &*self.grid;
        let (ni, nj) = (g.n_s_interior(), g.n_phi_interior());
        let mut band = BandMatrix::zeros(ni * nj, nj);
        for i in 0..ni {
            let ws = g.s_weights[i + 1];
            for j in 0..nj {
                let k = i * nj + j;
                let cs = self.s_coef[j];
                band.add(k, k, 2.0 * cs - self.potential[k] - sigma * self.weights[k]);
                if i > 0 {
                    band.add(k, k - nj, -cs);
                }
                if j > 0 {
                    let c = ws * self.phi_coef[j - 1];
                    band.add(k, k, c);
                    band.add(k - 1, k - 1, c);
                    band.add(k, k - 1, -c);
                }
            }
        }
        band
    }

    /// Rayleigh quotient `x^T A x / x^T W x`.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply_stiffness(x, &mut y);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        num / self.mass_norm_sq(x)
    }

    fn mass_norm_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }

    /// `|W^{-1}(A x - theta W x)|_W` for `|x|_W = 1`.
    fn residual(&self, x: &[f64], theta: f64, scratch: &mut [f64]) -> f64 {
        self.apply_stiffness(x, scratch);
        scratch
            .iter()
            .zip(x)
            .zip(&self.weights)
            .map(|((ax, xk), w)| {
                let r = ax - theta * w * xk;
                r * r / w
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Checks `V >= 0` and `|V|_q = 1` to `1e-8`.
pub fn check_potential(potential: &Field) -> Result<()> {
    let q = potential.grid.params.q();
    if let Some((index, &value)) = potential.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidField { index, value });
    }
    let norm = potential.lr_norm(q);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Normalization { norm, q });
    }
    Ok(())
}

/// Lowest eigenpair of `-Delta - kappa V`.
pub fn lowest_eigenpair(kappa: f64, potential: &Field, tol: f64) -> Result<EigenResult> {
    check_potential(potential)?;
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be non-negative, got {kappa}")));
    }
    let op = assemble_operator(kappa, potential);
    solve_ground_state(&op, None, tol)
}

/// Shifted inverse iteration from an optional warm start (unknown vector).
pub fn solve_ground_state(op: &CylinderOperator, warm: Option<&[f64]>, tol: f64) -> Result<EigenResult> {
    let n = op.dim();
    let grid = Arc::clone(op.grid());
    let mut x: Vec<f64> = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => default_guess(&grid),
    };
    normalize(op, &mut x);
    let mut theta = op.rayleigh_quotient(&x);
    let mut scratch = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    let (mut chol, mut sigma) = factor_below(op, theta - SHIFT_GAP);
    let mut residual = op.residual(&x, theta, &mut scratch);
    let mut iterations = 0;
    let mut since_factor = 0;
    while residual > tol {
        if iterations >= MAX_INVERSE_ITERATIONS {
            return Err(Error::NonConvergence {
                what: "inverse iteration",
                iterations,
                residual,
            });
        }
        rhs.iter_mut()
            .zip(&x)
            .zip(op.weights())
            .for_each(|((r, xk), w)| *r = w * xk);
        chol.solve_in_place(&mut rhs);
        std::mem::swap(&mut x, &mut rhs);
        normalize(op, &mut x);
        theta = op.rayleigh_quotient(&x);
        residual = op.residual(&x, theta, &mut scratch);
        iterations += 1;
        since_factor += 1;
        // A poor warm start leaves the shift far below the converged value.
        if since_factor >= 6 && theta - sigma > 4.0 * SHIFT_GAP && residual > tol {
            let (c, s) = factor_below(op, theta - SHIFT_GAP);
            chol = c;
            sigma = s;
            since_factor = 0;
        }
    }
    if x.iter().zip(op.weights()).map(|(v, w)| v * w).sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let mut u = Field::from_dofs(grid, &x);
    u.normalize_sign()?;
    Ok(EigenResult {
        lambda: theta,
        u,
        iterations,
        residual,
    })
}

/// Factors `A - sigma W`, lowering `sigma` until the matrix is positive
/// definite (i.e. `sigma` is below the lowest eigenvalue).
fn factor_below(op: &CylinderOperator, start: f64) -> (BandCholesky, f64) {
    let mut gap = SHIFT_GAP;
    let mut sigma = start;
    loop {
        if let Some(c) = op.shifted_band(sigma).cholesky() {
            return (c, sigma);
        }
        gap *= 2.0;
        sigma = start + SHIFT_GAP - gap;
    }
}

fn normalize(op: &CylinderOperator, x: &mut [f64]) {
    let norm = op.mass_norm_sq(x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

fn default_guess(grid: &CylinderGrid) -> Vec<f64> {
    let l = grid.half_length;
    let mut out = Vec::with_capacity(grid.n_dofs());
    for &s in &grid.s_nodes[1..grid.n_s - 1] {
        let a = (std::f64::consts::FRAC_PI_2 * s / l).cos();
        out.extend(std::iter::repeat_n(a, grid.n_phi_interior()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, evaluate_norms, MeasureMode, ProblemParams};
    use crate::symmetric::{mu_fs, soliton};
    use approx::assert_relative_eq;

    const P: f64 = 2.8;

    fn grid(l: f64, ns: usize, nphi: usize, mode: MeasureMode) -> Arc<CylinderGrid> {
        let pp = ProblemParams::new(5, P, 1.0, mode).unwrap();
        Arc::new(build_grid(l, ns, nphi, pp).unwrap())
    }

    /// Normalized soliton potential and the matching kappa.
    pub(crate) fn soliton_potential(mu: f64, g: &Arc<CylinderGrid>) -> (f64, Field) {
        let u = soliton(mu, P).unwrap().to_field(Arc::clone(g));
        let z = evaluate_norms(&u).unwrap().z;
        let kappa = z.powf((P - 2.0) / P);
        let v = Field::from_fn(Arc::clone(g), |s, _| {
            soliton(mu, P).unwrap().value(s).powf(P - 2.0) / kappa
        });
        (kappa, v)
    }

    fn constant_potential(g: &Arc<CylinderGrid>) -> Field {
        let q = g.params.q();
        let total: f64 = g.quad_weights.iter().sum();
        Field::from_fn(Arc::clone(g), |_, _| total.powf(-1.0 / q))
    }

    fn pseudo_random(seed: u64, n: usize) -> Vec<f64> {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn zero_kappa_gives_dirichlet_eigenvalue() {
        let g = grid(10.0, 200, 16, MeasureMode::Probability);
        let v = constant_potential(&g);
        let res = lowest_eigenpair(0.0, &v, DEFAULT_EIGEN_TOL).unwrap();
        let expect = (std::f64::consts::PI / 20.0).powi(2);
        assert_relative_eq!(res.lambda, expect, max_relative = 0.02);
        assert_relative_eq!(res.lambda, 0.02467, max_relative = 0.02);
        assert_relative_eq!(res.u.l2_norm(), 1.0, max_relative = 1e-12);
        assert!(res.residual <= DEFAULT_EIGEN_TOL);
    }

    #[test]
    fn soliton_potential_probability_mode() {
        let g = grid(10.0, 400, 16, MeasureMode::Probability);
        let mu = mu_fs(P, 5).unwrap();
        let (kappa, v) = soliton_potential(mu, &g);
        assert!((kappa - 6.149).abs() < 2e-3);
        let res = lowest_eigenpair(kappa, &v, DEFAULT_EIGEN_TOL).unwrap();
        assert_relative_eq!(res.lambda, -mu, max_relative = 1e-3);
        let avg = res.u.angular_average();
        let mut var = 0.0;
        for i in 0..g.n_s {
            for j in 0..g.n_phi {
                var += g.quad_weights[g.index(i, j)] * (res.u.at(i, j) - avg[i]).powi(2);
            }
        }
        assert!(var <= 1e-8, "angular variance {var}");
    }

    #[test]
    fn eigenvalue_decreases_with_kappa() {
        let g = grid(10.0, 100, 16, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(3.0, &g);
        let a = lowest_eigenpair(0.8 * kappa, &v, DEFAULT_EIGEN_TOL).unwrap().lambda;
        let b = lowest_eigenpair(kappa, &v, DEFAULT_EIGEN_TOL).unwrap().lambda;
        assert!(b < a);
    }

    #[test]
    fn rejects_unnormalized_potential() {
        let g = grid(10.0, 50, 16, MeasureMode::Surface);
        let v = constant_potential(&g).scaled(1.1);
        assert!(matches!(
            lowest_eigenpair(1.0, &v, 1e-9),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn operator_is_self_adjoint() {
        let g = grid(6.0, 40, 12, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(3.0, &g);
        let op = assemble_operator(kappa, &v);
        for seed in 0..10 {
            let a = Field::from_dofs(Arc::clone(&g), &pseudo_random(seed, g.n_dofs()));
            let b = Field::from_dofs(Arc::clone(&g), &pseudo_random(seed + 100, g.n_dofs()));
            let (aa, ab) = (op.apply(&a), op.apply(&b));
            let lhs = interior_dot(&g, &aa, &b);
            let rhs = interior_dot(&g, &a, &ab);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    fn interior_dot(g: &CylinderGrid, a: &Field, b: &Field) -> f64 {
        let w = g.dof_weights();
        a.to_dofs()
            .iter()
            .zip(b.to_dofs())
            .zip(w)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    #[test]
    fn band_matches_stencil() {
        let g = grid(6.0, 20, 10, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(3.0, &g);
        let op = assemble_operator(kappa, &v);
        let x = pseudo_random(7, g.n_dofs());
        let mut y1 = vec![0.0; x.len()];
        let mut y2 = vec![0.0; x.len()];
        op.apply_stiffness(&x, &mut y1);
        op.shifted_band(0.0).mul_vec(&x, &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn angular_part_annihilates_constants() {
        let g = grid(8.0, 60, 20, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(3.0, &g);
        let op = assemble_operator(kappa, &v);
        let f = |s: f64| (-(s * s) / 2.0).exp();
        let u = Field::from_fn(Arc::clone(&g), |s, _| f(s));
        let au = op.apply(&u);
        let h = g.s_step();
        let sol = soliton(3.0, P).unwrap();
        for i in 1..g.n_s - 1 {
            let s = g.s_nodes[i];
            let lap = -(f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
            let expect = lap - sol.value(s).powf(P - 2.0) * f(s);
            for j in 1..g.n_phi - 1 {
                assert!((au.at(i, j) - expect).abs() < 1e-9 * (1.0 + expect.abs()));
            }
        }
    }

    fn first_harmonic_error(nphi: usize) -> f64 {
        let g = grid(8.0, 40, nphi, MeasureMode::Surface);
        let v = constant_potential(&g);
        let op = assemble_operator(0.0, &v);
        let f = |s: f64| (-(s * s) / 2.0).exp();
        let h = g.s_step();
        let u = Field::from_fn(Arc::clone(&g), |s, phi| f(s) * phi.cos());
        let au = op.apply(&u);
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 1..g.n_s - 1 {
            let s = g.s_nodes[i];
            let lap = -(f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
            for j in 1..g.n_phi - 1 {
                let phi = g.phi_nodes[j];
                let expect = (lap + 4.0 * f(s)) * phi.cos();
                let w = g.quad_weights[g.index(i, j)];
                err += w * (au.at(i, j) - expect).powi(2);
                norm += w * expect.powi(2);
            }
        }
        (err / norm).sqrt()
    }

    #[test]
    fn first_harmonic_eigenvalue_is_d_minus_one() {
        let e1 = first_harmonic_error(24);
        let e2 = first_harmonic_error(48);
        assert!(e2 < 5e-3, "{e2}");
        assert!(e1 / e2 > 3.0, "not second order: {e1} {e2}");
    }

    #[test]
    fn rayleigh_quotient_bounded_below() {
        let g = grid(8.0, 60, 16, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(4.0, &g);
        let res = lowest_eigenpair(kappa, &v, DEFAULT_EIGEN_TOL).unwrap();
        let op = assemble_operator(kappa, &v);
        for seed in 0..20 {
            let x = pseudo_random(seed, g.n_dofs());
            assert!(op.rayleigh_quotient(&x) >= res.lambda - 1e-9);
        }
    }

    #[test]
    fn soliton_eigenvalue_converges_at_second_order() {
        let mu = mu_fs(P, 5).unwrap();
        let err = |ns: usize| {
            let g = grid(10.0, ns, 8, MeasureMode::Probability);
            let (kappa, v) = soliton_potential(mu, &g);
            (lowest_eigenpair(kappa, &v, 1e-11).unwrap().lambda + mu).abs()
        };
        let (e1, e2, e3) = (err(100), err(200), err(400));
        let order = ((e1 / e2).log2() + (e2 / e3).log2()) / 2.0;
        assert!(order >= 1.8, "order {order}: {e1} {e2} {e3}");
    }

    #[test]
    fn second_variation_negative_above_bifurcation() {
        let g = grid(10.0, 200, 24, MeasureMode::Surface);
        let mu = 1.2 * mu_fs(P, 5).unwrap();
        let sol = soliton(mu, P).unwrap();
        // Linearization -Delta + mu - (p - 1) u^{p-2} as a normalized potential.
        let raw = Field::from_fn(Arc::clone(&g), |s, _| sol.value(s).powf(P - 2.0));
        let norm = raw.lr_norm(g.params.q());
        let op = assemble_operator((P - 1.0) * norm, &raw.scaled(1.0 / norm));
        let w = crate::symmetric::descent_direction(mu, Arc::clone(&g)).unwrap();
        let form = op.rayleigh_quotient(&w.field.to_dofs()) + mu;
        assert!(form < 0.0, "{form}");
        assert!((form - w.eigenvalue).abs() < 0.05 * w.eigenvalue.abs());
    }

    #[test]
    fn warm_start_cuts_iterations() {
        let g = grid(8.0, 80, 16, MeasureMode::Surface);
        let (kappa, v) = soliton_potential(4.0, &g);
        let op = assemble_operator(kappa, &v);
        let cold = solve_ground_state(&op, None, DEFAULT_EIGEN_TOL).unwrap();
        let warm = solve_ground_state(&op, Some(&cold.u.to_dofs()), DEFAULT_EIGEN_TOL).unwrap();
        assert!(warm.iterations <= 1);
        assert_relative_eq!(warm.lambda, cold.lambda, max_relative = 1e-12);
    }
}
