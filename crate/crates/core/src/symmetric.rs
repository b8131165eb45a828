//! The explicit symmetric soliton, its norms, and the linearization data
//! that locates the onset of symmetry breaking.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::model::{CylinderGrid, Field, MeasureMode, Norms, ProblemParams};

/// `u(s) = A cosh(b s)^{-2/(p-2)}`, the positive even solution of
/// `-u'' + mu u = u^{p-1}` with its maximum at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSolution {
    pub mu: f64,
    pub p: f64,
    pub amplitude: f64,
    pub rate: f64,
}

pub fn soliton(mu: f64, p: f64) -> Result<SymmetricSolution> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("soliton requires mu > 0, got {mu}")));
    }
    if !(p > 2.0) {
        return Err(Error::Domain(format!("soliton requires p > 2, got {p}")));
    }
    Ok(SymmetricSolution {
        mu,
        p,
        amplitude: (mu * p / 2.0).powf(1.0 / (p - 2.0)),
        rate: mu.sqrt() * (p - 2.0) / 2.0,
    })
}

impl SymmetricSolution {
    fn gamma(&self) -> f64 {
        2.0 / (self.p - 2.0)
    }

    pub fn value(&self, s: f64) -> f64 {
        // sech^g computed as exp(-g ln cosh) to stay finite far out
        self.amplitude * (-self.gamma() * ln_cosh(self.rate * s)).exp()
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let bs = self.rate * s;
        -self.gamma() * self.rate * bs.tanh() * self.value(s)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        let bs = self.rate * s;
        let (th, g) = (bs.tanh(), self.gamma());
        let sech2 = 1.0 - th * th;
        g * self.rate * self.rate * (g * th * th - sech2) * self.value(s)
    }

    /// `-u'' + mu u - u^{p-1}` with exact derivatives.
    pub fn residual(&self, s: f64) -> f64 {
        let u = self.value(s);
        -self.second_derivative(s) + self.mu * u - u.powf(self.p - 1.0)
    }

    pub fn to_field(&self, grid: Arc<CylinderGrid>) -> Field {
        let mut f = Field::from_fn(grid, |s, _| self.value(s));
        // Dirichlet ends.
        let np = f.grid.n_phi;
        let n = f.values.len();
        f.values[..np].iter_mut().for_each(|v| *v = 0.0);
        f.values[n - np..].iter_mut().for_each(|v| *v = 0.0);
        f
    }
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `int_R sech^m = sqrt(pi) Gamma(m/2) / Gamma((m+1)/2)`, via log-Gamma.
pub fn sech_power_integral(m: f64) -> f64 {
    (0.5 * std::f64::consts::PI.ln() + ln_gamma(m / 2.0) - ln_gamma((m + 1.0) / 2.0)).exp()
}

/// Closed-form `X`, `Y`, `Z` of the symmetric soliton on the full cylinder.
pub fn soliton_norms(mu: f64, p: f64, d: usize, mode: MeasureMode) -> Result<Norms> {
    let sol = soliton(mu, p)?;
    let m = 2.0 * p / (p - 2.0);
    let z = (p * sol.amplitude.ln() + sech_power_integral(m).ln() - sol.rate.ln()).exp();
    let unit = Norms {
        x: z * (p - 2.0) / (2.0 * p),
        y: z * (p + 2.0) / (2.0 * p * mu),
        z,
    };
    Ok(unit.scaled(mode.sphere_mass(d)))
}

/// Lowest eigenvalue of the linearization on the first spherical harmonic:
/// `d - 1 + mu - mu p^2 / 4`.
pub fn lambda1_h(mu: f64, p: f64, d: usize) -> f64 {
    d as f64 - 1.0 + mu - 0.25 * mu * p * p
}

/// Bifurcation threshold `4 (d - 1) / (p^2 - 4)`.
pub fn mu_fs(p: f64, d: usize) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("mu_FS requires p > 2, got {p}")));
    }
    Ok(4.0 * (d as f64 - 1.0) / (p * p - 4.0))
}

/// Reference value `(d - 1)(6 - p) / (4 (p - 2))`; documentation only.
pub fn lambda_star(p: f64, d: usize) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("lambda_star requires p > 2, got {p}")));
    }
    Ok((d as f64 - 1.0) * (6.0 - p) / (4.0 * (p - 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricCurvePoint {
    pub mu: f64,
    pub lambda: f64,
    pub j: f64,
    pub t: f64,
    pub norms: Norms,
}

/// `mu -> (Lambda_*^theta(mu), J_*^theta(mu))` from the closed forms.
pub fn symmetric_curve(mu_list: &[f64], theta: f64, params: &ProblemParams) -> Result<Vec<SymmetricCurvePoint>> {
    mu_list
        .iter()
        .map(|&mu| {
            let norms = soliton_norms(mu, params.p, params.d, params.measure_mode)?;
            let t = norms.t();
            let lambda = theta * mu - (1.0 - theta) * t;
            let j = theta.powf(theta) * (norms.x + mu * norms.y).powf(theta) * norms.y.powf(1.0 - theta)
                / norms.z.powf(2.0 / params.p);
            Ok(SymmetricCurvePoint {
                mu,
                lambda,
                j,
                t,
                norms,
            })
        })
        .collect()
}

/// Lowest eigenpair of the discretized
/// `-d^2/ds^2 + mu + d - 1 - (p - 1) u_*^{p-2}` on the `s` nodes of the
/// grid, Dirichlet at `s = +-L`. The eigenvector is returned on all `s`
/// nodes, positive, with unit discrete `L^2(ds)` norm.
pub fn linearized_ground_state(mu: f64, p: f64, d: usize, s_nodes: &[f64]) -> Result<(f64, Vec<f64>)> {
    let sol = soliton(mu, p)?;
    let n = s_nodes.len() - 2;
    let h = s_nodes[1] - s_nodes[0];
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = s_nodes[1..n + 1]
        .iter()
        .map(|&s| 2.0 * inv_h2 + mu + d as f64 - 1.0 - (p - 1.0) * sol.value(s).powf(p - 2.0))
        .collect();
    let lambda = lowest_tridiagonal_eigenvalue(&diag, -inv_h2);

    let mut mat = BandMatrix::zeros(n, 1);
    let sigma = lambda - 1e-9 * (1.0 + lambda.abs());
    for i in 0..n {
        mat.add(i, i, diag[i] - sigma);
        if i + 1 < n {
            mat.add(i + 1, i, -inv_h2);
        }
    }
    let chol = mat.cholesky().ok_or(Error::NonConvergence {
        what: "linearized ground state",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let mut v = vec![1.0; n];
    for _ in 0..3 {
        chol.solve_in_place(&mut v);
        let norm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut out = vec![0.0; n + 2];
    out[1..n + 1].copy_from_slice(&v);
    Ok((lambda, out))
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix with constant
/// off-diagonal, by Sturm-sequence bisection.
fn lowest_tridiagonal_eigenvalue(diag: &[f64], off: f64) -> f64 {
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, &a) in diag.iter().enumerate() {
            q = if i == 0 { a - x } else { a - x - off * off / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let radius = 2.0 * off.abs();
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - radius;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + radius;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Direction of negative second variation of `Q^1_mu` at the symmetric
/// soliton.
#[derive(Debug, Clone)]
pub struct DescentDirection {
    /// `w(s, phi) = phi_1(s) cos(phi)`, unit `L^2` norm on the grid.
    pub field: Field,
    /// Ground-state eigenvalue of the linearization.
    pub eigenvalue: f64,
}

/// Builds `w = phi_1(s) cos(phi)` without checking the sign of the
/// eigenvalue; used when probing for the fall-back case below `mu_FS`.
pub fn perturbation_direction(mu: f64, grid: Arc<CylinderGrid>) -> Result<DescentDirection> {
    let params = grid.params;
    let (eigenvalue, phi1) = linearized_ground_state(mu, params.p, params.d, &grid.s_nodes)?;
    let np = grid.n_phi;
    let mut values = Vec::with_capacity(grid.len());
    for &a in &phi1 {
        values.extend(grid.phi_nodes.iter().map(|phi| a * phi.cos()));
    }
    debug_assert_eq!(values.len(), np * grid.n_s);
    let field = Field::from_values(grid, values)?;
    let norm = field.l2_norm();
    Ok(DescentDirection {
        field: field.scaled(1.0 / norm),
        eigenvalue,
    })
}

/// Descent direction for `Q^1_mu` at `u_{mu,*}`; fails when `mu <= mu_FS`
/// on this grid (non-negative ground-state eigenvalue).
pub fn descent_direction(mu: f64, grid: Arc<CylinderGrid>) -> Result<DescentDirection> {
    let dir = perturbation_direction(mu, grid)?;
    if dir.eigenvalue >= 0.0 {
        return Err(Error::Positivity(dir.eigenvalue));
    }
    Ok(dir)
}
