use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::CylinderGrid;
use crate::error::{Error, Result};

/// Nodal values of a function `u(s, phi)` on a [`CylinderGrid`].
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<CylinderGrid>,
    pub values: Vec<f64>,
}

/// The three integrals entering every quotient: `X = |grad u|^2`,
/// `Y = |u|_2^2`, `Z = |u|_p^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Norms {
    /// Dirichlet-to-mass ratio `t = X / Y`.
    pub fn t(&self) -> f64 {
        self.x / self.y
    }

    pub fn scaled(&self, factor: f64) -> Norms {
        Norms {
            x: self.x * factor,
            y: self.y * factor,
            z: self.z * factor,
        }
    }

    /// `(X + Lambda Y)^theta Y^{1-theta} / Z^{2/p}`.
    pub fn quotient(&self, lambda: f64, theta: f64, p: f64) -> Result<f64> {
        let base = self.x + lambda * self.y;
        let pow = if base <= 0.0 {
            if theta.fract() != 0.0 {
                return Err(Error::NegativeBase { base, theta });
            }
            base.powi(theta as i32)
        } else {
            base.powf(theta)
        };
        Ok(pow * self.y.powf(1.0 - theta) / self.z.powf(2.0 / p))
    }
}

impl Field {
    pub fn zeros(grid: Arc<CylinderGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<CylinderGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &s in &grid.s_nodes {
            for &phi in &grid.phi_nodes {
                values.push(f(s, phi));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Arc<CylinderGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidField { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Expands interior unknowns: zero at `s = +-L`, pole columns copied from
    /// their neighbours (no-flux condition).
    pub fn from_dofs(grid: Arc<CylinderGrid>, dofs: &[f64]) -> Self {
        let (ns, np) = (grid.n_s, grid.n_phi);
        let ni = np - 2;
        let mut values = vec![0.0; ns * np];
        for i in 1..ns - 1 {
            let row = &dofs[(i - 1) * ni..i * ni];
            let out = &mut values[i * np..(i + 1) * np];
            out[1..np - 1].copy_from_slice(row);
            out[0] = row[0];
            out[np - 1] = row[ni - 1];
        }
        Self { grid, values }
    }

    pub fn to_dofs(&self) -> Vec<f64> {
        let (ns, np) = (self.grid.n_s, self.grid.n_phi);
        let mut out = Vec::with_capacity(self.grid.n_dofs());
        for i in 1..ns - 1 {
            out.extend_from_slice(&self.values[i * np + 1..(i + 1) * np - 1]);
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.grid.quad_weights)
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `|u|_r = (int |u|^r)^{1/r}`.
    pub fn lr_norm(&self, r: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.quad_weights)
            .map(|(v, w)| w * v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }

    /// Angular average `u_bar(s)` at every `s` node.
    pub fn angular_average(&self) -> Vec<f64> {
        let g = &self.grid;
        let mass: f64 = g.phi_weights.iter().sum();
        (0..g.n_s)
            .map(|i| {
                let row = &self.values[i * g.n_phi..(i + 1) * g.n_phi];
                row.iter().zip(&g.phi_weights).map(|(u, w)| u * w).sum::<f64>() / mass
            })
            .collect()
    }

    /// Enforces the candidate-solution sign convention: flips the sign so that
    /// the mass is positive, then rejects values below `-1e-8 max|u|`.
    pub fn normalize_sign(&mut self) -> Result<()> {
        let mass: f64 = self
            .values
            .iter()
            .zip(&self.grid.quad_weights)
            .map(|(v, w)| v * w)
            .sum();
        if mass < 0.0 {
            self.values.iter_mut().for_each(|v| *v = -*v);
        }
        let max = self.max_abs();
        if max == 0.0 {
            return Err(Error::ZeroField);
        }
        if let Some((index, &value)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -1e-8 * max || !v.is_finite())
        {
            return Err(Error::InvalidField { index, value });
        }
        Ok(())
    }
}

/// `X`, `Y`, `Z` of a field over the truncated weighted cylinder. The
/// gradient uses staggered differences; edges touching a pole carry no
/// angular weight.
pub fn evaluate_norms(u: &Field) -> Result<Norms> {
    let g = &*u.grid;
    let p = g.params.p;
    if u.values.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroField);
    }
    let (ns, np) = (g.n_s, g.n_phi);
    let h = g.s_step();
    let mut x = 0.0;
    for i in 0..ns - 1 {
        for j in 1..np - 1 {
            let diff = u.values[(i + 1) * np + j] - u.values[i * np + j];
            x += g.phi_weights[j] / h * diff * diff;
        }
    }
    for i in 0..ns {
        let ws = g.s_weights[i];
        for j in 1..np - 2 {
            let diff = u.values[i * np + j + 1] - u.values[i * np + j];
            x += ws * g.phi_edges[j] * diff * diff;
        }
    }
    let mut y = 0.0;
    let mut z = 0.0;
    for (v, w) in u.values.iter().zip(&g.quad_weights) {
        let a = v.abs();
        y += w * a * a;
        z += w * a.powf(p);
    }
    Ok(Norms { x, y, z })
}

/// The quotient `Q^theta_Lambda[u]`.
pub fn evaluate_q(u: &Field, lambda: f64, theta: f64) -> Result<f64> {
    evaluate_norms(u)?.quotient(lambda, theta, u.grid.params.p)
}
