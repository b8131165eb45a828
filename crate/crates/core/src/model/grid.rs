//! Truncated tensor grid on the cylinder `[-L, L] x [0, pi]`.
//!
//! Fields depend on the axial variable `s` and on the polar angle `phi`
//! measured from a fixed axis of `S^{d-1}`. The angular measure is
//! `sin^{d-2}(phi) dphi`, normalized either to the uniform probability
//! measure or to the surface measure.
//!
//! The `s` nodes are uniform with homogeneous Dirichlet values at both ends.
//! The `phi` nodes are uniform in `phi` (cosine-clustered in `cos phi`) and
//! include both poles. Angular quadrature weights are interpolatory on the
//! interior nodes, exact for polynomials in `cos phi` of degree
//! `n_phi - 3`, and vanish at the poles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::ProblemParams;
use crate::error::{Error, Result};

pub const MIN_S_NODES: usize = 16;
pub const MIN_PHI_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    pub params: ProblemParams,
    pub half_length: f64,
    pub n_s: usize,
    pub n_phi: usize,
    pub s_nodes: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// Trapezoid weights in `s` (half steps at `s = +-L`).
    pub s_weights: Vec<f64>,
    /// Angular weights including the measure normalization; zero at the poles.
    pub phi_weights: Vec<f64>,
    /// Angular flux coefficients `c sin^{d-2}(phi_{j+1/2}) / dphi` for the
    /// edge between `phi_j` and `phi_{j+1}`.
    pub phi_edges: Vec<f64>,
    /// Tensor-product weights, row-major with `s` as the slow index.
    pub quad_weights: Vec<f64>,
}

/// Default truncation half-length for a branch whose smallest `mu` is `mu_min`.
pub fn default_half_length(mu_min: f64) -> f64 {
    (12.0 / mu_min.sqrt()).max(8.0)
}

/// Builds the tensor grid; see the module documentation for the node layout.
pub fn build_grid(half_length: f64, n_s: usize, n_phi: usize, params: ProblemParams) -> Result<CylinderGrid> {
    if !(half_length > 0.0) || !half_length.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "half-length must be positive, got {half_length}"
        )));
    }
    if n_s < MIN_S_NODES {
        return Err(Error::InvalidGrid(format!("n_s = {n_s} < {MIN_S_NODES}")));
    }
    if n_phi < MIN_PHI_NODES {
        return Err(Error::InvalidGrid(format!("n_phi = {n_phi} < {MIN_PHI_NODES}")));
    }
    let h = 2.0 * half_length / (n_s - 1) as f64;
    let s_nodes: Vec<f64> = (0..n_s)
        .map(|i| {
            if i == n_s - 1 {
                half_length
            } else {
                -half_length + i as f64 * h
            }
        })
        .collect();
    let mut s_weights = vec![h; n_s];
    s_weights[0] = 0.5 * h;
    s_weights[n_s - 1] = 0.5 * h;

    let dphi = PI / (n_phi - 1) as f64;
    let phi_nodes: Vec<f64> = (0..n_phi)
        .map(|j| if j == n_phi - 1 { PI } else { j as f64 * dphi })
        .collect();

    let n = params.d - 2;
    let total = sine_power_moment(n, 0);
    let scale = params.sphere_mass() / total;
    let interior = interpolatory_weights(n, &phi_nodes[1..n_phi - 1])?;
    let mut phi_weights = vec![0.0; n_phi];
    for (w, raw) in phi_weights[1..n_phi - 1].iter_mut().zip(interior) {
        *w = raw * scale;
    }
    let phi_edges: Vec<f64> = (0..n_phi - 1)
        .map(|j| {
            let mid = 0.5 * (phi_nodes[j] + phi_nodes[j + 1]);
            scale * mid.sin().powi(n as i32) / dphi
        })
        .collect();

    let mut quad_weights = Vec::with_capacity(n_s * n_phi);
    for ws in &s_weights {
        quad_weights.extend(phi_weights.iter().map(|wp| ws * wp));
    }
    Ok(CylinderGrid {
        params,
        half_length,
        n_s,
        n_phi,
        s_nodes,
        phi_nodes,
        s_weights,
        phi_weights,
        phi_edges,
        quad_weights,
    })
}

impl CylinderGrid {
    #[inline]
    pub fn len(&self) -> usize {
        self.n_s * self.n_phi
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    pub fn s_step(&self) -> f64 {
        2.0 * self.half_length / (self.n_s - 1) as f64
    }

    pub fn phi_step(&self) -> f64 {
        PI / (self.n_phi - 1) as f64
    }

    /// Number of interior `s` rows carrying unknowns.
    pub fn n_s_interior(&self) -> usize {
        self.n_s - 2
    }

    /// Number of interior `phi` columns carrying unknowns (poles excluded).
    pub fn n_phi_interior(&self) -> usize {
        self.n_phi - 2
    }

    pub fn n_dofs(&self) -> usize {
        self.n_s_interior() * self.n_phi_interior()
    }

    /// Mass (quadrature weight) of every interior unknown, in unknown order.
    pub fn dof_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_dofs());
        for i in 1..self.n_s - 1 {
            for j in 1..self.n_phi - 1 {
                out.push(self.quad_weights[self.index(i, j)]);
            }
        }
        out
    }

    /// Quadrature of a function of `(s, phi)` sampled at the nodes.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, &s) in self.s_nodes.iter().enumerate() {
            for (j, &phi) in self.phi_nodes.iter().enumerate() {
                let w = self.quad_weights[self.index(i, j)];
                if w != 0.0 {
                    acc += w * f(s, phi);
                }
            }
        }
        acc
    }

    /// Angular quadrature of `g(phi)` in the grid's measure.
    pub fn integrate_angular(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.phi_nodes
            .iter()
            .zip(&self.phi_weights)
            .map(|(&phi, &w)| w * g(phi))
            .sum()
    }
}

/// `int_0^pi cos(k phi) sin^n(phi) dphi`, computed exactly from the finite
/// Fourier expansion of `sin^n`.
pub fn sine_power_moment(n: usize, k: usize) -> f64 {
    let binom = |a: usize, b: usize| -> f64 {
        let mut c = 1.0;
        for t in 0..b {
            c = c * (a - t) as f64 / (t + 1) as f64;
        }
        c
    };
    let pow2 = 2f64.powi(n as i32);
    let mut acc = 0.0;
    if n % 2 == 1 {
        // sin^n = 2^{1-n} sum_j (-1)^{(n-1)/2-j} C(n,j) sin((n-2j) phi)
        let half = (n - 1) / 2;
        for j in 0..=half {
            let sign = if (half - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            let m = n - 2 * j;
            // int_0^pi cos(k x) sin(m x) dx
            let integral = if (k + m).is_multiple_of(2) {
                0.0
            } else {
                let (m, k) = (m as f64, k as f64);
                2.0 * m / (m * m - k * k)
            };
            acc += sign * binom(n, j) * integral;
        }
        acc * 2.0 / pow2
    } else {
        // sin^n = 2^{-n} C(n, n/2) + 2^{1-n} sum_{j<n/2} (-1)^{n/2-j} C(n,j) cos((n-2j) phi)
        let half = n / 2;
        if k == 0 {
            acc += binom(n, half) / pow2 * PI;
        }
        for j in 0..half {
            let m = n - 2 * j;
            if m == k {
                let sign = if (half - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += 2.0 / pow2 * sign * binom(n, j) * PI / 2.0;
            }
        }
        acc
    }
}

/// Interpolatory weights on the given nodes for `int_0^pi f sin^n dphi`,
/// exact on `span{cos(k phi) : k < nodes.len()}`.
fn interpolatory_weights(n: usize, nodes: &[f64]) -> Result<Vec<f64>> {
    let m = nodes.len();
    let vander = DMatrix::from_fn(m, m, |k, j| (k as f64 * nodes[j]).cos());
    let moments = DVector::from_fn(m, |k, _| sine_power_moment(n, k));
    let w = vander
        .lu()
        .solve(&moments)
        .ok_or_else(|| Error::InvalidGrid("singular angular moment system".into()))?;
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidGrid(
            "angular quadrature produced non-positive weights".into(),
        ));
    }
    Ok(w.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{sphere_area, MeasureMode};
    use approx::assert_relative_eq;
    use statrs::function::beta::beta;

    fn params(d: usize, mode: MeasureMode) -> ProblemParams {
        let p = 2.0 + 0.5 * (super::super::params::critical_sobolev_exponent(d) - 2.0);
        ProblemParams {
            d,
            p,
            theta: 1.0,
            measure_mode: mode,
        }
    }

    // Independent 1D oracle: int_0^pi cos^{2k} sin^n = B(k + 1/2, (n+1)/2).
    fn cos_moment_oracle(n: usize, power: usize) -> f64 {
        if power % 2 == 1 {
            0.0
        } else {
            beta(power as f64 / 2.0 + 0.5, (n as f64 + 1.0) / 2.0)
        }
    }

    #[test]
    fn moments_match_beta_function() {
        for n in 1..8 {
            assert_relative_eq!(sine_power_moment(n, 0), cos_moment_oracle(n, 0), max_relative = 1e-13);
            // cos(2 phi) = 2 cos^2 - 1
            let expect = 2.0 * cos_moment_oracle(n, 2) - cos_moment_oracle(n, 0);
            assert_relative_eq!(sine_power_moment(n, 2), expect, epsilon = 1e-13);
            assert_eq!(sine_power_moment(n, 3), 0.0);
        }
    }

    #[test]
    fn constant_integrates_to_cylinder_measure() {
        for d in 3..8 {
            let g = build_grid(10.0, 40, 24, params(d, MeasureMode::Probability)).unwrap();
            assert_relative_eq!(g.integrate(|_, _| 1.0), 20.0, max_relative = 1e-10);
            let g = build_grid(10.0, 40, 24, params(d, MeasureMode::Surface)).unwrap();
            assert_relative_eq!(g.integrate(|_, _| 1.0), 20.0 * sphere_area(d), max_relative = 1e-10);
        }
    }

    #[test]
    fn cos_squared_average_is_one_over_d() {
        let g = build_grid(10.0, 64, 48, params(5, MeasureMode::Probability)).unwrap();
        let v = g.integrate(|_, phi| phi.cos().powi(2));
        assert_relative_eq!(v, 4.0, max_relative = 1e-10);
    }

    #[test]
    fn polynomial_exactness_up_to_rule_degree() {
        for d in [3, 4, 5, 6, 9] {
            let n_phi = 20;
            let g = build_grid(1.0, 16, n_phi, params(d, MeasureMode::Probability)).unwrap();
            let total = cos_moment_oracle(d - 2, 0);
            for power in 0..=(n_phi - 3) {
                let got = g.integrate_angular(|phi| phi.cos().powi(power as i32));
                let want = cos_moment_oracle(d - 2, power) / total;
                assert!((got - want).abs() < 1e-10, "d={d} power={power}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn pole_weights_vanish_and_nodes_increase() {
        let g = build_grid(8.0, 32, 16, params(5, MeasureMode::Surface)).unwrap();
        assert_eq!(g.phi_weights[0], 0.0);
        assert_eq!(g.phi_weights[15], 0.0);
        assert!(g.phi_weights[1..15].iter().all(|&w| w > 0.0));
        assert!(g.s_nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.phi_nodes.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.quad_weights[g.index(3, 0)], 0.0);
    }

    #[test]
    fn rejects_small_grids() {
        let pp = params(5, MeasureMode::Surface);
        assert!(build_grid(10.0, 15, 16, pp).is_err());
        assert!(build_grid(10.0, 16, 7, pp).is_err());
        assert!(build_grid(0.0, 16, 8, pp).is_err());
    }

    #[test]
    fn default_half_length_floor() {
        assert_eq!(default_half_length(4.0), 8.0);
        assert_relative_eq!(default_half_length(1.0), 12.0);
    }
}
