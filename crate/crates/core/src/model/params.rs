use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Normalization of the measure on the sphere factor of the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    /// Uniform probability measure on `S^{d-1}`.
    Probability,
    /// Unnormalized surface measure, total mass `|S^{d-1}|`.
    #[default]
    Surface,
}

impl MeasureMode {
    /// Total mass of the sphere in this normalization.
    pub fn sphere_mass(self, d: usize) -> f64 {
        match self {
            MeasureMode::Probability => 1.0,
            MeasureMode::Surface => sphere_area(d),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            MeasureMode::Probability => 0,
            MeasureMode::Surface => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(MeasureMode::Probability),
            1 => Some(MeasureMode::Surface),
            _ => None,
        }
    }
}

impl fmt::Display for MeasureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureMode::Probability => f.write_str("probability"),
            MeasureMode::Surface => f.write_str("surface"),
        }
    }
}

impl FromStr for MeasureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probability" | "prob" => Ok(MeasureMode::Probability),
            "surface" => Ok(MeasureMode::Surface),
            other => Err(Error::Config(format!("unknown measure mode `{other}`"))),
        }
    }
}

/// `|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// Critical interpolation exponent `d (p - 2) / (2 p)`.
pub fn theta_critical(p: f64, d: usize) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("theta_critical requires p > 2, got {p}")));
    }
    let d = d as f64;
    Ok(d * (p - 2.0) / (2.0 * p))
}

/// Problem parameters: dimension, exponent, interpolation exponent and the
/// sphere-measure convention. Construction validates the admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    pub p: f64,
    pub theta: f64,
    pub measure_mode: MeasureMode,
}

impl ProblemParams {
    pub fn new(d: usize, p: f64, theta: f64, measure_mode: MeasureMode) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3, got {d}")));
        }
        if !p.is_finite() || !(p > 2.0) || !(p < critical_sobolev_exponent(d)) {
            return Err(Error::Domain(format!(
                "exponent p = {p} outside (2, {})",
                critical_sobolev_exponent(d)
            )));
        }
        let lower = theta_critical(p, d)?;
        if !theta.is_finite() || theta < lower - 1e-12 || theta > 1.0 {
            return Err(Error::ThetaOutOfRange { theta, lower });
        }
        Ok(Self {
            d,
            p,
            theta,
            measure_mode,
        })
    }

    /// Same `d`, `p` and measure with the critical `theta = Theta(p, d)`.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.d, self.p, theta, self.measure_mode)
    }

    pub fn big_theta(&self) -> f64 {
        self.d as f64 * (self.p - 2.0) / (2.0 * self.p)
    }

    /// Hölder conjugate exponent `p / (p - 2)` used to normalize potentials.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 2.0)
    }

    pub fn a_c(&self) -> f64 {
        (self.d as f64 - 2.0) / 2.0
    }

    /// `p*(theta, d) = 2d / (d - 2 theta)`.
    pub fn p_star(&self) -> f64 {
        let d = self.d as f64;
        2.0 * d / (d - 2.0 * self.theta)
    }

    pub fn sphere_mass(&self) -> f64 {
        self.measure_mode.sphere_mass(self.d)
    }
}

/// `2* = 2d / (d - 2)`.
pub fn critical_sobolev_exponent(d: usize) -> f64 {
    let d = d as f64;
    2.0 * d / (d - 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theta_critical_values() {
        assert_relative_eq!(
            theta_critical(2.8, 5).unwrap(),
            0.714_285_714_285_714_3,
            epsilon = 1e-12
        );
        assert!(theta_critical(2.0 + 1e-12, 7).unwrap() < 1e-11);
        assert_relative_eq!(theta_critical(10.0 / 3.0, 5).unwrap(), 1.0, epsilon = 1e-12);
        assert!(theta_critical(2.0, 5).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(5, 2.8, 0.8, MeasureMode::Surface).is_ok());
        assert!(ProblemParams::new(5, 10.0 / 3.0, 1.0, MeasureMode::Surface).is_err());
        assert!(ProblemParams::new(5, 2.0, 1.0, MeasureMode::Surface).is_err());
        assert!(ProblemParams::new(2, 2.8, 1.0, MeasureMode::Surface).is_err());
        assert!(matches!(
            ProblemParams::new(5, 2.8, 0.5, MeasureMode::Surface),
            Err(Error::ThetaOutOfRange { .. })
        ));
        let pp = ProblemParams::new(5, 2.8, 1.0, MeasureMode::Probability).unwrap();
        assert_relative_eq!(pp.q(), 3.5, epsilon = 1e-12);
        assert_relative_eq!(pp.a_c(), 1.5);
        assert_relative_eq!(pp.p_star(), 10.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn measure_mode_parse() {
        assert_eq!("surface".parse::<MeasureMode>().unwrap(), MeasureMode::Surface);
        assert_eq!("probability".parse::<MeasureMode>().unwrap(), MeasureMode::Probability);
        assert!("lebesgue".parse::<MeasureMode>().is_err());
    }
}
