//! Run configuration: a JSON file whose missing fields take defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::BranchOptions;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointOptions;
use crate::model::{build_grid, theta_critical, CylinderGrid, MeasureMode, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Stopping tolerance on the eigenvalue sequence of the fixed point.
    pub fixed_point: f64,
    /// Stopping tolerance on the potential update.
    pub potential: f64,
    /// Residual tolerance of the inner eigen-solve.
    pub eigen: f64,
    /// Relative bracket width of the radial shooting.
    pub shooting: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let fp = FixedPointOptions::default();
        Self {
            fixed_point: fp.tol,
            potential: fp.potential_tol,
            eigen: fp.eigen_tol,
            shooting: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub p: f64,
    pub theta_list: Vec<f64>,
    pub measure_mode: MeasureMode,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub n_s: usize,
    pub n_phi: usize,
    pub mu0_factor: f64,
    /// Initial perturbation relative to the `L^2` norm of the soliton.
    pub eps: f64,
    pub eta: Option<f64>,
    pub kappa_stop: Option<f64>,
    /// Number of symmetric grid solutions below `mu_FS`.
    pub symmetric_points: usize,
    /// Number of samples of the closed-form symmetric curves.
    pub curve_points: usize,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub run_id: String,
}

/// Default theta sweep at `d = 5`, `p = 2.8`.
pub const DEFAULT_THETAS: [f64; 8] = [5.0 / 7.0, 0.72, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 5,
            p: 2.8,
            theta_list: DEFAULT_THETAS.to_vec(),
            measure_mode: MeasureMode::Surface,
            half_length: 8.0,
            n_s: 200,
            n_phi: 32,
            mu0_factor: 1.2,
            eps: 0.05,
            eta: None,
            kappa_stop: None,
            symmetric_points: 40,
            curve_points: 201,
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
            run_id: "run".into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p", self.p),
            ("L", self.half_length),
            ("mu0_factor", self.mu0_factor),
            ("tolerances.fixed_point", self.tolerances.fixed_point),
            ("tolerances.potential", self.tolerances.potential),
            ("tolerances.eigen", self.tolerances.eigen),
            ("tolerances.shooting", self.tolerances.shooting),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be non-negative, got {}", self.eps)));
        }
        for (name, v) in [("eta", self.eta), ("kappa_stop", self.kappa_stop)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.d < 2 || self.n_s < 4 || self.n_phi < 4 || self.curve_points < 2 {
            return Err(Error::Config(
                "d >= 2, n_s >= 4, n_phi >= 4 and curve_points >= 2 required".into(),
            ));
        }
        if self.theta_list.is_empty() {
            return Err(Error::Config("theta_list is empty".into()));
        }
        if self.run_id.is_empty() {
            return Err(Error::Config("run_id is empty".into()));
        }
        let lower = theta_critical(self.p, self.d)?;
        for &theta in &self.theta_list {
            // Decimal inputs such as 0.7143 for 5/7 sit within rounding of the bound.
            if !(theta >= lower - 1e-4 && theta <= 1.0) {
                return Err(Error::ThetaOutOfRange { theta, lower });
            }
        }
        Ok(())
    }

    /// Theta values clamped into `[Theta(p, d), 1]`.
    pub fn thetas(&self) -> Result<Vec<f64>> {
        let lower = theta_critical(self.p, self.d)?;
        Ok(self.theta_list.iter().map(|t| t.max(lower)).collect())
    }

    pub fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.d, self.p, 1.0, self.measure_mode)
    }

    pub fn grid(&self) -> Result<CylinderGrid> {
        build_grid(self.half_length, self.n_s, self.n_phi, self.params()?)
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.tolerances.fixed_point,
            potential_tol: self.tolerances.potential,
            eigen_tol: self.tolerances.eigen,
            ..FixedPointOptions::default()
        }
    }

    pub fn branch_options(&self) -> BranchOptions {
        let mut opts = BranchOptions {
            mu0_factor: self.mu0_factor,
            eps_factor: self.eps,
            eta: self.eta,
            kappa_stop: self.kappa_stop,
            symmetric_points: self.symmetric_points,
            ..BranchOptions::default()
        };
        opts.init.fixed_point = self.fixed_point_options();
        opts
    }

    /// One-line parameter echo for file headers.
    pub fn echo(&self) -> String {
        format!(
            "d={} p={} measure_mode={} L={} n_s={} n_phi={} mu0_factor={} eps={}",
            self.d, self.p, self.measure_mode, self.half_length, self.n_s, self.n_phi, self.mu0_factor, self.eps
        )
    }
}

/// Label used in per-theta file names.
pub fn theta_label(theta: f64) -> String {
    format!("{theta:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_takes_defaults() {
        let c = RunConfig::from_json(r#"{"p": 2.78, "theta_list": [0.714286, 1.0], "L": 9.0}"#).unwrap();
        assert_eq!(c.p, 2.78);
        assert_eq!(c.half_length, 9.0);
        assert_eq!(c.n_s, 200);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let c = RunConfig {
            theta_list: vec![0.5],
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::ThetaOutOfRange { .. })));
        let c = RunConfig {
            half_length: -1.0,
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert_eq!(Error::Config(String::new()).exit_code(), 2);
    }

    #[test]
    fn theta_labels() {
        assert_eq!(theta_label(5.0 / 7.0), "0.7143");
        assert_eq!(theta_label(1.0), "1.0000");
    }

    proptest! {
        #[test]
        fn json_round_trip(
            p in 2.1f64..3.3,
            l in 1.0f64..20.0,
            ns in 4usize..1000,
            eta in proptest::option::of(1e-6f64..1.0),
            thetas in proptest::collection::vec(0.77f64..=1.0, 1..6),
            prob in any::<bool>(),
        ) {
            let c = RunConfig {
                p,
                half_length: l,
                n_s: ns,
                eta,
                theta_list: thetas,
                measure_mode: if prob { MeasureMode::Probability } else { MeasureMode::Surface },
                ..RunConfig::default()
            };
            let back = RunConfig::from_json(&c.to_json()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
