//! Radial ground state of `-Delta u + u = u^{p-1}` in `R^d` by shooting.
//!
//! The profile solves `u'' + (d-1)/r u' - u + u^{p-1} = 0` with `u'(0) = 0`.
//! For a trial value `a = u(0)` the integration either crosses zero
//! (overshoot, `a` too large) or turns upward (undershoot, `a` too small);
//! bisection on `a` converges to the decaying solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sphere_area, MeasureMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Radius cap of the integration.
    pub radius: f64,
    /// Relative bracket width on `u(0)` at which bisection stops.
    pub tol: f64,
    /// Relative and absolute tolerances of the adaptive integrator.
    pub rtol: f64,
    pub atol: f64,
    /// Largest `u(0)` tried when bracketing.
    pub max_amplitude: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            radius: 50.0,
            tol: 1e-12,
            rtol: 1e-11,
            atol: 1e-14,
            max_amplitude: 200.0,
        }
    }
}

/// Radial profile and its Euclidean norms (Lebesgue measure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub p: f64,
    pub d: usize,
    pub u0: f64,
    pub r_nodes: Vec<f64>,
    pub u_values: Vec<f64>,
    pub x_e: f64,
    pub y_e: f64,
    pub z_e: f64,
}

impl RadialProfile {
    /// `(X_e, Y_e, Z_e)`, divided by `|S^{d-1}|` in probability mode.
    pub fn norms(&self, mode: MeasureMode) -> (f64, f64, f64) {
        let f = match mode {
            MeasureMode::Surface => 1.0,
            MeasureMode::Probability => 1.0 / sphere_area(self.d),
        };
        (self.x_e * f, self.y_e * f, self.z_e * f)
    }

    pub fn big_theta(&self) -> f64 {
        self.d as f64 * (self.p - 2.0) / (2.0 * self.p)
    }

    /// Relative residuals of `X + Y = Z`, `X = Theta Z` and `Y = (1 - Theta) Z`.
    pub fn pohozaev_residuals(&self) -> [f64; 3] {
        let th = self.big_theta();
        let z = self.z_e;
        [
            (self.x_e + self.y_e - z).abs() / z,
            (self.x_e - th * z).abs() / z,
            (self.y_e - (1.0 - th) * z).abs() / z,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shot {
    /// `u` crossed zero: the initial value is too large.
    Overshoot,
    /// `u'` became positive while `u > 0`: the initial value is too small.
    Undershoot,
}

const STATE: usize = 5;
type State = [f64; STATE];

struct Rhs {
    d: f64,
    p: f64,
}

impl Rhs {
    fn eval(&self, r: f64, y: &State) -> State {
        let (u, v) = (y[0], y[1]);
        let rd = r.powf(self.d - 1.0);
        let up = u.abs().powf(self.p - 2.0) * u;
        [
            v,
            -(self.d - 1.0) / r * v + u - up,
            rd * v * v,
            rd * u * u,
            rd * u.abs().powf(self.p),
        ]
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order state and the error
/// estimate.
fn dp_step(f: &Rhs, r: f64, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; STATE]; 7];
    k[0] = f.eval(r, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..STATE {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f.eval(r + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; STATE];
    for s in 0..7 {
        for i in 0..STATE {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

struct Trajectory {
    shot: Option<Shot>,
    r: Vec<f64>,
    states: Vec<State>,
}

fn integrate(a: f64, p: f64, d: usize, opts: &ShootingOptions) -> Result<Trajectory> {
    let f = Rhs { d: d as f64, p };
    // Taylor start: u = a + c r^2 / 2, c = (a - a^{p-1}) / d.
    let c = (a - a.powf(p - 1.0)) / d as f64;
    let r0 = 1e-4;
    let mut r = r0;
    let rd = |r: f64| r.powi(d as i32 - 1);
    let mut y: State = [
        a + 0.5 * c * r0 * r0,
        c * r0,
        c * c * r0 * r0 * rd(r0) * r0 / (d as f64 + 2.0),
        a * a * rd(r0) * r0 / d as f64,
        a.powf(p) * rd(r0) * r0 / d as f64,
    ];
    let mut h: f64 = 1e-3;
    let mut rs = vec![r];
    let mut states = vec![y];
    let mut steps = 0usize;
    while r < opts.radius {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::Tolerance("radial integration took too many steps".into()));
        }
        h = h.min(opts.radius - r);
        let (y5, err) = dp_step(&f, r, &y, h);
        let norm = (0..2)
            .map(|i| err[i].abs() / (opts.atol + opts.rtol * y[i].abs().max(y5[i].abs())))
            .fold(0.0, f64::max);
        if norm <= 1.0 {
            r += h;
            y = y5;
            rs.push(r);
            states.push(y);
            if y[0] < 0.0 {
                return Ok(Trajectory {
                    shot: Some(Shot::Overshoot),
                    r: rs,
                    states,
                });
            }
            if y[1] > 0.0 {
                return Ok(Trajectory {
                    shot: Some(Shot::Undershoot),
                    r: rs,
                    states,
                });
            }
        }
        let factor = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 {
            return Err(Error::Tolerance(format!("step size underflow at r = {r}")));
        }
    }
    Ok(Trajectory {
        shot: None,
        r: rs,
        states,
    })
}

/// Classifies the initial value `a`; `None` when neither event happens
/// before the radius cap.
pub fn shoot(a: f64, p: f64, d: usize, opts: &ShootingOptions) -> Result<Option<Shot>> {
    Ok(integrate(a, p, d, opts)?.shot)
}

fn check_exponent(p: f64, d: usize) -> Result<()> {
    let upper = if d > 2 {
        2.0 * d as f64 / (d as f64 - 2.0)
    } else {
        f64::INFINITY
    };
    if d == 0 || !(p > 2.0) || !(p < upper) {
        return Err(Error::Domain(format!("need 2 < p < {upper} for d = {d}, got p = {p}")));
    }
    Ok(())
}

/// Radial ground state with bisection stopped at relative width `tol` on `u(0)`.
pub fn radial_ground_state(p: f64, d: usize, tol: f64) -> Result<RadialProfile> {
    radial_ground_state_with(
        p,
        d,
        &ShootingOptions {
            tol,
            ..ShootingOptions::default()
        },
    )
}

/// Radial ground state by bisection shooting.
pub fn radial_ground_state_with(p: f64, d: usize, opts: &ShootingOptions) -> Result<RadialProfile> {
    check_exponent(p, d)?;
    // Values just above the constant solution u = 1 undershoot.
    let mut lo = 1.0 + 1e-6;
    if shoot(lo, p, d, opts)? != Some(Shot::Undershoot) {
        return Err(Error::BracketFailure(format!("u(0) = {lo} does not undershoot")));
    }
    let mut hi = 2.0;
    loop {
        match shoot(hi, p, d, opts)? {
            Some(Shot::Overshoot) => break,
            _ => {
                lo = hi;
                hi *= 2.0;
                if hi > opts.max_amplitude {
                    return Err(Error::BracketFailure(format!(
                        "no overshoot below u(0) = {}",
                        opts.max_amplitude
                    )));
                }
            }
        }
    }
    while hi - lo > opts.tol * hi {
        let mid = 0.5 * (lo + hi);
        match shoot(mid, p, d, opts)? {
            Some(Shot::Overshoot) => hi = mid,
            Some(Shot::Undershoot) => lo = mid,
            None => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let a = 0.5 * (lo + hi);
    let traj = integrate(a, p, d, opts)?;
    // The trajectory departs from the decaying solution near its end; cut at
    // the smallest |u| before the departure.
    let end = traj
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| s[0] > 0.0 && s[1] <= 0.0)
        .min_by(|x, y| x.1[0].abs().total_cmp(&y.1[0].abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let last = traj.states[end];
    let area = sphere_area(d);
    Ok(RadialProfile {
        p,
        d,
        u0: a,
        r_nodes: traj.r[..=end].to_vec(),
        u_values: traj.states[..=end].iter().map(|s| s[0]).collect(),
        x_e: area * last[2],
        y_e: area * last[3],
        z_e: area * last[4],
    })
}

/// `k = Theta^Theta (1 - Theta)^{1 - Theta}`.
pub fn gn_prefactor(p: f64, d: usize) -> f64 {
    let th = d as f64 * (p - 2.0) / (2.0 * p);
    th.powf(th) * (1.0 - th).powf(1.0 - th)
}

/// Limit level `J_inf = k (X_e + Y_e) / Z_e^{2/p}` of the profile.
pub fn j_infinity_of(profile: &RadialProfile, mode: MeasureMode) -> f64 {
    let (x, y, z) = profile.norms(mode);
    gn_prefactor(profile.p, profile.d) * (x + y) / z.powf(2.0 / profile.p)
}

pub fn j_infinity(p: f64, d: usize, mode: MeasureMode) -> Result<f64> {
    let profile = radial_ground_state_with(p, d, &ShootingOptions::default())?;
    Ok(j_infinity_of(&profile, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_soliton_height() {
        for p in [2.5, 3.0, 4.0] {
            let prof = radial_ground_state(p, 1, 1e-12).unwrap();
            assert_relative_eq!(prof.u0, (p / 2.0).powf(1.0 / (p - 2.0)), max_relative = 1e-9);
        }
    }

    #[test]
    fn pohozaev_identities() {
        for (p, d) in [(2.8, 5), (3.0, 3), (2.5, 4)] {
            let prof = radial_ground_state(p, d, 1e-12).unwrap();
            for r in prof.pohozaev_residuals() {
                assert!(r <= 1e-5, "p = {p}, d = {d}: {r}");
            }
            assert!(prof.u_values.windows(2).all(|w| w[1] < w[0]));
            assert!(prof.u_values.iter().all(|&u| u > 0.0));
        }
    }

    #[test]
    fn shooting_dichotomy() {
        let opts = ShootingOptions::default();
        let prof = radial_ground_state_with(2.8, 5, &opts).unwrap();
        assert_eq!(shoot(prof.u0 * 1.01, 2.8, 5, &opts).unwrap(), Some(Shot::Overshoot));
        assert_eq!(shoot(prof.u0 * 0.99, 2.8, 5, &opts).unwrap(), Some(Shot::Undershoot));
    }

    #[test]
    fn balanced_form_and_modes() {
        let prof = radial_ground_state(2.8, 5, 1e-12).unwrap();
        let j = j_infinity_of(&prof, MeasureMode::Surface);
        let k = gn_prefactor(2.8, 5);
        assert_relative_eq!(j, k * prof.z_e.powf(1.0 - 2.0 / 2.8), max_relative = 1e-5);
        let jp = j_infinity_of(&prof, MeasureMode::Probability);
        assert_relative_eq!(jp, j * sphere_area(5).powf(2.0 / 2.8 - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn domain_and_accuracy_robustness() {
        let base = radial_ground_state(2.8, 5, 1e-12).unwrap();
        let fine = ShootingOptions {
            radius: 100.0,
            rtol: 1e-12,
            ..ShootingOptions::default()
        };
        let other = radial_ground_state_with(2.8, 5, &fine).unwrap();
        let (a, b) = (
            j_infinity_of(&base, MeasureMode::Surface),
            j_infinity_of(&other, MeasureMode::Surface),
        );
        assert!((a - b).abs() <= 1e-3 * a);
    }

    #[test]
    fn invalid_exponent() {
        assert!(radial_ground_state(2.0, 5, 1e-12).is_err());
        assert!(radial_ground_state(3.5, 5, 1e-12).is_err());
    }
}
