//! Reparametrization of branches for `theta < 1`, crossings between the
//! symmetric and non-symmetric curves, minimizing envelopes and the
//! Gagliardo-Nirenberg threshold.
//!
//! A point `(mu, X, Y, Z)` on a branch maps to
//! `Lambda = theta mu - (1 - theta) X / Y` and
//! `J = theta^theta (X + mu Y)^theta Y^{1-theta} / Z^{2/p}`.

use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, BranchPoint};
use crate::error::{Error, Result};
use crate::model::{theta_critical, MeasureMode, Norms, ProblemParams};
use crate::symmetric::{mu_fs, soliton_norms};

/// Non-symmetric points with smaller asymmetry are left out of crossing
/// detection: close to the bifurcation the two curves are tangent and the
/// discretization error exceeds their separation.
pub const CROSSING_MIN_ASYMMETRY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub lambda: f64,
    pub j: f64,
    pub symmetric: bool,
    pub asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCurve {
    pub theta: f64,
    pub points: Vec<CurvePoint>,
    pub source: String,
    /// True when `Lambda` is not monotone in `mu` along the curve.
    pub non_monotone: bool,
    /// Parameters of a closed-form symmetric curve, used to polish roots.
    pub closed_form: Option<ProblemParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub lambda1: f64,
    /// Preimage on the symmetric curve.
    pub mu1_star: f64,
    /// Preimage on the non-symmetric curve.
    pub mu1: f64,
    pub j: f64,
}

/// `(Lambda, J)` of one point.
pub fn theta_coordinates(mu: f64, norms: &Norms, theta: f64, p: f64) -> (f64, f64) {
    let lambda = theta * mu - (1.0 - theta) * norms.t();
    let j =
        theta.powf(theta) * (norms.x + mu * norms.y).powf(theta) * norms.y.powf(1.0 - theta) / norms.z.powf(2.0 / p);
    (lambda, j)
}

fn check_theta(theta: f64, p: f64, d: usize) -> Result<()> {
    let lower = theta_critical(p, d)?;
    if !theta.is_finite() || theta < lower - 1e-12 || theta > 1.0 {
        return Err(Error::ThetaOutOfRange { theta, lower });
    }
    Ok(())
}

fn is_non_monotone(points: &[CurvePoint]) -> bool {
    let mut sign = 0.0;
    for w in points.windows(2) {
        let d = w[1].lambda - w[0].lambda;
        if d == 0.0 {
            continue;
        }
        if sign != 0.0 && d.signum() != sign {
            return true;
        }
        sign = d.signum();
    }
    false
}

/// Maps branch points to a `theta` curve ordered by increasing `mu`.
pub fn map_points_to_theta(
    points: &[BranchPoint],
    params: &ProblemParams,
    theta: f64,
    source: &str,
) -> Result<ThetaCurve> {
    check_theta(theta, params.p, params.d)?;
    let mut out: Vec<CurvePoint> = points
        .iter()
        .map(|pt| {
            let (lambda, j) = theta_coordinates(pt.mu, &pt.norms(), theta, params.p);
            CurvePoint {
                mu: pt.mu,
                lambda,
                j,
                symmetric: pt.symmetric,
                asymmetry: pt.asymmetry,
            }
        })
        .collect();
    out.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(ThetaCurve {
        theta,
        non_monotone: is_non_monotone(&out),
        points: out,
        source: source.to_string(),
        closed_form: None,
    })
}

pub fn map_to_theta(branch: &Branch, theta: f64) -> Result<ThetaCurve> {
    map_points_to_theta(&branch.points, &branch.params, theta, "branch")
}

/// Closed-form symmetric curve sampled at `mu_list`.
pub fn symmetric_theta_curve(mu_list: &[f64], theta: f64, params: &ProblemParams) -> Result<ThetaCurve> {
    check_theta(theta, params.p, params.d)?;
    let mut points = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        let n = soliton_norms(mu, params.p, params.d, params.measure_mode)?;
        let (lambda, j) = theta_coordinates(mu, &n, theta, params.p);
        points.push(CurvePoint {
            mu,
            lambda,
            j,
            symmetric: true,
            asymmetry: 0.0,
        });
    }
    points.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(ThetaCurve {
        theta,
        non_monotone: is_non_monotone(&points),
        points,
        source: "symmetric".into(),
        closed_form: Some(ProblemParams { theta, ..*params }),
    })
}

/// `n` values of `mu` spaced geometrically on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo * (r * k as f64).exp() })
        .collect()
}

/// `Lambda_FS(p, theta) = 4 (d-1) / (p^2 - 4) ((2 theta - 1) p + 2) / (p + 2)`.
pub fn lambda_fs(p: f64, theta: f64, d: usize) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    let d = d as f64;
    Ok(4.0 * (d - 1.0) / (p * p - 4.0) * ((2.0 * theta - 1.0) * p + 2.0) / (p + 2.0))
}

/// Slope of the symmetric `Lambda_*(mu) = mu (theta - (1 - theta)(p-2)/(p+2))`.
pub fn symmetric_lambda_slope(p: f64, theta: f64) -> f64 {
    theta - (1.0 - theta) * (p - 2.0) / (p + 2.0)
}

/// A piece of a curve on which `Lambda` is strictly monotone.
#[derive(Debug, Clone)]
struct Piece {
    pts: Vec<CurvePoint>,
}

impl Piece {
    fn range(&self) -> (f64, f64) {
        let a = self.pts[0].lambda;
        let b = self.pts[self.pts.len() - 1].lambda;
        (a.min(b), a.max(b))
    }

    /// Linear interpolation of `(mu, J)` at `lambda`.
    fn at(&self, lambda: f64) -> Option<(f64, f64)> {
        for w in self.pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = (a.lambda.min(b.lambda), a.lambda.max(b.lambda));
            if lambda >= lo && lambda <= hi {
                let s = if hi > lo {
                    (lambda - a.lambda) / (b.lambda - a.lambda)
                } else {
                    0.0
                };
                return Some((a.mu + s * (b.mu - a.mu), a.j + s * (b.j - a.j)));
            }
        }
        None
    }
}

fn split_monotone(points: &[CurvePoint]) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut cur: Vec<CurvePoint> = Vec::new();
    let mut sign = 0.0;
    for &pt in points {
        if let Some(last) = cur.last() {
            let d = pt.lambda - last.lambda;
            if d == 0.0 {
                continue;
            }
            if sign != 0.0 && d.signum() != sign {
                let turn = *last;
                pieces.push(Piece {
                    pts: std::mem::take(&mut cur),
                });
                cur.push(turn);
            }
            sign = d.signum();
        }
        cur.push(pt);
    }
    if cur.len() >= 2 {
        pieces.push(Piece { pts: cur });
    }
    pieces
}

/// Non-symmetric points usable for crossing detection.
fn crossing_points(curve: &ThetaCurve) -> Vec<CurvePoint> {
    curve
        .points
        .iter()
        .copied()
        .filter(|p| !p.symmetric && p.asymmetry >= CROSSING_MIN_ASYMMETRY)
        .collect()
}

/// Finds where the `(Lambda, J)` polylines of `sym` and `nonsym` meet.
///
/// Both curves are split into pieces on which `Lambda` is monotone; on each
/// overlap the difference of the interpolated `J` values is scanned for sign
/// changes. Returns `Ok(None)` without a crossing and an ambiguity error
/// carrying all candidates when there is more than one.
pub fn detect_crossing(sym: &ThetaCurve, nonsym: &ThetaCurve) -> Result<Option<Crossing>> {
    let sym_pieces = split_monotone(&sym.points);
    let non_pieces = split_monotone(&crossing_points(nonsym));
    let mut found: Vec<Crossing> = Vec::new();
    let mut degenerate = false;
    for sp in &sym_pieces {
        for np in &non_pieces {
            let (a0, a1) = sp.range();
            let (b0, b1) = np.range();
            let (lo, hi) = (a0.max(b0), a1.min(b1));
            if !(hi > lo) {
                continue;
            }
            let mut nodes: Vec<f64> = sp
                .pts
                .iter()
                .chain(&np.pts)
                .map(|p| p.lambda)
                .filter(|l| *l > lo && *l < hi)
                .collect();
            nodes.push(lo);
            nodes.push(hi);
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            let diffs: Vec<(f64, f64)> = nodes
                .iter()
                .map(|&l| {
                    let (_, js) = sp.at(l).expect("inside range");
                    let (_, jn) = np.at(l).expect("inside range");
                    (l, jn - js)
                })
                .collect();
            let scale = diffs
                .iter()
                .map(|(l, _)| sp.at(*l).unwrap().1.abs())
                .fold(0.0, f64::max);
            if diffs.iter().all(|(_, d)| d.abs() <= 1e-12 * scale) {
                degenerate = true;
                continue;
            }
            for (k, w) in diffs.windows(2).enumerate() {
                let ((l0, d0), (l1, d1)) = (w[0], w[1]);
                let root = if d0 == 0.0 {
                    // A zero at an interior node is counted once.
                    (k > 0).then_some(l0).filter(|_| diffs[k - 1].1 != 0.0)
                } else if d0 * d1 < 0.0 {
                    Some(l0 - d0 * (l1 - l0) / (d1 - d0))
                } else {
                    None
                };
                if let Some(l) = root {
                    let (mu_s, j_s) = sp.at(l).unwrap();
                    let (mu_n, _) = np.at(l).unwrap();
                    found.push(Crossing {
                        lambda1: l,
                        mu1_star: mu_s,
                        mu1: mu_n,
                        j: j_s,
                    });
                }
            }
        }
    }
    if let Some(params) = sym.closed_form {
        for c in &mut found {
            polish_crossing(c, &non_pieces, &params)?;
        }
    }
    found.sort_by(|a, b| a.lambda1.total_cmp(&b.lambda1));
    found.dedup_by(|a, b| (a.lambda1 - b.lambda1).abs() <= 1e-12 * a.lambda1.abs().max(1.0));
    if degenerate {
        return Err(Error::AmbiguousCrossing(found));
    }
    match found.len() {
        0 => Ok(None),
        1 => Ok(Some(found[0])),
        _ => Err(Error::AmbiguousCrossing(found)),
    }
}

/// Newton steps against the exact symmetric curve, keeping the
/// non-symmetric side piecewise linear.
fn polish_crossing(c: &mut Crossing, pieces: &[Piece], params: &ProblemParams) -> Result<()> {
    let slope = symmetric_lambda_slope(params.p, params.theta);
    let sym_j = |lambda: f64| -> Result<f64> {
        let mu = lambda / slope;
        let n = soliton_norms(mu, params.p, params.d, params.measure_mode)?;
        Ok(theta_coordinates(mu, &n, params.theta, params.p).1)
    };
    let Some(piece) = pieces.iter().find(|p| {
        p.at(c.lambda1)
            .map(|(mu, _)| (mu - c.mu1).abs() < 1e-9 * c.mu1.max(1.0))
            == Some(true)
    }) else {
        return Ok(());
    };
    let (lo, hi) = piece.range();
    let f = |l: f64| -> Result<f64> { Ok(piece.at(l).map(|(_, j)| j).unwrap_or(f64::NAN) - sym_j(l)?) };
    let mut l = c.lambda1;
    for _ in 0..20 {
        let h = 1e-7 * l.abs().max(1e-3);
        let fl = f(l)?;
        let df = (f((l + h).min(hi))? - f((l - h).max(lo))?) / ((l + h).min(hi) - (l - h).max(lo));
        if !df.is_finite() || df == 0.0 {
            break;
        }
        let next = (l - fl / df).clamp(lo, hi);
        if (next - l).abs() <= 1e-14 * l.abs().max(1.0) {
            l = next;
            break;
        }
        l = next;
    }
    if f(l)?.abs() <= f(c.lambda1)?.abs() {
        c.lambda1 = l;
        c.mu1_star = l / slope;
        c.mu1 = piece.at(l).unwrap().0;
        c.j = sym_j(l)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub lambda: f64,
    pub j_min: f64,
    /// Index of the minimizing curve.
    pub source: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub points: Vec<EnvelopePoint>,
    /// `Lambda` midpoints where the minimizing curve changes.
    pub switches: Vec<f64>,
}

/// Pointwise minimum of `J` over the curves on `lambda_grid`.
pub fn min_envelope(curves: &[ThetaCurve], lambda_grid: &[f64]) -> Result<Envelope> {
    if curves.is_empty() {
        return Err(Error::EmptyDomain("no curves".into()));
    }
    let pieces: Vec<Vec<Piece>> = curves.iter().map(|c| split_monotone(&c.points)).collect();
    let mut points = Vec::new();
    for &lambda in lambda_grid {
        let mut best: Option<(f64, usize)> = None;
        for (k, ps) in pieces.iter().enumerate() {
            for piece in ps {
                if let Some((_, j)) = piece.at(lambda) {
                    if best.is_none_or(|(b, _)| j < b) {
                        best = Some((j, k));
                    }
                }
            }
        }
        if let Some((j_min, source)) = best {
            points.push(EnvelopePoint {
                lambda,
                j_min,
                source,
                source_id: curves[source].source.clone(),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyDomain("no curve is defined on the Lambda grid".into()));
    }
    let switches = points
        .windows(2)
        .filter(|w| w[0].source != w[1].source)
        .map(|w| 0.5 * (w[0].lambda + w[1].lambda))
        .collect();
    Ok(Envelope { points, switches })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnThreshold {
    pub mu: f64,
    pub lambda_gn: f64,
    /// `|J_*(mu) - J_inf|` at the returned `mu`.
    pub residual: f64,
}

/// `Lambda_GN = sup { Lambda_*(mu) : J_*(mu) < J_inf }` at `theta = Theta(p, d)`.
pub fn lambda_gn(p: f64, d: usize, mode: MeasureMode, j_inf: f64) -> Result<GnThreshold> {
    let theta = theta_critical(p, d)?;
    let sym_j = |mu: f64| -> Result<f64> {
        let n = soliton_norms(mu, p, d, mode)?;
        Ok(theta_coordinates(mu, &n, theta, p).1)
    };
    let slope = symmetric_lambda_slope(p, theta);
    // Bracket the last sign change of J_* - J_inf on a geometric scan.
    let grid = geometric_grid(1e-4 * mu_fs(p, d)?, 1e4 * mu_fs(p, d)?, 801);
    let mut vals = Vec::with_capacity(grid.len());
    for &mu in &grid {
        vals.push(sym_j(mu)? - j_inf);
    }
    let Some(k) = (0..grid.len() - 1).rev().find(|&k| vals[k] < 0.0 && vals[k + 1] >= 0.0) else {
        return Err(Error::NoSolution(format!(
            "symmetric J never reaches J_inf = {j_inf} on the sampled range"
        )));
    };
    let (mut lo, mut hi) = (grid[k], grid[k + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sym_j(mid)? < j_inf {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let (rl, rh) = ((sym_j(lo)? - j_inf).abs(), (sym_j(hi)? - j_inf).abs());
    let (mu, residual) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    let lambda_gn = if slope > 0.0 {
        slope * mu
    } else {
        // Lambda_* decreasing: the supremum sits at the smallest admissible mu.
        grid.iter()
            .zip(&vals)
            .filter(|(_, v)| **v < 0.0)
            .map(|(m, _)| slope * m)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(GnThreshold {
        mu,
        lambda_gn,
        residual,
    })
}

/// Candidate optimal constant `1 / J`.
pub fn best_constant(j: f64) -> f64 {
    1.0 / j
}
