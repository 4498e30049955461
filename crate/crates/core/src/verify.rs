//! Checks for candidate loops: the defect in `u'' = lambda L(u) K(u) i u'`,
//! curvature matching, the exact circles for constant `K` and the two-sided
//! bounds on the mountain-pass level.
//!
//! Derivatives are spectral here as in [`crate::loopgeom`]; independence
//! comes from closed-form oracles and bounds rather than a second scheme.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CurvatureField, FieldKind};
use crate::functional::{energy_value, iso_check};
use crate::loopgeom::{LoopCurve, Point};
use crate::mountainpass::MountainPassEstimate;
use crate::spectral;

/// Relative tolerance of the level bounds.
pub const BOUNDS_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyThresholds {
    pub ode_residual: f64,
    pub curvature_match: f64,
    /// Whether the level bounds count as a check (they apply to the
    /// mountain-pass critical level, not to every critical point).
    pub check_bounds: bool,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        Self {
            ode_residual: 1e-3,
            curvature_match: 5e-3,
            check_bounds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub ode_residual_sup: f64,
    pub curvature_mismatch_sup: f64,
    pub iso_slack: f64,
    pub bounds_ok: bool,
    pub details: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.details.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelBounds {
    pub lower: f64,
    pub upper: Option<f64>,
}

fn spectral_derivatives_checked(u: &LoopCurve) -> Result<(Vec<Point>, Vec<Point>, f64)> {
    let (d1, d2) = spectral::derivatives(u.points());
    let n = d1.len() as f64;
    let arc = d1.iter().map(|v| v.norm()).sum::<f64>() / n;
    let threshold = 1e-8 * arc.max(1.0);
    for (k, v) in d1.iter().enumerate() {
        if v.norm() < threshold {
            return Err(Error::DegenerateSpeed {
                node: k,
                speed: v.norm(),
                threshold,
            });
        }
    }
    let l = (d1.iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt();
    Ok((d1, d2, l))
}

/// `sup_k |D^2 u - lambda L K(u) i D u| / (1 + |D^2 u|)`.
pub fn ode_residual(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> Result<f64> {
    let (d1, d2, l) = spectral_derivatives_checked(u)?;
    Ok(u
        .points()
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(z, (v, a))| {
            let rhs = Point::i() * v * (lambda * l * field.eval_k(*z));
            (a - rhs).norm() / (1.0 + a.norm())
        })
        .fold(0.0, f64::max))
}

/// `sup_k |kappa(t_k) - lambda K(u(t_k))|`.
pub fn curvature_match(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> Result<f64> {
    let (d1, d2, _) = spectral_derivatives_checked(u)?;
    Ok(u
        .points()
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(z, (v, a))| {
            let s = v.norm();
            let kappa = (a * v.conj()).im / (s * s * s);
            (kappa - lambda * field.eval_k(*z)).abs()
        })
        .fold(0.0, f64::max))
}

/// The exact solution `exp(2 pi i j t) / |lambda K0|` and its energy
/// `j pi / (lambda K0)` for a constant field.
pub fn circle_oracle(
    field: &CurvatureField,
    lambda: f64,
    j: i32,
    nodes: usize,
) -> Result<(LoopCurve, f64)> {
    if field.kind() != FieldKind::Constant {
        return Err(Error::WrongKind {
            expected: FieldKind::Constant.as_str(),
            actual: field.kind().as_str(),
        });
    }
    let k0 = field.k0().expect("constant field has k0");
    let lk = lambda * k0;
    if j == 0 || lk == 0.0 || (j as f64).signum() != lk.signum() {
        return Err(Error::SignMismatch {
            j: j as i64,
            lambda_k0: lk,
        });
    }
    let r = 1.0 / lk.abs();
    let u = LoopCurve::from_fn(nodes, |t| Point::from_polar(r, 2.0 * PI * j as f64 * t))?;
    Ok((u, j as f64 * PI / lk))
}

/// `pi / (|lambda| sup|K|)` and, when the field has `K0`, `pi / |lambda K0|`.
pub fn level_bounds(field: &CurvatureField, lambda: f64) -> LevelBounds {
    LevelBounds {
        lower: PI / (lambda.abs() * field.sup_norm()),
        upper: field.k0().map(|k0| PI / (lambda * k0).abs()),
    }
}

/// Whether `c` lies within the level bounds up to 2 % relative.
pub fn check_level(c: f64, field: &CurvatureField, lambda: f64) -> bool {
    let b = level_bounds(field, lambda);
    let lower_ok = c >= b.lower * (1.0 - BOUNDS_TOLERANCE);
    let upper_ok = b.upper.map_or(true, |u| c <= u * (1.0 + BOUNDS_TOLERANCE));
    c.is_finite() && lower_ok && upper_ok
}

pub fn check_bounds(report: &MountainPassEstimate, field: &CurvatureField, lambda: f64) -> bool {
    check_level(report.c_estimate, field, lambda)
}

/// Full report for a loop claimed to solve the problem at `lambda`.
pub fn verify_loop(
    u: &LoopCurve,
    field: &CurvatureField,
    lambda: f64,
    thresholds: &VerifyThresholds,
) -> Result<VerificationReport> {
    let ode = ode_residual(u, field, lambda)?;
    let curv = curvature_match(u, field, lambda)?;
    let iso = iso_check(u, field);
    let e = energy_value(u, field, lambda);
    let bounds_ok = check_level(e, field, lambda);
    let mut details = vec![
        CheckRecord {
            name: "ode_residual".into(),
            value: ode,
            threshold: thresholds.ode_residual,
            passed: ode < thresholds.ode_residual,
        },
        CheckRecord {
            name: "curvature_match".into(),
            value: curv,
            threshold: thresholds.curvature_match,
            passed: curv < thresholds.curvature_match,
        },
        CheckRecord {
            name: "isoperimetric".into(),
            value: iso.slack,
            threshold: -crate::functional::ISO_TOLERANCE,
            passed: iso.satisfied,
        },
    ];
    if thresholds.check_bounds {
        let b = level_bounds(field, lambda);
        details.push(CheckRecord {
            name: "level_lower_bound".into(),
            value: e,
            threshold: b.lower * (1.0 - BOUNDS_TOLERANCE),
            passed: e >= b.lower * (1.0 - BOUNDS_TOLERANCE),
        });
        if let Some(upper) = b.upper {
            details.push(CheckRecord {
                name: "level_upper_bound".into(),
                value: e,
                threshold: upper * (1.0 + BOUNDS_TOLERANCE),
                passed: e <= upper * (1.0 + BOUNDS_TOLERANCE),
            });
        }
    }
    Ok(VerificationReport {
        ode_residual_sup: ode,
        curvature_mismatch_sup: curv,
        iso_slack: iso.slack,
        bounds_ok,
        details,
    })
}
