//! Prescribed curvature functions `K` and the primitive field
//! `Q(x, y) = 1/2 (int_0^x K(s, y) ds, int_0^y K(x, s) ds)`, which satisfies
//! `div Q = K`.
//!
//! Fields come from a small catalog. Every entry has a closed-form `Q`; the
//! generic quadrature route [`CurvatureField::eval_q_quadrature`] is kept as
//! an independent cross-check.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loopgeom::Point;
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance of the quadrature route for `Q`.
pub const Q_TOLERANCE: f64 = 1e-9;
/// Integrand-call budget per component of the quadrature route.
pub const Q_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    DoublyPeriodic,
    ConstantAtInfinity,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Constant => "constant",
            FieldKind::DoublyPeriodic => "doubly_periodic",
            FieldKind::ConstantAtInfinity => "constant_at_infinity",
        }
    }
}

/// Catalog entries with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Catalog {
    /// `K = c`. The lattice `(a, b)` is only used by rectangle-based paths.
    Constant { c: f64, a: f64, b: f64 },
    /// `K = c0 + c1 sin(2 pi x / a) sin(2 pi y / b) + c2 cos(2 pi x / a)`.
    SineProduct {
        c0: f64,
        c1: f64,
        c2: f64,
        a: f64,
        b: f64,
    },
    /// `K = k0 + amplitude * exp(-|z - center|^2 / sigma^2)`.
    GaussianLobe {
        k0: f64,
        amplitude: f64,
        sigma: f64,
        center: Point,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    catalog: Catalog,
    kind: FieldKind,
    sup_norm: f64,
    cell_average: Option<f64>,
}

/// Field block of a run configuration: `{"kind": ..., "name": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FieldKind>,
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<CurvatureField> {
        let allowed: &[&str] = match self.name.as_str() {
            "constant" => &["c", "a", "b"],
            "sine_product" => &["c0", "c1", "c2", "a", "b"],
            "gaussian_lobe" => &["k0", "amplitude", "sigma", "cx", "cy"],
            other => {
                return Err(Error::FieldConfig(format!(
                    "unknown catalog entry {other:?} (expected constant, sine_product or gaussian_lobe)"
                )))
            }
        };
        if let Some(bad) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::FieldConfig(format!(
                "parameter {bad:?} is not used by {:?}",
                self.name
            )));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            self.params.get(key).copied().or(default).ok_or_else(|| {
                Error::FieldConfig(format!("{:?} needs parameter {key:?}", self.name))
            })
        };
        let catalog = match self.name.as_str() {
            "constant" => Catalog::Constant {
                c: get("c", None)?,
                a: get("a", Some(1.0))?,
                b: get("b", Some(1.0))?,
            },
            "sine_product" => Catalog::SineProduct {
                c0: get("c0", None)?,
                c1: get("c1", Some(0.0))?,
                c2: get("c2", Some(0.0))?,
                a: get("a", Some(1.0))?,
                b: get("b", Some(1.0))?,
            },
            _ => Catalog::GaussianLobe {
                k0: get("k0", None)?,
                amplitude: get("amplitude", None)?,
                sigma: get("sigma", Some(1.0))?,
                center: Point::new(get("cx", Some(0.0))?, get("cy", Some(0.0))?),
            },
        };
        let field = CurvatureField::new(catalog)?;
        if let Some(kind) = self.kind {
            if kind != field.kind() {
                return Err(Error::FieldConfig(format!(
                    "{:?} builds a {} field, config says {}",
                    self.name,
                    field.kind().as_str(),
                    kind.as_str()
                )));
            }
        }
        Ok(field)
    }
}

impl CurvatureField {
    /// Validate the parameters and the structural assumptions on probe grids.
    pub fn new(catalog: Catalog) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::FieldConfig(format!("{name} must be finite, got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::FieldConfig(format!("{name} must be positive, got {v}")))
            }
        };
        let (kind, sup_norm) = match catalog {
            Catalog::Constant { c, a, b } => {
                finite("c", c)?;
                positive("a", a)?;
                positive("b", b)?;
                if c == 0.0 {
                    return Err(Error::FieldConfig("constant field needs c != 0".into()));
                }
                (FieldKind::Constant, c.abs())
            }
            Catalog::SineProduct { c0, c1, c2, a, b } => {
                finite("c0", c0)?;
                finite("c1", c1)?;
                finite("c2", c2)?;
                positive("a", a)?;
                positive("b", b)?;
                (FieldKind::DoublyPeriodic, c0.abs() + c1.abs() + c2.abs())
            }
            Catalog::GaussianLobe {
                k0,
                amplitude,
                sigma,
                center,
            } => {
                finite("k0", k0)?;
                finite("amplitude", amplitude)?;
                positive("sigma", sigma)?;
                finite("cx", center.re)?;
                finite("cy", center.im)?;
                if k0 == 0.0 {
                    return Err(Error::FieldConfig(
                        "a field constant at infinity needs k0 != 0".into(),
                    ));
                }
                (
                    FieldKind::ConstantAtInfinity,
                    k0.abs().max((k0 + amplitude).abs()),
                )
            }
        };
        let mut field = Self {
            catalog,
            kind,
            sup_norm,
            cell_average: None,
        };
        field.validate()?;
        if let Some((a, b)) = field.periods() {
            field.cell_average = Some(field.average_over(a, b));
        }
        Ok(field)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Catalog::Constant { c, a: 1.0, b: 1.0 })
    }

    pub fn sine_product(c0: f64, c1: f64, c2: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(Catalog::SineProduct { c0, c1, c2, a, b })
    }

    pub fn gaussian_lobe(k0: f64, amplitude: f64, sigma: f64, center: Point) -> Result<Self> {
        Self::new(Catalog::GaussianLobe {
            k0,
            amplitude,
            sigma,
            center,
        })
    }

    fn validate(&self) -> Result<()> {
        let probe = 32;
        let (w, h, origin) = match self.catalog {
            Catalog::GaussianLobe { sigma, center, .. } => {
                (6.0 * sigma, 6.0 * sigma, center - Point::new(3.0 * sigma, 3.0 * sigma))
            }
            _ => {
                let (a, b) = self.periods().unwrap_or((1.0, 1.0));
                (a, b, Point::new(0.0, 0.0))
            }
        };
        for i in 0..probe {
            for j in 0..probe {
                let z = origin
                    + Point::new(w * i as f64 / probe as f64, h * j as f64 / probe as f64);
                let k = self.eval_k(z);
                if !k.is_finite() || k.abs() > self.sup_norm * (1.0 + 1e-12) {
                    return Err(Error::FieldConfig(format!(
                        "K({}, {}) = {k} exceeds the declared sup norm {}",
                        z.re, z.im, self.sup_norm
                    )));
                }
                if self.kind == FieldKind::DoublyPeriodic {
                    let (a, b) = self.periods().expect("periodic field has periods");
                    let dx = (self.eval_k(z + Point::new(a, 0.0)) - k).abs();
                    let dy = (self.eval_k(z + Point::new(0.0, b)) - k).abs();
                    if dx.max(dy) > 1e-9 * self.sup_norm.max(f64::MIN_POSITIVE) {
                        return Err(Error::FieldConfig(format!(
                            "K is not ({a}, {b})-periodic near ({}, {})",
                            z.re, z.im
                        )));
                    }
                }
            }
        }
        if let Catalog::GaussianLobe {
            k0, sigma, center, ..
        } = self.catalog
        {
            let radius = 1e3 * sigma + center.norm();
            for ray in 0..16 {
                let z = Point::from_polar(radius, 2.0 * PI * ray as f64 / 16.0);
                let k1 = self.eval_k(z) - k0;
                if k1.abs() >= 1e-3 * k0.abs() {
                    return Err(Error::FieldConfig(format!(
                        "K - k0 = {k1} does not decay at radius {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.catalog {
            Catalog::Constant { .. } => "constant",
            Catalog::SineProduct { .. } => "sine_product",
            Catalog::GaussianLobe { .. } => "gaussian_lobe",
        }
    }

    /// Upper bound for `sup |K|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Asymptotic constant `K0` for constant and constant-at-infinity fields.
    pub fn k0(&self) -> Option<f64> {
        match self.catalog {
            Catalog::Constant { c, .. } => Some(c),
            Catalog::GaussianLobe { k0, .. } => Some(k0),
            Catalog::SineProduct { .. } => None,
        }
    }

    /// Lattice periods. A constant field is periodic for every lattice; it
    /// reports the one it was built with.
    pub fn periods(&self) -> Option<(f64, f64)> {
        match self.catalog {
            Catalog::Constant { a, b, .. } | Catalog::SineProduct { a, b, .. } => Some((a, b)),
            Catalog::GaussianLobe { .. } => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.periods().is_some()
    }

    pub fn eval_k(&self, z: Point) -> f64 {
        let (x, y) = (z.re, z.im);
        match self.catalog {
            Catalog::Constant { c, .. } => c,
            Catalog::SineProduct { c0, c1, c2, a, b } => {
                let (sx, cx) = (2.0 * PI * x / a).sin_cos();
                let sy = (2.0 * PI * y / b).sin();
                c0 + c1 * sx * sy + c2 * cx
            }
            Catalog::GaussianLobe {
                k0,
                amplitude,
                sigma,
                center,
            } => k0 + amplitude * (-(z - center).norm_sqr() / (sigma * sigma)).exp(),
        }
    }

    /// Closed-form `Q(z)`.
    pub fn eval_q(&self, z: Point) -> Point {
        match self.catalog {
            Catalog::Constant { c, .. } => z * (0.5 * c),
            Catalog::SineProduct { c0, c1, c2, a, b } => {
                let (x, y) = (z.re, z.im);
                let (sx, cx) = (2.0 * PI * x / a).sin_cos();
                let (sy, cy) = (2.0 * PI * y / b).sin_cos();
                let qx = c0 * x + c1 * sy * a / (2.0 * PI) * (1.0 - cx) + c2 * a / (2.0 * PI) * sx;
                let qy = c0 * y + c1 * sx * b / (2.0 * PI) * (1.0 - cy) + c2 * cx * y;
                Point::new(0.5 * qx, 0.5 * qy)
            }
            Catalog::GaussianLobe { k0, .. } => z * (0.5 * k0) + self.lobe_q1(z),
        }
    }

    /// `Q` by adaptive Simpson along the two coordinate segments.
    pub fn eval_q_quadrature(&self, z: Point) -> Result<Point> {
        self.q_by_quadrature(z, |w| self.eval_k(w))
    }

    fn q_by_quadrature(&self, z: Point, k: impl Fn(Point) -> f64) -> Result<Point> {
        let (x, y) = (z.re, z.im);
        let qx = adaptive_simpson(|s| k(Point::new(s, y)), 0.0, x, Q_TOLERANCE, Q_BUDGET)?;
        let qy = adaptive_simpson(|s| k(Point::new(x, s)), 0.0, y, Q_TOLERANCE, Q_BUDGET)?;
        Ok(Point::new(0.5 * qx, 0.5 * qy))
    }

    /// Decaying part `K1 = K - K0`.
    pub fn eval_k1(&self, z: Point) -> Result<f64> {
        let k0 = self.require_k0()?;
        Ok(self.eval_k(z) - k0)
    }

    /// Primitive of `K1` built like `Q`; closed form.
    pub fn eval_q1(&self, z: Point) -> Result<Point> {
        self.require_k0()?;
        Ok(self.lobe_q1(z))
    }

    /// Primitive of `K1` by quadrature.
    pub fn eval_q1_quadrature(&self, z: Point) -> Result<Point> {
        let k0 = self.require_k0()?;
        self.q_by_quadrature(z, |w| self.eval_k(w) - k0)
    }

    fn require_k0(&self) -> Result<f64> {
        match self.kind {
            FieldKind::ConstantAtInfinity | FieldKind::Constant => {
                Ok(self.k0().expect("kind carries k0"))
            }
            FieldKind::DoublyPeriodic => Err(Error::WrongKind {
                expected: FieldKind::ConstantAtInfinity.as_str(),
                actual: self.kind.as_str(),
            }),
        }
    }

    fn lobe_q1(&self, z: Point) -> Point {
        match self.catalog {
            Catalog::GaussianLobe {
                amplitude,
                sigma,
                center,
                ..
            } => {
                let d = z - center;
                let half_width = 0.5 * sigma * PI.sqrt();
                let gy = (-(d.im * d.im) / (sigma * sigma)).exp();
                let gx = (-(d.re * d.re) / (sigma * sigma)).exp();
                let ex = libm::erf(d.re / sigma) + libm::erf(center.re / sigma);
                let ey = libm::erf(d.im / sigma) + libm::erf(center.im / sigma);
                Point::new(
                    0.5 * amplitude * gy * half_width * ex,
                    0.5 * amplitude * gx * half_width * ey,
                )
            }
            _ => Point::new(0.0, 0.0),
        }
    }

    /// Mean of `K` over the periodic cell `[0, a) x [0, b)`.
    pub fn cell_average(&self) -> Result<f64> {
        self.cell_average.ok_or(Error::WrongKind {
            expected: FieldKind::DoublyPeriodic.as_str(),
            actual: self.kind.as_str(),
        })
    }

    /// Mean of `K` over `[0, w] x [0, h]` by the 64 x 64 tensor trapezoid rule
    /// (spectrally accurate when `(w, h)` is a period rectangle).
    pub fn average_over(&self, w: f64, h: f64) -> f64 {
        let m = 64;
        let mut sum = 0.0;
        for i in 0..m {
            let x = w * i as f64 / m as f64;
            let mut row = 0.0;
            for j in 0..m {
                row += self.eval_k(Point::new(x, h * j as f64 / m as f64));
            }
            sum += row;
        }
        sum / (m * m) as f64
    }
}
