//! Discrete closed planar curves and their basic geometric functionals.
//!
//! A [`LoopCurve`] stores the values `u(t_k)` of a 1-periodic map on the
//! uniform grid `t_k = k/N`. The plane is identified with the complex line, so
//! rotation by a quarter turn is multiplication by `i`.
//!
//! Two continuum readings of the same samples are supported:
//!
//! * [`Interpolation::Trigonometric`]: the band-limited interpolant. Derivatives
//!   are spectral and integrals use the trapezoid rule, so smooth loops are
//!   resolved to near machine precision.
//! * [`Interpolation::Polygonal`]: the piecewise-linear interpolant. Length,
//!   barycenter and line integrals are exact for polygons whose corners sit on
//!   grid nodes (rectangle loops).
//!
//! Curvature is always computed spectrally; on polygons with corners it is not
//! meaningful.

mod io;
mod reparam;

pub use io::{read_loop_file, write_loop_csv, write_loop_json, LoopFileFormat};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// A point (or vector) of the plane.
pub type Point = Complex64;

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 16;

/// Default discretisation.
pub const DEFAULT_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Trigonometric,
    Polygonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopCurve {
    points: Vec<Point>,
    interpolation: Interpolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopMetrics {
    pub length_energy: f64,
    pub barycenter: [f64; 2],
    pub h1_norm: f64,
    pub arc_length: f64,
}

impl LoopCurve {
    pub fn new(points: Vec<Point>, interpolation: Interpolation) -> Result<Self> {
        if points.len() < MIN_NODES {
            return Err(Error::TooFewNodes {
                got: points.len(),
                min: MIN_NODES,
            });
        }
        if let Some(k) = points.iter().position(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self {
            points,
            interpolation,
        })
    }

    pub fn trigonometric(points: Vec<Point>) -> Result<Self> {
        Self::new(points, Interpolation::Trigonometric)
    }

    pub fn polygonal(points: Vec<Point>) -> Result<Self> {
        Self::new(points, Interpolation::Polygonal)
    }

    /// Samples `f(t_k)` on the uniform grid (trigonometric reading).
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Point) -> Result<Self> {
        let points = (0..n).map(|k| f(k as f64 / n as f64)).collect();
        Self::trigonometric(points)
    }

    pub fn constant(n: usize, z: Point) -> Result<Self> {
        Self::trigonometric(vec![z; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    #[inline]
    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Same samples, different continuum reading.
    pub fn with_interpolation(&self, interpolation: Interpolation) -> Self {
        Self {
            points: self.points.clone(),
            interpolation,
        }
    }

    /// Parameters `t_k = k/N`.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n() as f64;
        (0..self.n()).map(move |k| k as f64 / n)
    }

    pub fn translate(&self, z: Point) -> Self {
        Self {
            points: self.points.iter().map(|p| p + z).collect(),
            interpolation: self.interpolation,
        }
    }

    /// Pointwise scaling `s * u` (about the origin).
    pub fn scale(&self, s: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p * s).collect(),
            interpolation: self.interpolation,
        }
    }

    /// `c + s * (u - c)`.
    pub fn scale_about(&self, center: Point, s: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| center + (p - center) * s).collect(),
            interpolation: self.interpolation,
        }
    }

    /// The reversed loop `t -> u(-t)`.
    pub fn reversed(&self) -> Self {
        let n = self.n();
        Self {
            points: (0..n).map(|k| self.points[(n - k) % n]).collect(),
            interpolation: self.interpolation,
        }
    }

    /// `u + step * dir`, node by node.
    pub fn displaced(&self, dir: &[Point], step: f64) -> Self {
        debug_assert_eq!(dir.len(), self.n());
        Self {
            points: self
                .points
                .iter()
                .zip(dir)
                .map(|(p, d)| p + d * step)
                .collect(),
            interpolation: self.interpolation,
        }
    }

    /// `(1 - w) * self + w * other`.
    pub fn lerp(&self, other: &LoopCurve, w: f64) -> Self {
        debug_assert_eq!(other.n(), self.n());
        Self {
            points: self
                .points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect(),
            interpolation: self.interpolation,
        }
    }

    pub fn is_constant(&self) -> bool {
        let z0 = self.points[0];
        self.points.iter().all(|p| *p == z0)
    }

    /// Nodal velocity: spectral `Du(t_k)` for trigonometric loops, the
    /// velocity `N (u_{k+1} - u_k)` of segment `k` for polygonal loops.
    pub fn velocity(&self) -> Vec<Point> {
        match self.interpolation {
            Interpolation::Trigonometric => spectral::first_derivative(&self.points),
            Interpolation::Polygonal => {
                let n = self.n();
                let scale = n as f64;
                (0..n)
                    .map(|k| (self.points[(k + 1) % n] - self.points[k]) * scale)
                    .collect()
            }
        }
    }

    /// `L(u) = (int_0^1 |u'|^2 dt)^(1/2)` in the loop's interpolation.
    pub fn length_energy(&self) -> f64 {
        let n = self.n();
        match self.interpolation {
            Interpolation::Trigonometric => {
                let coeffs = spectral::forward(&self.points);
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, c)| derivative_symbol(idx, n, self.interpolation) * c.norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            }
            Interpolation::Polygonal => {
                let s: f64 = (0..n)
                    .map(|k| (self.points[(k + 1) % n] - self.points[k]).norm_sqr())
                    .sum();
                (s * n as f64).sqrt()
            }
        }
    }

    /// `int_0^1 u dt`; the sample mean is exact for both interpolations.
    pub fn barycenter(&self) -> Point {
        let sum: Point = self.points.iter().sum();
        sum / self.n() as f64
    }

    /// `int_0^1 |u'| dt`.
    pub fn arc_length(&self) -> f64 {
        let n = self.n();
        match self.interpolation {
            Interpolation::Trigonometric => {
                self.velocity().iter().map(|v| v.norm()).sum::<f64>() / n as f64
            }
            Interpolation::Polygonal => (0..n)
                .map(|k| (self.points[(k + 1) % n] - self.points[k]).norm())
                .sum(),
        }
    }

    /// Norm `||u||^2 = L(u)^2 + |barycenter|^2`.
    pub fn h1_norm(&self) -> f64 {
        let l = self.length_energy();
        (l * l + self.barycenter().norm_sqr()).sqrt()
    }

    pub fn metrics(&self) -> LoopMetrics {
        let b = self.barycenter();
        let l = self.length_energy();
        LoopMetrics {
            length_energy: l,
            barycenter: [b.re, b.im],
            h1_norm: (l * l + b.norm_sqr()).sqrt(),
            arc_length: self.arc_length(),
        }
    }

    /// Regularity threshold for the discrete speed.
    pub fn speed_threshold(&self) -> f64 {
        1e-8 * self.arc_length().max(1.0)
    }

    /// Signed curvature `u'' . i u' / |u'|^3` at the nodes, from spectral
    /// derivatives. A counter-clockwise circle of radius `r` gives `+1/r`.
    pub fn curvature(&self) -> Result<Vec<f64>> {
        let (d1, d2) = spectral::derivatives(&self.points);
        let threshold = 1e-8 * (d1.iter().map(|v| v.norm()).sum::<f64>() / self.n() as f64).max(1.0);
        d1.iter()
            .zip(&d2)
            .enumerate()
            .map(|(k, (v, a))| {
                let speed = v.norm();
                if speed < threshold {
                    Err(Error::DegenerateSpeed {
                        node: k,
                        speed,
                        threshold,
                    })
                } else {
                    Ok((a * v.conj()).im / (speed * speed * speed))
                }
            })
            .collect()
    }

    /// Translate by `(m1 a, m2 b)`, integer `m1, m2`, so the barycenter lands
    /// in the half-open cell `[0, a) x [0, b)`.
    pub fn normalize_to_cell(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cell sides must be positive, got a = {a}, b = {b}"
            )));
        }
        let bary = self.barycenter();
        let mx = cell_shift(bary.re, a);
        let my = cell_shift(bary.im, b);
        if mx == 0.0 && my == 0.0 {
            return Ok(self.clone());
        }
        let mut out = self.translate(Point::new(mx * a, my * b));
        // Rounding in the recomputed mean can push it one ulp outside the cell.
        for _ in 0..2 {
            let c = out.barycenter();
            let fx = if c.re >= a {
                -1.0
            } else if c.re < 0.0 {
                1.0
            } else {
                0.0
            };
            let fy = if c.im >= b {
                -1.0
            } else if c.im < 0.0 {
                1.0
            } else {
                0.0
            };
            if fx == 0.0 && fy == 0.0 {
                break;
            }
            out = out.translate(Point::new(fx * a, fy * b));
        }
        Ok(out)
    }

    /// Resample at equal arc-length spacing, keeping `u(0)` fixed. The image
    /// is preserved up to interpolation error.
    pub fn reparametrize_uniform(&self) -> Result<Self> {
        reparam::reparametrize_uniform(self)
    }
}

fn cell_shift(x: f64, period: f64) -> f64 {
    let m = (x / period).floor();
    let r = x - m * period;
    if r >= period {
        -(m + 1.0)
    } else if r < 0.0 {
        -(m - 1.0)
    } else {
        -m
    }
}

/// `|symbol of D|^2` for FFT slot `idx`: `int |u'|^2 = sum_m symbol_m |c_m|^2`.
pub(crate) fn derivative_symbol(idx: usize, n: usize, interp: Interpolation) -> f64 {
    match interp {
        Interpolation::Trigonometric => {
            if spectral::is_nyquist(idx, n) {
                0.0
            } else {
                let k = 2.0 * PI * spectral::wavenumber(idx, n);
                k * k
            }
        }
        Interpolation::Polygonal => {
            let s = (PI * idx as f64 / n as f64).sin();
            4.0 * (n * n) as f64 * s * s
        }
    }
}

/// Diagonal of the discrete inner product `int v'.w' + (mean v).(mean w)` in
/// Fourier slots. The Nyquist slot of a trigonometric grid gets `(pi N)^2` so
/// the form stays positive definite.
pub(crate) fn h1_weight(idx: usize, n: usize, interp: Interpolation) -> f64 {
    if idx == 0 {
        return 1.0;
    }
    match interp {
        Interpolation::Trigonometric if spectral::is_nyquist(idx, n) => {
            let k = PI * n as f64;
            k * k
        }
        _ => derivative_symbol(idx, n, interp),
    }
}

/// Discrete inner product of two nodal fields in the given interpolation.
pub fn h1_inner(a: &[Point], b: &[Point], interp: Interpolation) -> f64 {
    let n = a.len();
    let ca = spectral::forward(a);
    let cb = spectral::forward(b);
    ca.iter()
        .zip(&cb)
        .enumerate()
        .map(|(idx, (x, y))| h1_weight(idx, n, interp) * (x * y.conj()).re)
        .sum()
}
