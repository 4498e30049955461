//! Constant-speed resampling.
//!
//! Trigonometric loops are upsampled by zero padding, the arc-length function
//! is integrated spectrally on the fine grid and inverted with cubic Hermite
//! interpolation. Polygonal loops are resampled along the polyline.

use std::f64::consts::PI;

use super::{Interpolation, LoopCurve, Point};
use crate::error::{Error, Result};
use crate::spectral;

const UPSAMPLE: usize = 8;

pub(super) fn reparametrize_uniform(u: &LoopCurve) -> Result<LoopCurve> {
    let threshold = u.speed_threshold();
    let total = u.arc_length();
    if total <= threshold {
        return Err(Error::DegenerateSpeed {
            node: 0,
            speed: total,
            threshold,
        });
    }
    let points = match u.interpolation() {
        Interpolation::Trigonometric => resample_trigonometric(u.points()),
        Interpolation::Polygonal => resample_polyline(u.points()),
    };
    LoopCurve::new(points, u.interpolation())
}

fn resample_trigonometric(values: &[Point]) -> Vec<Point> {
    let n = values.len();
    let (pos, vel) = spectral::upsample_with_velocity(values, UPSAMPLE);
    let fine = pos.len();
    let speed: Vec<f64> = vel.iter().map(|v| v.norm()).collect();
    let arc = cumulative_arc(&speed);
    let total = arc[fine];
    let h = 1.0 / fine as f64;

    let mut out = Vec::with_capacity(n);
    out.push(values[0]);
    let mut j = 0usize;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while j + 1 < fine && arc[j + 1] < target {
            j += 1;
        }
        let (s0, s1) = (arc[j], arc[j + 1]);
        let (d0, d1) = (speed[j] * h, speed[(j + 1) % fine] * h);
        let x = invert_hermite(s0, s1, d0, d1, target);
        let (p0, p1) = (pos[j], pos[(j + 1) % fine]);
        let (v0, v1) = (vel[j] * h, vel[(j + 1) % fine] * h);
        out.push(hermite(p0, p1, v0, v1, x));
    }
    out
}

/// `arc[j] = int_0^{j/M} |u'|` for `j = 0..=M`, from the Fourier series of the
/// speed (mean part integrated linearly, oscillating part term by term).
fn cumulative_arc(speed: &[f64]) -> Vec<f64> {
    let m = speed.len();
    let as_complex: Vec<Point> = speed.iter().map(|&s| Point::new(s, 0.0)).collect();
    let mut coeffs = spectral::forward(&as_complex);
    let mean = coeffs[0].re;
    coeffs[0] = Point::new(0.0, 0.0);
    for (idx, c) in coeffs.iter_mut().enumerate().skip(1) {
        if spectral::is_nyquist(idx, m) {
            *c = Point::new(0.0, 0.0);
        } else {
            *c /= Point::new(0.0, 2.0 * PI * spectral::wavenumber(idx, m));
        }
    }
    let periodic = spectral::inverse(&coeffs);
    let base = periodic[0].re;
    let mut arc: Vec<f64> = (0..m)
        .map(|j| mean * j as f64 / m as f64 + periodic[j].re - base)
        .collect();
    arc.push(mean);
    // Guard against tiny non-monotone wiggles where the speed nearly vanishes.
    for j in 1..=m {
        if arc[j] < arc[j - 1] {
            arc[j] = arc[j - 1];
        }
    }
    arc
}

fn hermite_basis(x: f64) -> (f64, f64, f64, f64) {
    let x2 = x * x;
    let x3 = x2 * x;
    (
        2.0 * x3 - 3.0 * x2 + 1.0,
        x3 - 2.0 * x2 + x,
        -2.0 * x3 + 3.0 * x2,
        x3 - x2,
    )
}

fn hermite(p0: Point, p1: Point, m0: Point, m1: Point, x: f64) -> Point {
    let (h00, h10, h01, h11) = hermite_basis(x);
    p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11
}

/// Solve `H(x) = target` on `[0, 1]` for the scalar Hermite cubic through
/// `(s0, d0)`, `(s1, d1)`; safeguarded Newton.
fn invert_hermite(s0: f64, s1: f64, d0: f64, d1: f64, target: f64) -> f64 {
    if s1 <= s0 {
        return 0.0;
    }
    let eval = |x: f64| {
        let (h00, h10, h01, h11) = hermite_basis(x);
        s0 * h00 + d0 * h10 + s1 * h01 + d1 * h11
    };
    let deriv = |x: f64| {
        let x2 = x * x;
        s0 * (6.0 * x2 - 6.0 * x) + d0 * (3.0 * x2 - 4.0 * x + 1.0) + s1 * (-6.0 * x2 + 6.0 * x)
            + d1 * (3.0 * x2 - 2.0 * x)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = ((target - s0) / (s1 - s0)).clamp(0.0, 1.0);
    for _ in 0..60 {
        let r = eval(x) - target;
        if r.abs() <= 1e-15 * s1.abs().max(1.0) {
            break;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = deriv(x);
        let newton = if d > 0.0 { x - r / d } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            break;
        }
    }
    x
}

fn resample_polyline(values: &[Point]) -> Vec<Point> {
    let n = values.len();
    let mut arc = Vec::with_capacity(n + 1);
    arc.push(0.0);
    for k in 0..n {
        let seg = (values[(k + 1) % n] - values[k]).norm();
        arc.push(arc[k] + seg);
    }
    let total = arc[n];
    let mut out = Vec::with_capacity(n);
    out.push(values[0]);
    let mut j = 0usize;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while j + 1 < n && arc[j + 1] < target {
            j += 1;
        }
        let len = arc[j + 1] - arc[j];
        let w = if len > 0.0 {
            ((target - arc[j]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(values[j] + (values[(j + 1) % n] - values[j]) * w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaps(u: &LoopCurve) -> Vec<f64> {
        let p = u.points();
        let n = p.len();
        (0..n).map(|k| (p[(k + 1) % n] - p[k]).norm()).collect()
    }

    fn max_relative_gap_deviation(g: &[f64]) -> f64 {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        g.iter().map(|x| (x / mean - 1.0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_circle_is_a_fixed_point() {
        let u = LoopCurve::from_fn(128, |t| Point::from_polar(1.3, 2.0 * PI * t)).unwrap();
        let v = u.reparametrize_uniform().unwrap();
        for (a, b) in u.points().iter().zip(v.points()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn slanted_circle_recovers_constant_speed() {
        let n = 256;
        let s = |t: f64| t + 0.2 * (2.0 * PI * t).sin() / (2.0 * PI);
        let u = LoopCurve::from_fn(n, |t| Point::from_polar(1.0, 2.0 * PI * s(t))).unwrap();
        // Direct quadrature of int |u'|^2 = 4 pi^2 int (1 + 0.2 cos 2 pi t)^2 dt.
        let fine = 100_000;
        let direct: f64 = (0..fine)
            .map(|k| {
                let t = k as f64 / fine as f64;
                let sp = 2.0 * PI * (1.0 + 0.2 * (2.0 * PI * t).cos());
                sp * sp
            })
            .sum::<f64>()
            / fine as f64;
        assert!((u.length_energy() - direct.sqrt()).abs() < 1e-8);
        assert!(u.length_energy() > 2.0 * PI + 1e-3);

        let v = u.reparametrize_uniform().unwrap();
        assert!((v.length_energy() - 2.0 * PI).abs() < 1e-3);
        assert_eq!(v.points()[0], u.points()[0]);
        assert!(max_relative_gap_deviation(&gaps(&v)) < 1e-2);
        for p in v.points() {
            assert!((p.norm() - 1.0).abs() < 1e-6, "image preserved");
        }
    }

    #[test]
    fn clustered_polygon_becomes_uniform() {
        // Unit square with most nodes crowded onto the bottom edge.
        let mut pts = Vec::new();
        for k in 0..40 {
            pts.push(Point::new(k as f64 / 40.0, 0.0));
        }
        for k in 0..8 {
            pts.push(Point::new(1.0, k as f64 / 8.0));
        }
        for k in 0..8 {
            pts.push(Point::new(1.0 - k as f64 / 8.0, 1.0));
        }
        for k in 0..8 {
            pts.push(Point::new(0.0, 1.0 - k as f64 / 8.0));
        }
        let u = LoopCurve::polygonal(pts).unwrap();
        let v = u.reparametrize_uniform().unwrap();
        // Arc-gaps measured along the input polyline: the output nodes sit at
        // equal arc-length parameters, so consecutive distances along the
        // square boundary are 4/64 except across corners.
        let n = v.n();
        let along = |p: Point| -> f64 {
            if p.im.abs() < 1e-12 {
                p.re
            } else if (p.re - 1.0).abs() < 1e-12 {
                1.0 + p.im
            } else if (p.im - 1.0).abs() < 1e-12 {
                3.0 - p.re
            } else {
                4.0 - p.im
            }
        };
        let pos: Vec<f64> = v.points().iter().map(|p| along(*p)).collect();
        let g: Vec<f64> = (0..n)
            .map(|k| {
                let d = pos[(k + 1) % n] - pos[k];
                if d < 0.0 {
                    d + 4.0
                } else {
                    d
                }
            })
            .collect();
        assert!(max_relative_gap_deviation(&g) < 1e-2);
        assert!(v.length_energy() <= u.length_energy());
    }

    #[test]
    fn constant_loop_is_rejected() {
        let c = LoopCurve::constant(32, Point::new(2.0, 2.0)).unwrap();
        assert!(matches!(
            c.reparametrize_uniform(),
            Err(Error::DegenerateSpeed { .. })
        ));
    }
}
