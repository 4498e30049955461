//! The energy `E(u) = L(u) + lambda G(u)` with `G(u) = int Q(u) . i u' dt`,
//! its derivative and the Riesz gradient in the discrete `H^1` inner product.
//!
//! Linear functionals on nodal perturbations are stored as a density `f`
//! with `ell(h) = (1/N) sum_k Re(f_k conj(h_k))`. In Fourier slots this is
//! `sum_m Re(f_m conj(h_m))`, and the Riesz representative is `f_m / w_m`
//! with the weights of [`crate::loopgeom::h1_inner`].

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::CurvatureField;
use crate::loopgeom::{derivative_symbol, h1_weight, Interpolation, LoopCurve, Point};
use crate::quadrature::GAUSS6;
use crate::spectral;
use crate::winding;

/// Below this length energy a loop counts as constant.
pub const DELTA_L: f64 = 1e-6;

/// Additive tolerance of the isoperimetric check.
pub const ISO_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub length_energy: f64,
    pub g_value: f64,
    pub energy: f64,
    pub lambda: f64,
    pub iso_bound: f64,
    pub iso_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub values: Vec<Point>,
    pub dual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoCheck {
    pub satisfied: bool,
    /// `sup|K| (arc length)^2 / (4 pi) - |G|`; negative when violated.
    pub slack: f64,
}

#[inline]
fn dot_i(a: Point, b: Point) -> f64 {
    // a . (i b) for plane vectors written as complex numbers.
    (a * b.conj()).im
}

/// `G(u)` in the loop's interpolation: trapezoid rule with spectral
/// velocity, or exact segment integrals (6-point Gauss) for polygons.
pub fn g_line(u: &LoopCurve, field: &CurvatureField) -> f64 {
    let p = u.points();
    let n = p.len();
    match u.interpolation() {
        Interpolation::Trigonometric => {
            let du = u.velocity();
            p.iter()
                .zip(&du)
                .map(|(z, v)| dot_i(field.eval_q(*z), *v))
                .sum::<f64>()
                / n as f64
        }
        Interpolation::Polygonal => (0..n)
            .map(|k| {
                let a = p[k];
                let d = p[(k + 1) % n] - a;
                if d == Point::new(0.0, 0.0) {
                    return 0.0;
                }
                GAUSS6
                    .iter()
                    .map(|&(x, w)| w * dot_i(field.eval_q(a + d * x), d))
                    .sum::<f64>()
            })
            .sum(),
    }
}

/// `G(u) = -int Ind_u K` on the winding grid; see [`winding::index_integral`].
pub fn g_winding(u: &LoopCurve, field: &CurvatureField) -> Result<f64> {
    let integral = winding::index_integral(u, |z| field.eval_k(z))?;
    Ok(-integral.value)
}

pub fn energy_value(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> f64 {
    u.length_energy() + lambda * g_line(u, field)
}

pub fn energy(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> EnergyReport {
    let length_energy = u.length_energy();
    let g_value = g_line(u, field);
    let iso_bound = field.sup_norm() * length_energy * length_energy / (4.0 * PI);
    EnergyReport {
        length_energy,
        g_value,
        energy: length_energy + lambda * g_value,
        lambda,
        iso_bound,
        iso_satisfied: g_value.abs() <= iso_bound + ISO_TOLERANCE,
    }
}

pub fn iso_check(u: &LoopCurve, field: &CurvatureField) -> IsoCheck {
    let s = u.arc_length();
    let bound = field.sup_norm() * s * s / (4.0 * PI);
    let g = g_line(u, field).abs();
    IsoCheck {
        satisfied: g <= bound + ISO_TOLERANCE,
        slack: bound - g,
    }
}

/// Fourier coefficients of the derivative density of `E` at `u`.
fn derivative_density(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> Result<Vec<Point>> {
    let l = u.length_energy();
    if l < DELTA_L {
        return Err(Error::NearConstantLoop { length: l });
    }
    let p = u.points();
    let n = p.len();
    let interp = u.interpolation();

    let g_density: Vec<Point> = match interp {
        Interpolation::Trigonometric => {
            let du = u.velocity();
            p.iter()
                .zip(&du)
                .map(|(z, v)| Point::i() * v * (lambda * field.eval_k(*z)))
                .collect()
        }
        Interpolation::Polygonal => {
            // Hat-function loads of int K(u) h . i u' over each segment.
            let mut load = vec![Point::new(0.0, 0.0); n];
            for k in 0..n {
                let a = p[k];
                let d = p[(k + 1) % n] - a;
                let (mut left, mut right) = (0.0, 0.0);
                for &(x, w) in &GAUSS6 {
                    let kv = field.eval_k(a + d * x);
                    left += w * kv * (1.0 - x);
                    right += w * kv * x;
                }
                let id = Point::i() * d;
                load[k] += id * left;
                load[(k + 1) % n] += id * right;
            }
            load.iter().map(|f| f * (lambda * n as f64)).collect()
        }
    };

    let mut coeffs = spectral::forward(&g_density);
    let u_hat = spectral::forward(p);
    for (idx, c) in coeffs.iter_mut().enumerate() {
        *c += u_hat[idx] * (derivative_symbol(idx, n, interp) / l);
    }
    Ok(coeffs)
}

/// `E'(u)[h]`.
pub fn directional_derivative(
    u: &LoopCurve,
    field: &CurvatureField,
    lambda: f64,
    h: &[Point],
) -> Result<f64> {
    if h.len() != u.n() {
        return Err(Error::InvalidArgument(format!(
            "direction has {} nodes, loop has {}",
            h.len(),
            u.n()
        )));
    }
    let f = derivative_density(u, field, lambda)?;
    let h_hat = spectral::forward(h);
    Ok(f.iter().zip(&h_hat).map(|(a, b)| (a * b.conj()).re).sum())
}

/// Riesz representative of `E'(u)` and its norm.
pub fn gradient(u: &LoopCurve, field: &CurvatureField, lambda: f64) -> Result<GradientField> {
    let n = u.n();
    let interp = u.interpolation();
    let mut coeffs = derivative_density(u, field, lambda)?;
    let mut norm2 = 0.0;
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let w = h1_weight(idx, n, interp);
        norm2 += c.norm_sqr() / w;
        *c /= w;
    }
    Ok(GradientField {
        values: spectral::inverse(&coeffs),
        dual_norm: norm2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopgeom::h1_inner;
    use crate::samples::random_smooth_loop;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle(n: usize, c: Point, r: f64, j: i32) -> LoopCurve {
        LoopCurve::from_fn(n, |t| c + Point::from_polar(r, 2.0 * PI * j as f64 * t)).unwrap()
    }

    fn unit_square() -> LoopCurve {
        let n = 64;
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let mut pts = Vec::new();
        for s in 0..4 {
            let p = Point::new(corners[s].0, corners[s].1);
            let q = Point::new(corners[(s + 1) % 4].0, corners[(s + 1) % 4].1);
            for k in 0..n / 4 {
                pts.push(p + (q - p) * (k as f64 / (n / 4) as f64));
            }
        }
        LoopCurve::polygonal(pts).unwrap()
    }

    #[test]
    fn g_of_unit_circles() {
        let one = CurvatureField::constant(1.0).unwrap();
        let ccw = circle(256, Point::new(0.0, 0.0), 1.0, 1);
        assert_abs_diff_eq!(g_line(&ccw, &one), -PI, epsilon = 1e-6);
        assert_abs_diff_eq!(g_line(&ccw.reversed(), &one), PI, epsilon = 1e-6);
        let c = LoopCurve::constant(32, Point::new(2.0, 1.0)).unwrap();
        assert_eq!(g_line(&c, &one), 0.0);
    }

    #[test]
    fn g_winding_examples() {
        let one = CurvatureField::constant(1.0).unwrap();
        let ccw = circle(256, Point::new(0.0, 0.0), 1.0, 1);
        assert_abs_diff_eq!(g_winding(&ccw, &one).unwrap(), -PI, epsilon = 2e-3);
        assert_abs_diff_eq!(g_winding(&unit_square(), &one).unwrap(), -1.0, epsilon = 2e-3);
    }

    #[test]
    fn energy_examples() {
        let one = CurvatureField::constant(1.0).unwrap();
        let r = 0.8;
        let k0 = 1.7;
        let field = CurvatureField::constant(k0).unwrap();
        let u = circle(256, Point::new(0.3, -0.2), r, 1);
        let e = energy(&u, &field, 1.3);
        assert_abs_diff_eq!(e.energy, 2.0 * PI * r - 1.3 * k0 * PI * r * r, epsilon = 1e-6);
        assert_eq!(e.energy, e.length_energy + e.lambda * e.g_value);
        let c = LoopCurve::constant(16, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(energy(&c, &one, 1.0).energy, 0.0);
    }

    #[test]
    fn critical_circle_has_vanishing_gradient() {
        let k0 = 1.0;
        let lambda = 1.0;
        let field = CurvatureField::constant(k0).unwrap();
        let u = circle(256, Point::new(0.0, 0.0), 1.0 / (lambda * k0), 1);
        assert!(gradient(&u, &field, lambda).unwrap().dual_norm < 1e-4);
        let v = circle(256, Point::new(0.0, 0.0), 2.0 / (lambda * k0), 1);
        assert!(gradient(&v, &field, lambda).unwrap().dual_norm > 0.1);

        let neg = CurvatureField::constant(-2.0).unwrap();
        let w = circle(256, Point::new(0.5, 0.5), 1.0 / (0.75 * 2.0), -1);
        assert!(gradient(&w, &neg, 0.75).unwrap().dual_norm < 1e-4);
    }

    #[test]
    fn gradient_refuses_constant_loops() {
        let one = CurvatureField::constant(1.0).unwrap();
        let c = LoopCurve::constant(32, Point::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            gradient(&c, &one, 1.0),
            Err(Error::NearConstantLoop { .. })
        ));
    }

    fn finite_difference(u: &LoopCurve, f: &CurvatureField, lambda: f64, h: &[Point]) -> f64 {
        let eps = 1e-5;
        let plus = energy_value(&u.displaced(h, eps), f, lambda);
        let minus = energy_value(&u.displaced(h, -eps), f, lambda);
        (plus - minus) / (2.0 * eps)
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fields = [
            CurvatureField::constant(1.0).unwrap(),
            CurvatureField::sine_product(1.0, 0.5, 0.25, 1.0, 1.0).unwrap(),
            CurvatureField::gaussian_lobe(1.0, 0.5, 1.0, Point::new(0.0, 0.0)).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (i, field) in fields.iter().enumerate() {
            for trial in 0..8 {
                let u = random_smooth_loop(&mut rng, 128, 4, 1.0, Point::new(0.2, -0.1));
                let u = if trial % 2 == 0 {
                    u
                } else {
                    u.with_interpolation(Interpolation::Polygonal)
                };
                let lambda = rng.gen_range(0.3..2.0);
                for _ in 0..5 {
                    let h = random_smooth_loop(&mut rng, 128, 3, 1.0, Point::new(0.1, 0.3));
                    let exact = directional_derivative(&u, field, lambda, h.points()).unwrap();
                    let fd = finite_difference(&u, field, lambda, h.points());
                    assert!(
                        (exact - fd).abs() < 1e-4 * exact.abs().max(1e-2),
                        "field {i}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn riesz_representative_is_consistent() {
        let field = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for interp in [Interpolation::Trigonometric, Interpolation::Polygonal] {
            let u = random_smooth_loop(&mut rng, 64, 3, 1.0, Point::new(0.0, 0.0))
                .with_interpolation(interp);
            let g = gradient(&u, &field, 1.2).unwrap();
            let self_ip = h1_inner(&g.values, &g.values, interp);
            assert!((self_ip - g.dual_norm.powi(2)).abs() <= 1e-10 * g.dual_norm.powi(2));
            let h = random_smooth_loop(&mut rng, 64, 3, 1.0, Point::new(0.4, 0.0));
            let via_riesz = h1_inner(&g.values, h.points(), interp);
            let direct = directional_derivative(&u, &field, 1.2, h.points()).unwrap();
            assert_abs_diff_eq!(via_riesz, direct, epsilon = 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn iso_check_examples() {
        let one = CurvatureField::constant(1.0).unwrap();
        let c = iso_check(&circle(256, Point::new(0.0, 0.0), 1.0, 1), &one);
        assert!(c.satisfied && c.slack.abs() < 1e-6);
        let sq = iso_check(&unit_square(), &one);
        assert!(sq.satisfied);
        assert_abs_diff_eq!(sq.slack, 4.0 / PI - 1.0, epsilon = 1e-12);
        let k = iso_check(&LoopCurve::constant(16, Point::new(1.0, 1.0)).unwrap(), &one);
        assert!(k.satisfied && k.slack == 0.0);
    }

    #[test]
    fn lattice_translation_invariance() {
        let field = CurvatureField::sine_product(1.0, 0.5, 0.25, 1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_smooth_loop(&mut rng, 128, 4, 1.0, Point::new(0.5, 0.5));
        let v = u.translate(Point::new(3.0, -4.0));
        let (a, b) = (energy(&u, &field, 1.0), energy(&v, &field, 1.0));
        assert_abs_diff_eq!(a.length_energy, b.length_energy, epsilon = 1e-9);
        assert_abs_diff_eq!(a.g_value, b.g_value, epsilon = 1e-9);
        let (ga, gb) = (
            gradient(&u, &field, 1.0).unwrap().dual_norm,
            gradient(&v, &field, 1.0).unwrap().dual_norm,
        );
        assert_abs_diff_eq!(ga, gb, epsilon = 1e-9);
    }

    #[test]
    fn energy_dominates_half_length_in_the_well() {
        let field = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        let lambda = 1.4;
        let cap = 2.0 * PI / (lambda * field.sup_norm());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let u = random_smooth_loop(&mut rng, 128, 5, 1.0, Point::new(0.3, 0.6));
            let b = u.barycenter();
            let target = rng.gen_range(0.05..1.0) * cap;
            let v = u.scale_about(b, target / u.length_energy());
            let e = energy(&v, &field, lambda);
            assert!(e.energy >= e.length_energy / 2.0 - 1e-12);
        }
    }
}
