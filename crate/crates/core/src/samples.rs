//! Seeded random loops for tests, benchmarks and the acceptance suite.

use std::f64::consts::PI;

use rand::Rng;

use crate::loopgeom::{LoopCurve, Point};

/// A random band-limited loop: a base circle of radius in `[0.6, 1] * scale`
/// (random orientation) plus modes `2..=modes` and `-modes..=-1` with
/// coefficients decaying like `1/m^2`.
pub fn random_smooth_loop<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    modes: usize,
    scale: f64,
    center: Point,
) -> LoopCurve {
    let orientation = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let base = Point::from_polar(scale * rng.gen_range(0.6..1.0), rng.gen_range(0.0..2.0 * PI));
    let mut coeffs: Vec<(f64, Point)> = vec![(orientation, base)];
    for m in 1..=modes as i64 {
        for freq in [m, -m] {
            if freq as f64 == orientation {
                continue;
            }
            let size = scale * 0.35 / (m * m) as f64;
            let c = Point::new(rng.gen_range(-size..size), rng.gen_range(-size..size));
            coeffs.push((freq as f64, c));
        }
    }
    LoopCurve::from_fn(n, |t| {
        coeffs
            .iter()
            .fold(center, |acc, (m, c)| acc + c * Point::from_polar(1.0, 2.0 * PI * m * t))
    })
    .expect("sample loops have enough finite nodes")
}
