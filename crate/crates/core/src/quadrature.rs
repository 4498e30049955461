//! One-dimensional quadrature: adaptive Simpson with an evaluation budget,
//! and fixed Gauss-Legendre rules for smooth integrands on short segments.

use crate::error::{Error, Result};

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`, spending at most
/// `budget` integrand calls.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, budget: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let mut calls = 3usize;
    let whole = simpson(a, b, fa, fm, fb);

    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }

    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        if calls + 2 > budget {
            return Err(Error::QuadratureFailure { tol, budget });
        }
        let flm = f(lm);
        let frm = f(rm);
        calls += 2;
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        if p.depth >= 48 || delta.abs() <= 15.0 * p.tol {
            total += left + right + delta / 15.0;
        } else {
            let half = 0.5 * p.tol;
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: half,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol: half,
                depth: p.depth + 1,
            });
        }
    }
    Ok(total)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Six-point Gauss-Legendre rule mapped to `[0, 1]`: (abscissa, weight).
pub const GAUSS6: [(f64, f64); 6] = [
    (0.033_765_242_898_423_99, 0.085_662_246_189_585_17),
    (0.169_395_306_766_867_74, 0.180_380_786_524_069_3),
    (0.380_690_406_958_401_5, 0.233_956_967_286_345_5),
    (0.619_309_593_041_598_5, 0.233_956_967_286_345_5),
    (0.830_604_693_233_132_3, 0.180_380_786_524_069_3),
    (0.966_234_757_101_576, 0.085_662_246_189_585_17),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_sine() {
        let v = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-10, 10_000).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_budget_is_enforced() {
        let err = adaptive_simpson(|x| (50.0 * x).sin().abs(), 0.0, 10.0, 1e-14, 50).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn gauss6_is_exact_for_degree_eleven() {
        let v: f64 = GAUSS6.iter().map(|&(x, w)| w * x.powi(11)).sum();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
        let s: f64 = GAUSS6.iter().map(|&(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}
