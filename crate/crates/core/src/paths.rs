//! Mountain-pass endpoints and initial paths from the zero loop.
//!
//! * [`rectangle_loop`]: piecewise-linear boundary of `[0, na] x [0, nb]`.
//! * [`initial_path_periodic`]: `s -> s * u` for a rectangle loop `u` whose
//!   energy is negative over a whole range of `lambda`.
//! * [`initial_path_bump`]: constant loops out to a point where `lambda K` is
//!   large, then a growing circle there.
//! * [`initial_path_k4`]: constant loops to a centre, a growing circle of
//!   radius `r0` and a translation of the full circle to a far endpoint.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CurvatureField, FieldKind};
use crate::functional::{energy, energy_value};
use crate::loopgeom::{Interpolation, LoopCurve, Point, MIN_NODES};

/// Default number of path nodes.
pub const DEFAULT_PATH_NODES: usize = 33;
/// Smallest admissible number of path nodes.
pub const MIN_PATH_NODES: usize = 16;

/// A discretised path `gamma(s_j)`, `s_j = j / (M - 1)`, from the zero loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFamily {
    pub nodes: Vec<LoopCurve>,
    /// Values of `lambda` the endpoint was certified for (inclusive).
    pub lambda_range: (f64, f64),
    /// The `lambda` at which `endpoint_energy` is reported.
    pub lambda_context: f64,
    pub endpoint_energy: f64,
}

/// Node of maximal energy along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMax {
    pub s: f64,
    pub index: usize,
    pub energy: f64,
    pub loop_curve: LoopCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeEnergy {
    pub s: f64,
    pub energy: f64,
    pub length_energy: f64,
    pub g_value: f64,
}

impl PathFamily {
    /// Check the structural invariants and the endpoint sign at both ends of
    /// `lambda_range` (the energy is affine in `lambda`).
    pub fn new(
        nodes: Vec<LoopCurve>,
        field: &CurvatureField,
        lambda_range: (f64, f64),
        lambda_context: f64,
    ) -> Result<Self> {
        if nodes.len() < MIN_PATH_NODES {
            return Err(Error::InvalidArgument(format!(
                "a path needs at least {MIN_PATH_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        let n = nodes[0].n();
        if nodes.iter().any(|u| u.n() != n) {
            return Err(Error::InvalidArgument(
                "all path nodes must share the same discretisation".into(),
            ));
        }
        if nodes[0].points().iter().any(|p| *p != Point::new(0.0, 0.0)) {
            return Err(Error::InvalidArgument("a path must start at the zero loop".into()));
        }
        let end = nodes.last().expect("nonempty");
        for lambda in [lambda_range.0, lambda_range.1] {
            let e = energy_value(end, field, lambda);
            if !(e < 0.0) {
                return Err(Error::EndpointViolation { energy: e });
            }
        }
        let endpoint_energy = energy_value(end, field, lambda_context);
        Ok(Self {
            nodes,
            lambda_range,
            lambda_context,
            endpoint_energy,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s(&self, j: usize) -> f64 {
        j as f64 / (self.nodes.len() - 1) as f64
    }

    pub fn endpoint(&self) -> &LoopCurve {
        self.nodes.last().expect("paths are nonempty")
    }

    pub fn node_energies(&self, field: &CurvatureField, lambda: f64) -> Vec<NodeEnergy> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let r = energy(u, field, lambda);
                NodeEnergy {
                    s: self.s(j),
                    energy: r.energy,
                    length_energy: r.length_energy,
                    g_value: r.g_value,
                }
            })
            .collect()
    }

    /// Per-node energies as CSV with header `s,E,L,G`.
    pub fn energies_csv(&self, field: &CurvatureField, lambda: f64) -> String {
        let mut out = String::from("s,E,L,G\n");
        for e in self.node_energies(field, lambda) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.s, e.energy, e.length_energy, e.g_value
            ));
        }
        out
    }

    /// JSON array of loop documents in the loop-file format.
    pub fn to_json(&self) -> String {
        let docs: Vec<String> = self.nodes.iter().map(|u| u.to_json()).collect();
        format!("[{}]", docs.join(","))
    }
}

/// Node of maximal energy; ties go to the smallest `s`.
pub fn path_max(path: &PathFamily, field: &CurvatureField, lambda: f64) -> PathMax {
    let mut best = 0usize;
    let mut best_e = f64::NEG_INFINITY;
    for (j, u) in path.nodes.iter().enumerate() {
        let e = energy_value(u, field, lambda);
        if e > best_e {
            best_e = e;
            best = j;
        }
    }
    PathMax {
        s: path.s(best),
        index: best,
        energy: best_e,
        loop_curve: path.nodes[best].clone(),
    }
}

/// Piecewise-linear parametrisation of the boundary of `[0, na] x [0, nb]`
/// starting at the origin, counter-clockwise for `orientation = 1` and
/// `t -> u(-t)` for `orientation = -1`. Corners sit on the grid nodes nearest
/// to their parameters; the length is exact when those are hit exactly.
pub fn rectangle_loop(n: u32, a: f64, b: f64, orientation: i32, nodes: usize) -> Result<LoopCurve> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rectangle sides must be positive, got a = {a}, b = {b}"
        )));
    }
    if n == 0 || (orientation != 1 && orientation != -1) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and orientation +-1, got n = {n}, orientation = {orientation}"
        )));
    }
    if nodes < MIN_NODES {
        return Err(Error::TooFewNodes {
            got: nodes,
            min: MIN_NODES,
        });
    }
    let (na, nb) = (n as f64 * a, n as f64 * b);
    let t1 = a / (2.0 * (a + b));
    let params = [0.0, t1, 0.5, 0.5 + t1, 1.0];
    let corners = [
        Point::new(0.0, 0.0),
        Point::new(na, 0.0),
        Point::new(na, nb),
        Point::new(0.0, nb),
        Point::new(0.0, 0.0),
    ];
    let mut idx: Vec<usize> = params
        .iter()
        .map(|t| (t * nodes as f64).round() as usize)
        .collect();
    // Keep every side at least one segment long.
    for s in 1..5 {
        if idx[s] <= idx[s - 1] {
            idx[s] = idx[s - 1] + 1;
        }
    }
    idx[4] = nodes;
    let mut pts = Vec::with_capacity(nodes);
    for side in 0..4 {
        let (k0, k1) = (idx[side], idx[side + 1]);
        let (p, q) = (corners[side], corners[side + 1]);
        for k in k0..k1 {
            let w = (k - k0) as f64 / (k1 - k0) as f64;
            pts.push(p + (q - p) * w);
        }
    }
    let u = LoopCurve::polygonal(pts)?;
    Ok(if orientation == 1 { u } else { u.reversed() })
}

/// `center + r exp(2 pi i j t)`.
pub fn circle_loop(r: f64, center: Point, j: i32, nodes: usize) -> Result<LoopCurve> {
    if !(r > 0.0 && r.is_finite()) || j == 0 {
        return Err(Error::InvalidArgument(format!(
            "circle needs r > 0 and j != 0, got r = {r}, j = {j}"
        )));
    }
    LoopCurve::from_fn(nodes, |t| {
        center + Point::from_polar(r, 2.0 * PI * j as f64 * t)
    })
}

fn check_range(lambda_range: (f64, f64)) -> Result<(f64, f64, f64)> {
    let (lo, hi) = lambda_range;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo * hi <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda range [{lo}, {hi}] must be ordered and exclude 0"
        )));
    }
    let sign = lo.signum();
    Ok((lo.abs().min(hi.abs()), lo.abs().max(hi.abs()), sign))
}

fn check_path_nodes(m: usize) -> Result<()> {
    if m < MIN_PATH_NODES {
        Err(Error::InvalidArgument(format!(
            "a path needs at least {MIN_PATH_NODES} nodes, got {m}"
        )))
    } else {
        Ok(())
    }
}

/// Smallest `n` with `2n(a+b) - n^2 |lambda| |int K| < 0` and
/// `2n(a+b) > 2 pi / (|lambda| sup|K|)` for every `|lambda| >= alpha`.
pub fn rectangle_multiplicity(a: f64, b: f64, cell_integral: f64, sup_norm: f64, alpha: f64) -> u32 {
    let mut n = 1u32;
    loop {
        let nf = n as f64;
        let length = 2.0 * nf * (a + b);
        if length - nf * nf * alpha * cell_integral.abs() < 0.0
            && length > 2.0 * PI / (alpha * sup_norm)
        {
            return n;
        }
        n += 1;
    }
}

/// How to build the initial path of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathConstructor {
    /// Rectangles for doubly periodic fields, the three-segment path otherwise.
    #[default]
    Auto,
    Periodic,
    Bump,
    K4,
}

/// Build a path certified for every `lambda` in `lambda_range`.
pub fn initial_path(
    field: &CurvatureField,
    lambda_range: (f64, f64),
    constructor: PathConstructor,
    path_nodes: usize,
    loop_nodes: usize,
) -> Result<PathFamily> {
    let constructor = match constructor {
        PathConstructor::Auto if field.kind() == FieldKind::DoublyPeriodic => PathConstructor::Periodic,
        PathConstructor::Auto => PathConstructor::K4,
        c => c,
    };
    match constructor {
        PathConstructor::Periodic => initial_path_periodic(field, lambda_range, path_nodes, loop_nodes),
        PathConstructor::K4 => initial_path_k4(field, lambda_range, path_nodes, loop_nodes),
        _ => {
            let (alpha, _, sign) = check_range(lambda_range)?;
            // The disc endpoint only gets more negative as |lambda| grows.
            let path = initial_path_bump(field, sign * alpha, path_nodes, loop_nodes)?;
            let context = 0.5 * (lambda_range.0 + lambda_range.1);
            PathFamily::new(path.nodes, field, lambda_range, context)
        }
    }
}

/// Scaled rectangle path for periodic fields.
pub fn initial_path_periodic(
    field: &CurvatureField,
    lambda_range: (f64, f64),
    path_nodes: usize,
    loop_nodes: usize,
) -> Result<PathFamily> {
    check_path_nodes(path_nodes)?;
    let (alpha, _, sign) = check_range(lambda_range)?;
    let (a, b) = field.periods().ok_or(Error::WrongKind {
        expected: FieldKind::DoublyPeriodic.as_str(),
        actual: field.kind().as_str(),
    })?;
    let avg = field.cell_average()?;
    if avg.abs() <= 1e-12 * field.sup_norm() {
        return Err(Error::ZeroAverage);
    }
    let cell_integral = avg * a * b;
    let n = rectangle_multiplicity(a, b, cell_integral, field.sup_norm(), alpha);
    let orientation = if sign * cell_integral > 0.0 { 1 } else { -1 };
    let end = rectangle_loop(n, a, b, orientation, loop_nodes)?;
    let nodes = (0..path_nodes)
        .map(|j| end.scale(j as f64 / (path_nodes - 1) as f64))
        .collect();
    let context = 0.5 * (lambda_range.0 + lambda_range.1);
    PathFamily::new(nodes, field, lambda_range, context)
}

fn probe_points(field: &CurvatureField) -> Vec<Point> {
    let m = 64;
    let (origin, w, h) = match *field.catalog() {
        crate::fields::Catalog::GaussianLobe { sigma, center, .. } => (
            center - Point::new(3.0 * sigma, 3.0 * sigma),
            6.0 * sigma,
            6.0 * sigma,
        ),
        _ => {
            let (a, b) = field.periods().unwrap_or((1.0, 1.0));
            (Point::new(0.0, 0.0), a, b)
        }
    };
    let mut pts = vec![Point::new(0.0, 0.0)];
    for i in 0..=m {
        for j in 0..=m {
            pts.push(origin + Point::new(w * i as f64 / m as f64, h * j as f64 / m as f64));
        }
    }
    if let crate::fields::Catalog::GaussianLobe { center, .. } = *field.catalog() {
        pts.push(center);
    }
    pts
}

fn constant_segment(from: Point, to: Point, intervals: usize, loop_nodes: usize) -> Result<Vec<LoopCurve>> {
    (0..intervals)
        .map(|k| LoopCurve::constant(loop_nodes, from + (to - from) * (k as f64 / intervals as f64)))
        .collect()
}

/// Disc path through a point where `lambda K` is largest.
pub fn initial_path_bump(
    field: &CurvatureField,
    lambda: f64,
    path_nodes: usize,
    loop_nodes: usize,
) -> Result<PathFamily> {
    check_path_nodes(path_nodes)?;
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonzero, got {lambda}")));
    }
    let mut best = Point::new(0.0, 0.0);
    let mut best_k = f64::NEG_INFINITY;
    for z in probe_points(field) {
        let v = lambda * field.eval_k(z);
        if v > best_k {
            best_k = v;
            best = z;
        }
    }
    if best_k <= 0.0 {
        return Err(Error::NoBumpFound(format!(
            "lambda K is nowhere positive on the probe grid (max {best_k})"
        )));
    }
    let r = 5.0 / best_k;
    let j = if lambda > 0.0 { 1 } else { -1 };
    let disc = circle_loop(r, Point::new(0.0, 0.0), j, loop_nodes)?;
    let end = disc.translate(best);
    let e = energy_value(&end, field, lambda);
    if !(e < 0.0) {
        return Err(Error::NoBumpFound(format!(
            "disc of radius {r} at ({}, {}) has energy {e}",
            best.re, best.im
        )));
    }
    let intervals = path_nodes - 1;
    let (lead, grow) = if best == Point::new(0.0, 0.0) {
        (0, intervals)
    } else {
        let lead = (intervals / 8).max(1);
        (lead, intervals - lead)
    };
    let mut nodes = constant_segment(Point::new(0.0, 0.0), best, lead, loop_nodes)?;
    for k in 0..=grow {
        let s = k as f64 / grow as f64;
        nodes.push(disc.scale(s).translate(best));
    }
    PathFamily::new(nodes, field, (lambda, lambda), lambda)
}

/// `int_{D_r(z)} |K1|` by polar Gauss-Legendre (radial) x trapezoid (angular).
fn disc_abs_k1(field: &CurvatureField, k0: f64, z: Point, r: f64) -> f64 {
    const ANGLES: usize = 48;
    let mut sum = 0.0;
    for &(x, w) in crate::quadrature::GAUSS6.iter() {
        // Split the radius in four panels for a smoother radial integrand.
        for panel in 0..4 {
            let rho = r * (panel as f64 + x) / 4.0;
            let mut ring = 0.0;
            for k in 0..ANGLES {
                let th = 2.0 * PI * k as f64 / ANGLES as f64;
                ring += (field.eval_k(z + Point::from_polar(rho, th)) - k0).abs();
            }
            sum += w * (r / 4.0) * rho * ring * (2.0 * PI / ANGLES as f64);
        }
    }
    sum
}

/// Split `intervals` between the three segments; the middle one gets a
/// multiple of four so `s = 1/4` is a node.
fn split_intervals(intervals: usize, lead: bool, tail: bool) -> (usize, usize, usize) {
    let side = (intervals / 8).max(1);
    let l = if lead { side } else { 0 };
    let t = if tail { side } else { 0 };
    let mut mid = intervals - l - t;
    let extra = mid % 4;
    mid -= extra;
    (l + extra, mid, t)
}

/// Three-segment path for constant and constant-at-infinity fields.
pub fn initial_path_k4(
    field: &CurvatureField,
    lambda_range: (f64, f64),
    path_nodes: usize,
    loop_nodes: usize,
) -> Result<PathFamily> {
    check_path_nodes(path_nodes)?;
    let (alpha, beta, sign) = check_range(lambda_range)?;
    let k0 = match field.kind() {
        FieldKind::Constant | FieldKind::ConstantAtInfinity => field.k0().expect("kind has k0"),
        other => {
            return Err(Error::WrongKind {
                expected: FieldKind::ConstantAtInfinity.as_str(),
                actual: other.as_str(),
            })
        }
    };
    let j = if sign * k0 > 0.0 { 1 } else { -1 };
    let r0 = 4.0 / (alpha * k0.abs());
    let eps0 = -2.0 * PI * r0 + alpha * PI * r0 * r0 * k0.abs();

    let (route, z0) = match *field.catalog() {
        crate::fields::Catalog::GaussianLobe {
            amplitude,
            sigma,
            center,
            ..
        } => {
            // Doubling search for R with beta int_{D_r0(z)} |K1| < eps0 / 2
            // on probe centres |z| = R and |z| = 2R.
            let mut radius = r0.max(sigma) + center.norm();
            let mut found = None;
            for _ in 0..40 {
                let ok = [radius, 2.0 * radius].iter().all(|&rr| {
                    (0..16).all(|k| {
                        let z = Point::from_polar(rr, 2.0 * PI * k as f64 / 16.0);
                        beta * disc_abs_k1(field, k0, z, r0) < 0.5 * eps0
                    })
                });
                if ok {
                    found = Some(radius);
                    break;
                }
                radius *= 2.0;
            }
            let big_r = found.ok_or_else(|| {
                Error::NoNegativeEndpoint(format!(
                    "no radius R up to {radius:e} makes the lobe negligible on discs of radius {r0}"
                ))
            })?;
            let far = Point::new(big_r, 0.0);
            // The lobe helps when it has the sign of k0 (and of lambda k0 after
            // orientation), so the growing circle is centred on it.
            let favourable = k0 * amplitude > 0.0;
            (if favourable { center } else { far }, far)
        }
        _ => (Point::new(0.0, 0.0), Point::new(0.0, 0.0)),
    };

    let intervals = path_nodes - 1;
    let lead = route != Point::new(0.0, 0.0);
    let tail = route != z0;
    let (n1, n2, n3) = split_intervals(intervals, lead, tail);
    let u0 = circle_loop(r0, Point::new(0.0, 0.0), j, loop_nodes)?;

    let mut nodes = constant_segment(Point::new(0.0, 0.0), route, n1, loop_nodes)?;
    for k in 0..n2 {
        nodes.push(u0.scale(k as f64 / n2 as f64).translate(route));
    }
    for k in 0..=n3 {
        let w = if n3 == 0 { 1.0 } else { k as f64 / n3 as f64 };
        let g = route + (z0 - route) * w;
        let node = u0.translate(g);
        for lambda in [sign * alpha, sign * beta] {
            let e = energy_value(&node, field, lambda);
            if !(e < 0.0) {
                return Err(Error::NoNegativeEndpoint(format!(
                    "translated circle at ({}, {}) has energy {e} for lambda = {lambda}",
                    g.re, g.im
                )));
            }
        }
        nodes.push(node);
    }
    let context = 0.5 * (lambda_range.0 + lambda_range.1);
    let nodes: Vec<LoopCurve> = nodes
        .into_iter()
        .map(|u| u.with_interpolation(Interpolation::Trigonometric))
        .collect();
    PathFamily::new(nodes, field, lambda_range, context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{g_line, gradient};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rectangle_lengths() {
        let u = rectangle_loop(1, 1.0, 1.0, 1, 256).unwrap();
        assert_abs_diff_eq!(u.length_energy(), 4.0, epsilon = 1e-9);
        let v = rectangle_loop(2, 1.0, 2.0, 1, 384).unwrap();
        assert_abs_diff_eq!(v.length_energy(), 12.0, epsilon = 1e-9);
        let b = u.barycenter();
        assert_abs_diff_eq!(b.re, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(b.im, 0.5, epsilon = 1e-9);
        // Misaligned corners: nearest-node sampling, O(1/N) length error.
        let w = rectangle_loop(1, 1.0, 1.3, 1, 100).unwrap();
        assert!((w.length_energy() - 4.6).abs() < 4.6 * 5.0 / 100.0);
        assert!(w.length_energy() >= 4.6 - 1e-12);
    }

    #[test]
    fn rectangle_orientation_flips_g() {
        let one = CurvatureField::constant(1.0).unwrap();
        let p = rectangle_loop(2, 1.0, 1.0, 1, 256).unwrap();
        let m = rectangle_loop(2, 1.0, 1.0, -1, 256).unwrap();
        assert_abs_diff_eq!(g_line(&p, &one), -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g_line(&m, &one), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(energy(&p, &one, 1.0).energy, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_examples() {
        let u = circle_loop(1.0, Point::new(0.0, 0.0), 1, 256).unwrap();
        assert_abs_diff_eq!(u.length_energy(), 2.0 * PI, epsilon = 1e-6);
        let v = circle_loop(1.0, Point::new(0.0, 0.0), -1, 256).unwrap();
        assert!(v.curvature().unwrap().iter().all(|k| (k + 1.0).abs() < 1e-9));
        let field = CurvatureField::constant(2.0).unwrap();
        let w = circle_loop(1.0 / (1.5 * 2.0), Point::new(0.3, 0.3), 1, 256).unwrap();
        assert!(gradient(&w, &field, 1.5).unwrap().dual_norm < 1e-4);
        assert!(circle_loop(0.0, Point::new(0.0, 0.0), 1, 64).is_err());
        assert!(circle_loop(1.0, Point::new(0.0, 0.0), 0, 64).is_err());
    }

    #[test]
    fn periodic_path_examples() {
        let one = CurvatureField::constant(1.0).unwrap();
        let path = initial_path_periodic(&one, (0.8, 1.2), 33, 256).unwrap();
        assert_abs_diff_eq!(path.endpoint().length_energy(), 24.0, epsilon = 1e-9);
        for lambda in [0.8, 1.0, 1.2] {
            let e = energy_value(path.endpoint(), &one, lambda);
            assert!(e < 0.0);
            assert!(path.endpoint().length_energy() > 2.0 * PI / lambda);
        }
        assert!(path.nodes[0].points().iter().all(|p| *p == Point::new(0.0, 0.0)));

        let neg = CurvatureField::sine_product(-1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        let np = initial_path_periodic(&neg, (0.5, 1.0), 33, 256).unwrap();
        assert!(g_line(np.endpoint(), &CurvatureField::constant(1.0).unwrap()) > 0.0);

        let zero = CurvatureField::sine_product(0.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(
            initial_path_periodic(&zero, (0.5, 1.0), 33, 256),
            Err(Error::ZeroAverage)
        );
    }

    #[test]
    fn periodic_path_crosses_the_well_above_the_lower_bound() {
        let field = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        let lambda = 1.0;
        let path = initial_path_periodic(&field, (lambda, lambda), 129, 256).unwrap();
        let level = 2.0 * PI / (lambda * field.sup_norm());
        let es = path.node_energies(&field, lambda);
        for w in es.windows(2) {
            if (w[0].length_energy - level) * (w[1].length_energy - level) <= 0.0 {
                // Inside the well E >= L/2, so the node on the inner side of
                // the crossing is within half a length step of the bound.
                let inner = if w[0].length_energy <= level { w[0] } else { w[1] };
                let tol = 0.5 * (level - inner.length_energy);
                assert!(tol <= 0.5 * path.endpoint().length_energy() / 128.0 + 1e-12);
                assert!(inner.energy >= inner.length_energy / 2.0 - 1e-12);
                assert!(inner.energy >= PI / (lambda * field.sup_norm()) - tol - 1e-12);
            }
        }
    }

    #[test]
    fn bump_path_examples() {
        let one = CurvatureField::constant(1.0).unwrap();
        let path = initial_path_bump(&one, 1.0, 33, 256).unwrap();
        assert_abs_diff_eq!(path.endpoint_energy, 10.0 * PI - 25.0 * PI, epsilon = 1e-6);
        assert!(path.endpoint_energy < 10.0 * PI - 12.5 * PI);
        let es = path.node_energies(&one, 1.0);
        assert_eq!(es[0].energy, 0.0);

        let lobe = CurvatureField::gaussian_lobe(0.2, 1.0, 3.0, Point::new(2.0, 1.0)).unwrap();
        let lp = initial_path_bump(&lobe, 1.0, 33, 256).unwrap();
        assert!(lp.endpoint_energy < 0.0);
        for (j, e) in lp.node_energies(&lobe, 1.0).iter().enumerate() {
            if lp.nodes[j].is_constant() {
                assert_eq!(e.energy, 0.0);
            }
        }
        assert!(matches!(
            initial_path_bump(&one, -1.0, 33, 256),
            Err(Error::NoBumpFound(_))
        ));
        // A narrow lobe over a weak background: the disc needed is far wider
        // than the lobe and its energy stays positive.
        let narrow = CurvatureField::gaussian_lobe(0.2, 1.0, 1.0, Point::new(2.0, 1.0)).unwrap();
        assert!(matches!(
            initial_path_bump(&narrow, 1.0, 33, 256),
            Err(Error::NoBumpFound(_))
        ));
    }

    #[test]
    fn k4_path_for_constant_field() {
        let one = CurvatureField::constant(1.0).unwrap();
        let path = initial_path_k4(&one, (1.0, 1.0), 33, 256).unwrap();
        let m = path_max(&path, &one, 1.0);
        assert_abs_diff_eq!(m.energy, PI, epsilon = 1e-3);
        assert_abs_diff_eq!(m.s, 0.25, epsilon = 1e-12);

        let wide = initial_path_k4(&one, (0.5, 2.0), 33, 256).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(path_max(&wide, &one, lambda).energy, PI / lambda, epsilon = 1e-3);
        }
    }

    #[test]
    fn k4_path_for_lobe_field() {
        let lobe = CurvatureField::gaussian_lobe(1.0, 0.5, 1.0, Point::new(0.0, 0.0)).unwrap();
        let path = initial_path_k4(&lobe, (1.0, 1.0), 33, 256).unwrap();
        assert!(path.endpoint_energy < 0.0);
        let m = path_max(&path, &lobe, 1.0);
        assert!(m.energy < PI);

        let off = CurvatureField::gaussian_lobe(1.0, 0.5, 1.0, Point::new(3.0, -2.0)).unwrap();
        let p = initial_path_k4(&off, (0.8, 1.2), 33, 256).unwrap();
        for e in p.node_energies(&off, 1.0).iter().take(4) {
            assert_eq!(e.energy, 0.0);
        }
        assert!(path_max(&p, &off, 1.0).energy < PI);

        let periodic = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            initial_path_k4(&periodic, (1.0, 1.0), 33, 256),
            Err(Error::WrongKind { .. })
        ));
    }

    #[test]
    fn path_max_tie_break_and_monotone_paths() {
        let one = CurvatureField::constant(1.0).unwrap();
        let zeros: Vec<LoopCurve> = (0..17)
            .map(|_| LoopCurve::constant(32, Point::new(0.0, 0.0)).unwrap())
            .collect();
        let flat = PathFamily {
            nodes: zeros,
            lambda_range: (1.0, 1.0),
            lambda_context: 1.0,
            endpoint_energy: 0.0,
        };
        let m = path_max(&flat, &one, 1.0);
        assert_eq!((m.s, m.energy), (0.0, 0.0));

        // Growing circles that never reach the critical radius: energy rises.
        let nodes: Vec<LoopCurve> = (0..17)
            .map(|j| circle_loop(0.5, Point::new(0.0, 0.0), 1, 64).unwrap().scale(j as f64 / 16.0))
            .collect();
        let rising = PathFamily {
            nodes,
            lambda_range: (1.0, 1.0),
            lambda_context: 1.0,
            endpoint_energy: 0.0,
        };
        assert_eq!(path_max(&rising, &one, 1.0).s, 1.0);
    }

    #[test]
    fn path_exports() {
        let one = CurvatureField::constant(1.0).unwrap();
        let path = initial_path_k4(&one, (1.0, 1.0), 17, 32).unwrap();
        let csv = path.energies_csv(&one, 1.0);
        assert!(csv.starts_with("s,E,L,G\n0,0,0,0\n"));
        assert_eq!(csv.lines().count(), 18);
        let v: serde_json::Value = serde_json::from_str(&path.to_json()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 17);
    }
}
