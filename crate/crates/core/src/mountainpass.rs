//! Mountain-pass level estimation by string relaxation, refinement of
//! near-critical loops, and sweeps over `lambda`.
//!
//! The critical points sought here are saddles of index one. Plain descent
//! walks away from them, so [`refine_critical`] offers a ridge mode: each
//! loop `w` is replaced by the energy peak along its scaling ray
//! `b + s (w - b)` (`b` the barycenter) and that peak energy is minimised by
//! Armijo steps along the negative gradient. Descent mode is kept for loops
//! inside the well around the constant loops, where it shows the collapse.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CurvatureField, FieldKind};
use crate::functional::{directional_derivative, energy_value, gradient, DELTA_L};
use crate::loopgeom::{h1_inner, Interpolation, LoopCurve, Point};
use crate::paths::{initial_path, path_max, PathConstructor, PathFamily};
use crate::verify::ode_residual;
use crate::winding::point_index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Gradient tolerance at the path maximum.
    pub tol_saddle: f64,
    /// Gradient tolerance of a refined critical point.
    pub tol_crit: f64,
    /// Iteration budget of the string relaxation.
    pub path_budget: usize,
    /// Iteration budget of refinement.
    pub descent_budget: usize,
    pub redistribute_every: usize,
    pub armijo_c1: f64,
    /// Step reduction factor on a rejected trial.
    pub backtrack: f64,
    /// First trial step; `0.1 / (1 + |lambda| sup|K|)` when absent.
    pub initial_step: Option<f64>,
    /// The relaxation stops early once the path maximum has dropped by less
    /// than `stall_tolerance * (1 + |max|)` over `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_saddle: 1e-4,
            tol_crit: 1e-6,
            path_budget: 5_000,
            descent_budget: 100_000,
            redistribute_every: 50,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: None,
            stall_window: 200,
            stall_tolerance: 1e-10,
        }
    }
}

impl SolverOptions {
    pub fn step_for(&self, field: &CurvatureField, lambda: f64) -> f64 {
        self.initial_step
            .unwrap_or(0.1 / (1.0 + lambda.abs() * field.sup_norm()))
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.tol_saddle, self.tol_crit, self.armijo_c1];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || self.initial_step.map_or(false, |s| !(s.is_finite() && s > 0.0))
            || self.redistribute_every == 0
        {
            return Err(Error::InvalidArgument(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Descent inside the well `L <= 2 pi / (|lambda| sup|K|)`, ridge outside.
    #[default]
    Auto,
    Descent,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    BudgetExhausted,
    /// The line search could not find an acceptable step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPointResult {
    #[serde(rename = "loop")]
    pub loop_curve: LoopCurve,
    pub energy: f64,
    pub grad_dual_norm: f64,
    pub ode_residual: f64,
    /// Winding number about the barycenter; `None` when the barycenter
    /// lies on the curve.
    pub winding_at_barycenter: Option<i64>,
    pub converged: bool,
    pub length_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub iterations: usize,
    pub mode: RefineMode,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MountainPassEstimate {
    pub c_estimate: f64,
    pub argmax_loop: LoopCurve,
    pub argmax_s: f64,
    pub grad_dual_norm_at_max: f64,
    pub iterations: usize,
    pub path_final: PathFamily,
    /// `grad_dual_norm_at_max < tol_saddle`; false when the budget ran out.
    pub converged: bool,
    /// Largest node energy after every relaxation iteration.
    pub max_history: Vec<f64>,
    /// Path maximum when the relaxation stopped.
    pub path_max_energy: f64,
}

/// Reparametrise (kept only if the energy does not rise) and optionally
/// translate the barycenter into the base cell of a periodic field. Path
/// nodes are never translated: neighbours must stay close.
fn post_step(u: LoopCurve, e: f64, field: &CurvatureField, lambda: f64, to_cell: bool) -> (LoopCurve, f64) {
    let (mut u, mut e) = (u, e);
    if let Ok(r) = u.reparametrize_uniform() {
        let er = energy_value(&r, field, lambda);
        if er <= e {
            u = r;
            e = er;
        }
    }
    if to_cell && field.kind() == FieldKind::DoublyPeriodic {
        let (a, b) = field.periods().expect("periodic field has periods");
        if let Ok(v) = u.normalize_to_cell(a, b) {
            if v != u {
                e = energy_value(&v, field, lambda);
                u = v;
            }
        }
    }
    (u, e)
}

/// Energy peak along `s -> b + s (w - b)`, returned with its scale.
fn peak(w: &LoopCurve, field: &CurvatureField, lambda: f64) -> Result<(LoopCurve, f64)> {
    let b = w.barycenter();
    let dir: Vec<Point> = w.points().iter().map(|p| p - b).collect();
    let dphi = |s: f64| directional_derivative(&w.scale_about(b, s), field, lambda, &dir);
    let scale = w.length_energy();

    let f1 = dphi(1.0)?;
    if f1 == 0.0 {
        return Ok((w.clone(), 1.0));
    }
    // Bracket with dphi(lo) > 0 > dphi(hi).
    let (mut lo, mut flo, mut hi, mut fhi);
    if f1 > 0.0 {
        (lo, flo, hi) = (1.0, f1, 2.0);
        fhi = dphi(hi)?;
        let mut k = 0;
        while fhi > 0.0 {
            k += 1;
            if k > 60 {
                return Err(Error::NoPeakAlongRay { scale: hi });
            }
            (lo, flo) = (hi, fhi);
            hi *= 2.0;
            fhi = dphi(hi)?;
        }
    } else {
        (hi, fhi, lo) = (1.0, f1, 0.5);
        flo = dphi(lo)?;
        let mut k = 0;
        while flo < 0.0 {
            k += 1;
            if k > 40 {
                return Err(Error::NoPeakAlongRay { scale: lo });
            }
            (hi, fhi) = (lo, flo);
            lo *= 0.5;
            flo = dphi(lo)?;
        }
    }
    // Illinois iteration.
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mut s = (lo * fhi - hi * flo) / (fhi - flo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let fs = dphi(s)?;
        if fs == 0.0 || fs.abs() <= 1e-14 * scale {
            return Ok((w.scale_about(b, s), s));
        }
        if fs > 0.0 {
            (lo, flo) = (s, fs);
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            (hi, fhi) = (s, fs);
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    let s = if flo.abs() < fhi.abs() { lo } else { hi };
    Ok((w.scale_about(b, s), s))
}

fn finish(
    u: LoopCurve,
    e: f64,
    grad_norm: f64,
    field: &CurvatureField,
    lambda: f64,
    mode: RefineMode,
    stop_reason: StopReason,
    history: (Vec<f64>, Vec<f64>),
    iterations: usize,
) -> CriticalPointResult {
    let ode = ode_residual(&u, field, lambda).unwrap_or(f64::INFINITY);
    let winding = point_index(&u, u.barycenter()).ok();
    CriticalPointResult {
        loop_curve: u,
        energy: e,
        grad_dual_norm: grad_norm,
        ode_residual: ode,
        winding_at_barycenter: winding,
        converged: stop_reason == StopReason::Converged,
        length_history: history.0,
        energy_history: history.1,
        iterations,
        mode,
        stop_reason,
    }
}

/// Drive `start` to a critical point of `E = L + lambda G`.
///
/// Each accepted step is followed by a constant-speed reparametrisation
/// (kept only if it does not raise the energy) and, for doubly periodic
/// fields, a lattice translation of the barycenter into the base cell.
pub fn refine_critical(
    start: &LoopCurve,
    field: &CurvatureField,
    lambda: f64,
    opts: &SolverOptions,
    mode: RefineMode,
) -> Result<CriticalPointResult> {
    opts.validate()?;
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonzero, got {lambda}")));
    }
    let l0 = start.length_energy();
    if l0 < DELTA_L {
        return Err(Error::CollapseToConstant {
            length: l0,
            iterations: 0,
        });
    }
    let mode = match mode {
        RefineMode::Auto if l0 <= 2.0 * PI / (lambda.abs() * field.sup_norm()) => RefineMode::Descent,
        RefineMode::Auto => RefineMode::Ridge,
        m => m,
    };
    let mut step = opts.step_for(field, lambda);

    let mut u = start.clone();
    let mut e = energy_value(&u, field, lambda);
    let mut g = gradient(&u, field, lambda)?;
    if g.dual_norm >= opts.tol_crit && mode == RefineMode::Ridge {
        let (p, _) = peak(&u, field, lambda)?;
        let ep = energy_value(&p, field, lambda);
        u = p;
        e = ep;
        g = gradient(&u, field, lambda)?;
    }
    let mut lengths = vec![u.length_energy()];
    let mut energies = vec![e];
    let mut it = 0usize;
    let stop = loop {
        if g.dual_norm < opts.tol_crit {
            break StopReason::Converged;
        }
        if it >= opts.descent_budget {
            break StopReason::BudgetExhausted;
        }
        let slope = g.dual_norm * g.dual_norm;
        let mut t = step;
        let accepted = loop {
            let trial = u.displaced(&g.values, -t);
            let cand = match mode {
                RefineMode::Ridge => peak(&trial, field, lambda).ok().map(|(p, _)| p),
                _ => Some(trial),
            };
            if let Some(c) = cand {
                let ec = energy_value(&c, field, lambda);
                if ec <= e - opts.armijo_c1 * t * slope {
                    break Some((c, ec));
                }
            }
            t *= opts.backtrack;
            if t < 1e-16 * step.max(1.0) || t < 1e-300 {
                break None;
            }
        };
        let Some((c, ec)) = accepted else {
            break StopReason::Stalled;
        };
        it += 1;
        step = t * 2.0;
        let l = c.length_energy();
        if l < DELTA_L {
            return Err(Error::CollapseToConstant {
                length: l,
                iterations: it,
            });
        }
        (u, e) = post_step(c, ec, field, lambda, true);
        lengths.push(u.length_energy());
        energies.push(e);
        g = match gradient(&u, field, lambda) {
            Ok(g) => g,
            Err(Error::DegenerateSpeed { .. }) if u.length_energy() < 1e3 * DELTA_L => {
                return Err(Error::CollapseToConstant {
                    length: u.length_energy(),
                    iterations: it,
                })
            }
            Err(err) => return Err(err),
        };
    };
    Ok(finish(
        u,
        e,
        g.dual_norm,
        field,
        lambda,
        mode,
        stop,
        (lengths, energies),
        it,
    ))
}

fn sub(a: &LoopCurve, b: &LoopCurve) -> Vec<Point> {
    a.points().iter().zip(b.points()).map(|(x, y)| x - y).collect()
}

/// Upwind tangent at an interior node.
fn tangent(prev: &LoopCurve, cur: &LoopCurve, next: &LoopCurve, e: [f64; 3]) -> Vec<Point> {
    let tp = sub(next, cur);
    let tm = sub(cur, prev);
    let [em, e0, ep] = e;
    if ep > e0 && e0 > em {
        tp
    } else if ep < e0 && e0 < em {
        tm
    } else {
        let (d1, d2) = ((ep - e0).abs(), (em - e0).abs());
        let (dmax, dmin) = (d1.max(d2), d1.min(d2));
        let (wp, wm) = if ep > em { (dmax, dmin) } else { (dmin, dmax) };
        tp.iter().zip(&tm).map(|(a, b)| a * wp + b * wm).collect()
    }
}

struct NodeUpdate {
    grad_norm: f64,
    next: Option<(LoopCurve, f64)>,
    step: f64,
}

#[allow(clippy::too_many_arguments)]
fn relax_node(
    j: usize,
    nodes: &[LoopCurve],
    energies: &[f64],
    steps: &[f64],
    frozen: &[bool],
    spacing: f64,
    field: &CurvatureField,
    lambda: f64,
    opts: &SolverOptions,
) -> NodeUpdate {
    let idle = |grad_norm| NodeUpdate {
        grad_norm,
        next: None,
        step: steps[j],
    };
    if frozen[j] {
        return idle(f64::INFINITY);
    }
    let u = &nodes[j];
    let Ok(g) = gradient(u, field, lambda) else {
        return idle(f64::INFINITY);
    };
    let interp = u.interpolation();
    let tau = tangent(
        &nodes[j - 1],
        u,
        &nodes[j + 1],
        [energies[j - 1], energies[j], energies[j + 1]],
    );
    let tt = h1_inner(&tau, &tau, interp);
    let d: Vec<Point> = if tt > 0.0 {
        let c = h1_inner(&g.values, &tau, interp) / tt;
        g.values.iter().zip(&tau).map(|(a, b)| a - b * c).collect()
    } else {
        g.values.clone()
    };
    let d2 = h1_inner(&d, &d, interp);
    if !(d2 > 0.0) {
        return idle(g.dual_norm);
    }
    let e = energies[j];
    // Moves are capped by the node spacing so the discrete path stays a
    // faithful sample of a continuous one.
    let mut t = steps[j].min(0.5 * spacing / d2.sqrt());
    let gap = |a: &LoopCurve, b: &LoopCurve| {
        let diff = sub(a, b);
        h1_inner(&diff, &diff, interp).sqrt()
    };
    for _ in 0..60 {
        let cand = u.displaced(&d, -t);
        let close = gap(&cand, &nodes[j - 1]) <= 3.0 * spacing && gap(&cand, &nodes[j + 1]) <= 3.0 * spacing;
        if close && cand.length_energy() >= DELTA_L {
            let ec = energy_value(&cand, field, lambda);
            if ec.is_finite() && ec <= e - opts.armijo_c1 * t * d2 {
                let (v, ev) = post_step(cand, ec, field, lambda, false);
                return NodeUpdate {
                    grad_norm: g.dual_norm,
                    next: Some((v, ev)),
                    step: 2.0 * t,
                };
            }
        }
        t *= opts.backtrack;
    }
    NodeUpdate {
        grad_norm: g.dual_norm,
        next: None,
        step: t.max(1e-12),
    }
}

/// Mean H1 distance between consecutive nodes.
fn path_spacing(nodes: &[LoopCurve]) -> f64 {
    let interp = nodes[0].interpolation();
    let total: f64 = nodes
        .windows(2)
        .map(|w| {
            let diff = sub(&w[1], &w[0]);
            h1_inner(&diff, &diff, interp).sqrt()
        })
        .sum();
    total / (nodes.len() - 1) as f64
}

fn argmax(energies: &[f64]) -> usize {
    let mut best = 0;
    for (j, e) in energies.iter().enumerate() {
        if *e > energies[best] {
            best = j;
        }
    }
    best
}

/// Respace the nodes at equal weighted H1 arc length, with weight growing
/// towards the energy maximum. Returns `None` if the path maximum would rise.
fn redistribute(
    nodes: &[LoopCurve],
    energies: &[f64],
    field: &CurvatureField,
    lambda: f64,
) -> Option<(Vec<LoopCurve>, Vec<f64>)> {
    let m = nodes.len();
    let interp = nodes[0].interpolation();
    let emax = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = emax - emin;
    let mut cum = vec![0.0];
    for j in 0..m - 1 {
        let diff = sub(&nodes[j + 1], &nodes[j]);
        let len = h1_inner(&diff, &diff, interp).sqrt();
        let mid = 0.5 * (energies[j] + energies[j + 1]);
        let rel = if span > 0.0 { (mid - emin) / span } else { 0.0 };
        let w = 1.0 + 3.0 * rel * rel;
        cum.push(cum[j] + w * len);
    }
    let total = cum[m - 1];
    if !(total > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(m);
    out.push(nodes[0].clone());
    let mut seg = 0;
    for k in 1..m - 1 {
        let target = total * k as f64 / (m - 1) as f64;
        while seg < m - 2 && cum[seg + 1] < target {
            seg += 1;
        }
        let width = cum[seg + 1] - cum[seg];
        let frac = if width > 0.0 { ((target - cum[seg]) / width).clamp(0.0, 1.0) } else { 0.0 };
        out.push(nodes[seg].lerp(&nodes[seg + 1], frac));
    }
    out.push(nodes[m - 1].clone());
    let new_e: Vec<f64> = out.iter().map(|u| energy_value(u, field, lambda)).collect();
    if new_e.iter().any(|e| !e.is_finite()) {
        return None;
    }
    let new_max = new_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (new_max <= emax).then_some((out, new_e))
}

/// Estimate the mountain-pass level `c_lambda` starting from `path`.
///
/// The interior nodes first descend along the gradient component normal to
/// the path (upwind tangent), each node with its own Armijo step, so no node
/// energy and hence no path maximum ever increases. The relaxed maximum is
/// then polished by [`refine_critical`] in ridge mode to `tol_saddle`.
pub fn estimate_c(
    path: &PathFamily,
    field: &CurvatureField,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<MountainPassEstimate> {
    opts.validate()?;
    let end_e = energy_value(path.endpoint(), field, lambda);
    if !(end_e < 0.0) {
        return Err(Error::EndpointViolation { energy: end_e });
    }
    let m = path.len();
    let mut nodes = path.nodes.clone();
    let mut energies: Vec<f64> = nodes.iter().map(|u| energy_value(u, field, lambda)).collect();
    let step0 = opts.step_for(field, lambda);
    let mut steps = vec![step0; m];
    let max_len = nodes.iter().map(|u| u.length_energy()).fold(0.0, f64::max);
    let frozen_below = (1e-4 * max_len).max(1e3 * DELTA_L);
    let spacing = path_spacing(&nodes);

    let mut history = vec![energies[argmax(&energies)]];
    let mut iterations = 0usize;
    let mut max_grad = f64::INFINITY;
    while iterations < opts.path_budget {
        let frozen: Vec<bool> = (0..m)
            .map(|j| j == 0 || j == m - 1 || nodes[j].length_energy() < frozen_below)
            .collect();
        let updates: Vec<NodeUpdate> = (1..m - 1)
            .into_par_iter()
            .map(|j| relax_node(j, &nodes, &energies, &steps, &frozen, spacing, field, lambda, opts))
            .collect();
        let imax = argmax(&energies);
        if imax > 0 && imax < m - 1 {
            max_grad = updates[imax - 1].grad_norm;
            if max_grad < opts.tol_saddle {
                break;
            }
        }
        iterations += 1;
        let mut moved = false;
        for (k, up) in updates.into_iter().enumerate() {
            let j = k + 1;
            steps[j] = up.step;
            if let Some((v, ev)) = up.next {
                nodes[j] = v;
                energies[j] = ev;
                moved = true;
            }
        }
        if iterations % opts.redistribute_every == 0 {
            if let Some((n2, e2)) = redistribute(&nodes, &energies, field, lambda) {
                nodes = n2;
                energies = e2;
                steps = vec![step0; m];
            }
        }
        let cur = energies[argmax(&energies)];
        history.push(cur);
        if !moved {
            break;
        }
        let w = opts.stall_window;
        if w > 0 && history.len() > w {
            let old = history[history.len() - 1 - w];
            if old - cur < opts.stall_tolerance * (1.0 + cur.abs()) {
                break;
            }
        }
    }

    let path_final = PathFamily::new(nodes, field, path.lambda_range, path.lambda_context)?;
    let pm = path_max(&path_final, field, lambda);
    let path_max_energy = pm.energy;

    let start = pm.loop_curve.with_interpolation(Interpolation::Trigonometric);
    let polish_opts = SolverOptions {
        tol_crit: opts.tol_saddle,
        ..*opts
    };
    let polished = if max_grad < opts.tol_saddle && start == pm.loop_curve {
        None
    } else {
        refine_critical(&start, field, lambda, &polish_opts, RefineMode::Ridge).ok()
    };
    let (argmax_loop, c_estimate, grad, extra, converged) = match polished {
        Some(r) => (r.loop_curve, r.energy, r.grad_dual_norm, r.iterations, r.converged),
        None => {
            let g = match gradient(&pm.loop_curve, field, lambda) {
                Ok(g) => g.dual_norm,
                Err(_) => f64::INFINITY,
            };
            (pm.loop_curve.clone(), pm.energy, g, 0, g < opts.tol_saddle)
        }
    };
    Ok(MountainPassEstimate {
        c_estimate,
        argmax_loop,
        argmax_s: pm.s,
        grad_dual_norm_at_max: grad,
        iterations: iterations + extra,
        path_final,
        converged,
        max_history: history,
        path_max_energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub path_nodes: usize,
    pub loop_nodes: usize,
    pub constructor: PathConstructor,
    /// Flag quotients above this multiple of the median quotient.
    pub denjoy_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            path_nodes: crate::paths::DEFAULT_PATH_NODES,
            loop_nodes: crate::loopgeom::DEFAULT_NODES,
            constructor: PathConstructor::Auto,
            denjoy_threshold: 1e3,
        }
    }
}

/// Outcome of one `lambda` of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub lambda: f64,
    /// Level estimate; NaN if the run failed.
    pub c: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub ode_residual: f64,
    pub argmax_s: f64,
    pub critical: Option<CriticalPointResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSweep {
    pub lambdas: Vec<f64>,
    pub c_values: Vec<f64>,
    /// `(c(lambda_{i-1}) - c(lambda_i)) / (lambda_i - lambda_{i-1})`; none for the first entry.
    pub left_quotients: Vec<Option<f64>>,
    pub flagged: Vec<bool>,
    pub entries: Vec<SweepEntry>,
    /// `(max - min) / mean` of `lambda c` for constant fields.
    pub lambda_c_spread: Option<f64>,
}

impl LambdaSweep {
    /// Rows `lambda,c,quotient,flag,converged,grad_norm,ode_residual`.
    pub fn csv_header() -> &'static str {
        "lambda,c,quotient,flag,converged,grad_norm,ode_residual"
    }

    pub fn csv_row(&self, i: usize) -> String {
        let e = &self.entries[i];
        let q = self.left_quotients[i].map(|q| q.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            e.lambda, e.c, q, self.flagged[i], e.converged, e.grad_norm, e.ode_residual
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for i in 0..self.entries.len() {
            s.push_str(&self.csv_row(i));
            s.push('\n');
        }
        s
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Quotients and flags computed from the stored `(lambda, c)` pairs.
pub fn denjoy_quotients(lambdas: &[f64], c: &[f64], threshold: f64) -> (Vec<Option<f64>>, Vec<bool>) {
    let q: Vec<Option<f64>> = (0..lambdas.len())
        .map(|i| (i > 0).then(|| (c[i - 1] - c[i]) / (lambdas[i] - lambdas[i - 1])))
        .collect();
    let finite: Vec<f64> = q.iter().flatten().cloned().filter(|v| v.is_finite()).collect();
    let med = median(finite);
    let flags = q
        .iter()
        .map(|qi| match (qi, med) {
            (Some(v), Some(m)) if v.is_finite() && m > 0.0 => *v > threshold * m,
            _ => false,
        })
        .collect();
    (q, flags)
}

fn sweep_one(path: &Result<PathFamily>, field: &CurvatureField, lambda: f64, opts: &SolverOptions) -> SweepEntry {
    let failed = |msg: String| SweepEntry {
        lambda,
        c: f64::NAN,
        converged: false,
        grad_norm: f64::NAN,
        ode_residual: f64::NAN,
        argmax_s: f64::NAN,
        critical: None,
        error: Some(msg),
    };
    let path = match path {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    let est = match estimate_c(path, field, lambda, opts) {
        Ok(e) => e,
        Err(e) => return failed(e.to_string()),
    };
    match refine_critical(&est.argmax_loop, field, lambda, opts, RefineMode::Ridge) {
        Ok(r) => SweepEntry {
            lambda,
            c: est.c_estimate,
            converged: r.converged,
            grad_norm: r.grad_dual_norm,
            ode_residual: r.ode_residual,
            argmax_s: est.argmax_s,
            critical: Some(r),
            error: None,
        },
        Err(e) => SweepEntry {
            c: est.c_estimate,
            argmax_s: est.argmax_s,
            ..failed(e.to_string())
        },
    }
}

/// Run [`estimate_c`] and a ridge refinement for each `lambda`.
///
/// One initial path serves every `lambda` of the same sign. Runs go out in
/// parallel batches and `sink` sees finished entries in grid order; breaking
/// from it ends the sweep after the current entry.
pub fn lambda_sweep_with(
    field: &CurvatureField,
    grid: &[f64],
    opts: &SolverOptions,
    sweep: &SweepOptions,
    mut sink: impl FnMut(&SweepEntry) -> ControlFlow<()>,
) -> Result<LambdaSweep> {
    opts.validate()?;
    if grid.iter().any(|l| !l.is_finite() || *l == 0.0) {
        return Err(Error::InvalidArgument("lambda grid must be finite and exclude 0".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("lambda grid must be strictly ascending".into()));
    }
    let negatives: Vec<f64> = grid.iter().cloned().filter(|l| *l < 0.0).collect();
    let positives: Vec<f64> = grid.iter().cloned().filter(|l| *l > 0.0).collect();
    let build = |g: &[f64]| -> Option<Result<PathFamily>> {
        (!g.is_empty()).then(|| {
            initial_path(
                field,
                (g[0], g[g.len() - 1]),
                sweep.constructor,
                sweep.path_nodes,
                sweep.loop_nodes,
            )
        })
    };
    let neg_path = build(&negatives);
    let pos_path = build(&positives);

    let batch = rayon::current_num_threads().max(1);
    let mut entries = Vec::with_capacity(grid.len());
    'outer: for chunk in grid.chunks(batch) {
        let done: Vec<SweepEntry> = chunk
            .par_iter()
            .map(|&lambda| {
                let path = if lambda < 0.0 { &neg_path } else { &pos_path };
                sweep_one(path.as_ref().expect("a path exists for each sign present"), field, lambda, opts)
            })
            .collect();
        for e in done {
            let flow = sink(&e);
            entries.push(e);
            if flow.is_break() {
                break 'outer;
            }
        }
    }

    let lambdas: Vec<f64> = entries.iter().map(|e| e.lambda).collect();
    let c_values: Vec<f64> = entries.iter().map(|e| e.c).collect();
    let (left_quotients, flagged) = denjoy_quotients(&lambdas, &c_values, sweep.denjoy_threshold);
    let lambda_c_spread = if field.k0().is_some() && field.kind() == FieldKind::Constant {
        let prods: Vec<f64> = lambdas.iter().zip(&c_values).map(|(l, c)| l * c).filter(|v| v.is_finite()).collect();
        (!prods.is_empty()).then(|| {
            let mx = prods.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mn = prods.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = prods.iter().sum::<f64>() / prods.len() as f64;
            (mx - mn) / mean.abs()
        })
    } else {
        None
    };
    Ok(LambdaSweep {
        lambdas,
        c_values,
        left_quotients,
        flagged,
        entries,
        lambda_c_spread,
    })
}

pub fn lambda_sweep(
    field: &CurvatureField,
    grid: &[f64],
    opts: &SolverOptions,
    sweep: &SweepOptions,
) -> Result<LambdaSweep> {
    lambda_sweep_with(field, grid, opts, sweep, |_| ControlFlow::Continue(()))
}
