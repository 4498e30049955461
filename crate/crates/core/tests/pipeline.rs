use std::f64::consts::PI;

use kloop::mountainpass::{estimate_c, lambda_sweep, refine_critical, RefineMode, SolverOptions, SweepOptions};
use kloop::paths::{initial_path, initial_path_bump, PathConstructor};
use kloop::verify::{check_bounds, verify_loop, VerifyThresholds};
use kloop::{CurvatureField, Point};

#[test]
fn lobe_pipeline_lands_below_the_circle_level() {
    let lobe = CurvatureField::gaussian_lobe(1.0, 0.5, 1.0, Point::new(0.0, 0.0)).unwrap();
    let path = initial_path(&lobe, (1.0, 1.0), PathConstructor::Auto, 33, 256).unwrap();
    let est = estimate_c(&path, &lobe, 1.0, &SolverOptions::default()).unwrap();
    assert!(est.converged && check_bounds(&est, &lobe, 1.0));
    assert!(est.c_estimate < 0.99 * PI);
    let r = refine_critical(&est.argmax_loop, &lobe, 1.0, &SolverOptions::default(), RefineMode::Ridge).unwrap();
    assert!(r.converged);
    assert!((r.energy - est.c_estimate).abs() < 1e-6);
    let rep = verify_loop(&r.loop_curve, &lobe, 1.0, &VerifyThresholds::default()).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert_eq!(r.winding_at_barycenter, Some(1));
}

#[test]
fn bump_path_reaches_the_same_level_for_constant_fields() {
    let one = CurvatureField::constant(1.0).unwrap();
    let path = initial_path_bump(&one, 1.0, 33, 128).unwrap();
    let est = estimate_c(&path, &one, 1.0, &SolverOptions::default()).unwrap();
    assert!((est.c_estimate - PI).abs() <= 0.02 * PI);
}

#[test]
fn periodic_refinement_keeps_the_barycenter_in_the_cell() {
    let f = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
    let path = initial_path(&f, (1.0, 1.0), PathConstructor::Auto, 17, 64).unwrap();
    let est = estimate_c(&path, &f, 1.0, &SolverOptions::default()).unwrap();
    let shifted = est.argmax_loop.translate(Point::new(3.0, -2.0));
    let r = refine_critical(&shifted, &f, 1.0, &SolverOptions::default(), RefineMode::Ridge).unwrap();
    assert!(r.converged);
    let b = r.loop_curve.barycenter();
    assert!((0.0..1.0).contains(&b.re) && (0.0..1.0).contains(&b.im), "{b}");
    assert!((r.energy - est.c_estimate).abs() < 1e-5);
}

#[test]
fn negative_lambda_mirrors_positive() {
    let one = CurvatureField::constant(1.0).unwrap();
    let opts = SweepOptions { loop_nodes: 64, path_nodes: 17, ..Default::default() };
    let s = lambda_sweep(&one, &[-2.0, -1.0, 1.0, 2.0], &SolverOptions::default(), &opts).unwrap();
    for e in &s.entries {
        assert!(e.error.is_none(), "{:?}", e.error);
        assert!((e.c - PI / e.lambda.abs()).abs() <= 0.02 * PI / e.lambda.abs());
        let w = e.critical.as_ref().unwrap().winding_at_barycenter.unwrap();
        assert_eq!(w, e.lambda.signum() as i64);
    }
}

#[test]
fn sweep_json_is_deterministic() {
    let f = CurvatureField::sine_product(1.0, 0.5, 0.0, 1.0, 1.0).unwrap();
    let opts = SweepOptions { loop_nodes: 64, path_nodes: 17, ..Default::default() };
    let run = || serde_json::to_string(&lambda_sweep(&f, &[0.8, 1.0, 1.25], &SolverOptions::default(), &opts).unwrap()).unwrap();
    assert_eq!(run(), run());
}
