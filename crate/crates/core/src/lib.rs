//! Closed planar curves with prescribed curvature, found as mountain-pass
//! critical points of the energy `E(u) = L(u) + lambda G(u)`.

pub mod error;
pub mod fields;
pub mod functional;
pub mod loopgeom;
pub mod mountainpass;
pub mod paths;
pub mod quadrature;
pub mod samples;
pub mod spectral;
pub mod verify;
pub mod winding;

pub use error::{Error, Result};
pub use fields::{CurvatureField, FieldKind, FieldSpec};
pub use loopgeom::{Interpolation, LoopCurve, LoopMetrics, Point};
pub use mountainpass::{
    estimate_c, lambda_sweep, refine_critical, CriticalPointResult, LambdaSweep, MountainPassEstimate,
    RefineMode, SolverOptions,
};
pub use paths::PathFamily;
