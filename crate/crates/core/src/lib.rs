//! Translation-method bounds on the area fraction of an inclusion in a
//! two-dimensional body with complex conductivity, computed from two pairs of
//! boundary voltage/current measurements.
//!
//! The pipeline runs scene → (mesh → FEM | layered-disk formula) → Cauchy
//! data → boundary moments → translation parameters → bound grid.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bounds;
pub mod cauchy;
pub mod fem;
pub mod functionals;
pub mod geometry;
pub mod mesher;
pub mod pipeline;
pub mod scene;
pub mod sparse;
pub mod translation;

pub use num_complex::Complex64 as C64;

pub use bounds::{optimize_grid, BoundsError, BoundsReport};
pub use cauchy::{BoundaryGrid, CauchyPair};
pub use functionals::{build_moments, evaluate_measurements, MeasurementSet, MomentTable};
pub use scene::{area_fraction, builtin_scene, parse_scene, validate_phases, PhasePair, Scene};
pub use translation::{lower_params, upper_params, Side, TranslationParams};
