//! Plane-wave sound field estimation from phase-perturbed microphone data.
//!
//! Complex plane-wave coefficients are lifted to non-negative measures on a
//! discretized phase circle. The per-sensor measures are tied to a common
//! barycenter through optimal transport with an offset ground cost, and the
//! coefficient estimate is the first Fourier moment of that barycenter.
//!
//! The numerical core (`model`, `lift`, `ot`, `baselines`) is generic over the
//! scalar type through [`Real`]; the simulation and evaluation harness works in
//! `f64`. Concrete aliases for both precisions live at the crate root.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod lift;
mod linalg;
pub mod model;
pub mod ot;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;

pub use baselines::{lad_lasso, lasso, tikhonov, BaselineOptions, SensingMatrix};
pub use lift::{
    first_moment, lift_coefficient, make_ground_cost, make_phase_grid, total_mass, DiscreteMeasure,
    GroundCost, PhaseGrid, VectorMeasure,
};
pub use model::{
    wavenumber, CoefficientVector, ComplexGrid, PlaneWaveDictionary, Point2, Rect, SensorArray,
};
pub use ot::{
    assemble_problem, estimate_ot, extract_coefficients, ot_barycenter, ot_distance,
    solve_barycenter, vector_ot_distance, BarycenterError, BarycenterFit, BarycenterProblem,
    BarycenterSolution, SolverDiagnostics, SolverOptions, TransportPlan,
};

pub type Complex32 = Complex<f32>;
pub type Complex64 = Complex<f64>;

pub type DictionaryF32 = PlaneWaveDictionary<f32>;
pub type DictionaryF64 = PlaneWaveDictionary<f64>;
pub type CoefficientsF32 = CoefficientVector<f32>;
pub type CoefficientsF64 = CoefficientVector<f64>;
pub type SensorArrayF32 = SensorArray<f32>;
pub type SensorArrayF64 = SensorArray<f64>;
pub type PhaseGridF32 = PhaseGrid<f32>;
pub type PhaseGridF64 = PhaseGrid<f64>;
pub type GroundCostF32 = GroundCost<f32>;
pub type GroundCostF64 = GroundCost<f64>;
pub type ProblemF32 = BarycenterProblem<f32>;
pub type ProblemF64 = BarycenterProblem<f64>;
pub type SolutionF32 = BarycenterSolution<f32>;
pub type SolutionF64 = BarycenterSolution<f64>;
