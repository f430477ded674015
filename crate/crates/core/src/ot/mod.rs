//! Optimal transport on the phase circle: exact pairwise transport, forward
//! barycenters, and the inverse barycenter estimator.

mod active_set;
mod admm;
mod barycenter;
mod transport;

pub use barycenter::{
    assemble_problem, estimate_ot, extract_coefficients, ot_barycenter, solve_barycenter,
    BarycenterError, BarycenterFit, BarycenterProblem, BarycenterSolution, SolverDiagnostics,
    SolverOptions,
};
pub use transport::{ot_distance, vector_ot_distance, TransportPlan};
