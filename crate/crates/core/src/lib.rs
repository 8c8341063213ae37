//! Certified upper and lower bounds for singularly perturbed
//! linear-quadratic optimal control problems.
//!
//! The pipeline builds the reduced slow problem, adds initial and final
//! boundary-layer corrections to form a composite control, evaluates that
//! control in the primal cost (upper bound), and evaluates a dual trajectory
//! driven by the resulting state in the Fenchel dual cost (lower bound). A
//! full-dimension Riccati solver serves as the reference value.
//!
//! ```no_run
//! use spocb::{build_problem, bounds_report, fixtures, SolveOptions};
//!
//! let p: spocb::Problem = build_problem(&fixtures::f8_aircraft()).unwrap();
//! let report = bounds_report(&p, &SolveOptions::default()).unwrap();
//! assert!(report.lower <= report.upper);
//! ```
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod duality;
pub mod error;
pub mod fixtures;
pub mod layers;
pub mod linalg;
pub mod ode;
pub mod options;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod reduced;
pub mod riccati;
pub mod scalar;

pub use duality::{
    bounds_report, dual_control_from_state, dual_feasibility_residual, dual_terminal,
    evaluate_dual_objective, lower_bound, strong_duality_check, upper_bound, BoundsReport,
    DualTrajectory, StateDual,
};
pub use error::{Error, Result};
pub use layers::{
    block_diagonalize, composite_control, final_layer, hamiltonian_fast_matrix, initial_layer,
    slow_layer_corrections, zeroth_order, CompositeApproximation, FinalLayer, InitialLayer, LayerDecomposition,
    SlowCorrections,
};
pub use options::SolveOptions;
pub use oracle::{
    evaluate_primal_objective, optimal_trajectory, optimal_value, optimality_residual,
    primal_residual, solve_riccati_full, Trajectory,
};
pub use problem::{
    build_problem, scaled_dynamics, validate_assumptions, AssumptionCheck, AssumptionReport, Dims,
    ProblemConfig, ScaledSystem, SpLqProblem,
};
pub use quadrature::QuadratureRule;
pub use reduced::{
    build_reduced, outer_fast_algebraic, outer_solution, solve_reduced, OuterFastSolver,
    OuterPoint, OuterSolution, ReducedProblem, ReducedSolution,
};
pub use riccati::RiccatiSolution;
pub use scalar::Real;

pub type Problem = SpLqProblem<f64>;
pub type Problem32 = SpLqProblem<f32>;
pub type Reduced = ReducedProblem<f64>;
pub type Reduced32 = ReducedProblem<f32>;
pub type Layers = LayerDecomposition<f64>;
pub type Layers32 = LayerDecomposition<f32>;
pub type Riccati = RiccatiSolution<f64>;
pub type Riccati32 = RiccatiSolution<f32>;
pub type Path = Trajectory<f64>;
pub type Path32 = Trajectory<f32>;
pub type Report = BoundsReport;
