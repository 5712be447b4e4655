//! Volterra quadratic stochastic operators on the infinite-dimensional
//! simplex: sparse points, skew coefficient matrices, exact iteration,
//! linear Lyapunov functionals and limit-set analysis.
//!
//! With the default `parallel` feature, independent trials run on rayon;
//! without it the same API runs sequentially with identical results.

pub mod analysis;
pub mod batch;
pub mod error;
pub mod kahan;
pub mod lyapunov;
pub mod matrix;
pub mod operator;
pub mod simplex;

pub use analysis::{
    cesaro, check_corollary_support, entry_steps, ergodicity_verdict, estimate_omega, logistic,
    logistic_orbit, truncation_sweep, Budget, ErgodicReport, Mode, NormVerdict, OmegaEstimate,
    Verdict, WeakVerdict,
};
pub use error::{Error, Result};
pub use lyapunov::{
    admissibility, monotonicity_report, FunctionalDescriptor, LinearFunctional, Monotonicity,
    MonotonicityReport, Trend,
};
pub use matrix::{classify, ClassTag, MatrixClass, MatrixDescriptor, SkewMatrix};
pub use operator::{Trajectory, VolterraOperator};
pub use simplex::{l1_distance, rho_distance, PointLiteral, SimplexPoint, TOL_MASS};
