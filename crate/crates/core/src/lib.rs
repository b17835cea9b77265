//! Crouzeix-Raviart / Raviart-Thomas discretizations of convex minimization
//! problems with exact discrete duality.
//!
//! The primal problem `min ∫φ(∇_h u) + ∫ψ_h(Π u)` is discretized with
//! Crouzeix-Raviart elements, the dual problem with lowest-order
//! Raviart-Thomas fields and barycenter evaluation inside `φ*`. Discrete
//! solutions of either side are converted into each other elementwise.

pub mod assembly;
pub mod duality;
pub mod error;
pub mod experiments;
pub mod integrands;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod solvers;
pub mod spaces;

pub use assembly::SparseOperator;
pub use duality::{DiscreteProblem, Estimator, FluxReconstruction, PrimalReconstruction};
pub use error::{FemError, Result};
pub use integrands::{ConvexIntegrand, ExtReal, LowOrderTerm};
pub use mesh::{unit_square_mesh, BoundaryLabel, Point, Triangulation};
pub use solvers::{IterationTrace, SolverConfig};
pub use spaces::{
    AffineSpace, CrFunction, P0Field, P0Function, P1Function, P2Function, RtFunction,
};
