//! Fixtures shared by the benchmarks.

use femdual_core::experiments::{disc_indicator, poisson_rhs};
use femdual_core::spaces::{barycenter_values, project_p0};
use femdual_core::{unit_square_mesh, LowOrderTerm, P0Function, Triangulation};

pub fn poisson_fixture(level: usize) -> (Triangulation, P0Function) {
    let mesh = unit_square_mesh(level).expect("level within range");
    let f = project_p0(&mesh, poisson_rhs);
    (mesh, f)
}

/// Fidelity term of the TV benchmark: `α = 10` and the indicator of the disc
/// of radius 1/2.
pub fn tv_fidelity(mesh: &Triangulation) -> LowOrderTerm {
    LowOrderTerm::quadratic(barycenter_values(mesh, |x| disc_indicator(0.5, x)), 10.0)
        .expect("alpha is positive")
}
