//! Model problems on `(-1,1)^2` with exact solutions.

use std::fmt;
use std::str::FromStr;

use crate::error::{FemError, Result};
use crate::mesh::Point;

/// Exact value `I(u) = −∫(1 − max{|x|,|y|})` of the infinity Laplace problem
/// with `f = 1`.
pub const INF_LAPLACE_ENERGY: f64 = -4.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemName {
    Poisson,
    Tv,
    InfLaplace,
    Obstacle,
    PLaplace,
}

impl ProblemName {
    pub const ALL: [ProblemName; 5] = [
        ProblemName::Poisson,
        ProblemName::Tv,
        ProblemName::InfLaplace,
        ProblemName::Obstacle,
        ProblemName::PLaplace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Poisson => "poisson",
            ProblemName::Tv => "tv",
            ProblemName::InfLaplace => "inf_laplace",
            ProblemName::Obstacle => "obstacle",
            ProblemName::PLaplace => "p_laplace",
        }
    }

    /// Admissible refinement levels.
    pub fn level_range(self) -> (usize, usize) {
        match self {
            ProblemName::Poisson => (2, 8),
            ProblemName::Tv => (3, 9),
            ProblemName::InfLaplace => (3, 8),
            ProblemName::Obstacle => (2, 7),
            ProblemName::PLaplace => (1, 8),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| FemError::Parameter(format!("unknown experiment '{s}'")))
    }
}

/// Problem name with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: ProblemName,
    /// Fidelity weight of the TV problem.
    pub alpha: f64,
    /// Radius of the TV input disc.
    pub radius: f64,
    /// Exponent of the p-Laplace problem.
    pub p: f64,
}

impl ProblemSpec {
    pub fn new(name: ProblemName) -> Self {
        ProblemSpec {
            name,
            alpha: 10.0,
            radius: 0.5,
            p: 1.5,
        }
    }

    /// Exact minimizer, where one is known.
    pub fn exact(&self, x: Point) -> Option<f64> {
        match self.name {
            ProblemName::Poisson | ProblemName::PLaplace => Some(poisson_exact(x)),
            ProblemName::Tv => Some(tv_exact(self.alpha, self.radius, x)),
            ProblemName::InfLaplace => Some(inf_laplace_exact(x)),
            ProblemName::Obstacle => None,
        }
    }

    /// Right-hand side `f` or input image `g`.
    pub fn data(&self, x: Point) -> f64 {
        match self.name {
            ProblemName::Poisson => poisson_rhs(x),
            ProblemName::Tv => disc_indicator(self.radius, x),
            ProblemName::InfLaplace => 1.0,
            ProblemName::Obstacle => obstacle_rhs(x),
            ProblemName::PLaplace => p_laplace_rhs(self.p, x),
        }
    }
}

/// `u(x,y) = (1 − x²)(1 − y²)`.
pub fn poisson_exact(x: Point) -> f64 {
    (1.0 - x.x * x.x) * (1.0 - x.y * x.y)
}

pub fn poisson_gradient(x: Point) -> Point {
    Point::new(
        -2.0 * x.x * (1.0 - x.y * x.y),
        -2.0 * x.y * (1.0 - x.x * x.x),
    )
}

/// `f = −Δu = 2(1 − x²) + 2(1 − y²)`.
pub fn poisson_rhs(x: Point) -> f64 {
    2.0 * (1.0 - x.x * x.x) + 2.0 * (1.0 - x.y * x.y)
}

pub fn disc_indicator(r: f64, x: Point) -> f64 {
    if x.norm() < r {
        1.0
    } else {
        0.0
    }
}

/// `max{0, 1 − 2/(α r)}` on the disc of radius `r`, zero outside.
pub fn tv_exact(alpha: f64, r: f64, x: Point) -> f64 {
    tv_plateau(alpha, r) * disc_indicator(r, x)
}

pub fn tv_plateau(alpha: f64, r: f64) -> f64 {
    (1.0 - 2.0 / (alpha * r)).max(0.0)
}

/// `u(x,y) = 1 − max{|x|,|y|}`.
pub fn inf_laplace_exact(x: Point) -> f64 {
    1.0 - x.x.abs().max(x.y.abs())
}

/// `f = −8 + 20 χ_{|x|<1/2}`.
pub fn obstacle_rhs(x: Point) -> f64 {
    if x.norm() < 0.5 {
        12.0
    } else {
        -8.0
    }
}

/// `f = −div(|∇u|^{p−2} ∇u)` for `u = (1 − x²)(1 − y²)`.
pub fn p_laplace_rhs(p: f64, x: Point) -> f64 {
    let a = poisson_gradient(x);
    let r2 = a.norm_squared();
    if r2 == 0.0 {
        return if p == 2.0 { poisson_rhs(x) } else { 0.0 };
    }
    let (uxx, uyy, uxy) = (
        -2.0 * (1.0 - x.y * x.y),
        -2.0 * (1.0 - x.x * x.x),
        4.0 * x.x * x.y,
    );
    let aha = a.x * a.x * uxx + 2.0 * a.x * a.y * uxy + a.y * a.y * uyy;
    -r2.powf(0.5 * (p - 2.0)) * (uxx + uyy + (p - 2.0) * aha / r2)
}
