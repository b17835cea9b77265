//! Discrete primal and dual energies, flux and primal reconstructions,
//! duality gaps and a posteriori estimators.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::integrands::{ConvexIntegrand, ExtReal, LowOrderTerm};
use crate::mesh::{Point, Triangulation};
use crate::quadrature::TriangleRule;
use crate::spaces::{fmt_sig, AffineSpace, CrFunction, P0Function, P1Function, RtFunction};

/// Spatial dimension.
pub const DIM: f64 = 2.0;

/// `I_h(u) = ∫φ(∇_h u) + ∫ψ_h(Π u)` together with `D_h`.
#[derive(Clone, Debug)]
pub struct DiscreteProblem<'m> {
    pub mesh: &'m Triangulation,
    pub phi: ConvexIntegrand,
    pub low_order: LowOrderTerm,
    /// Relative slack for equality constraints in `ψ_h*`.
    pub feasibility_tol: f64,
}

impl<'m> DiscreteProblem<'m> {
    pub fn new(
        mesh: &'m Triangulation,
        phi: ConvexIntegrand,
        low_order: LowOrderTerm,
    ) -> Result<Self> {
        if low_order.num_elements() != mesh.num_elements() {
            return Err(FemError::Parameter(
                "low-order data does not match the mesh".into(),
            ));
        }
        Ok(DiscreteProblem {
            mesh,
            phi,
            low_order,
            feasibility_tol: 1e-8,
        })
    }

    pub fn with_feasibility_tol(mut self, tol: f64) -> Self {
        self.feasibility_tol = tol;
        self
    }

    /// Elementwise data `f_h` of a linear or obstacle term.
    pub fn load(&self) -> Option<&P0Function> {
        match &self.low_order {
            LowOrderTerm::Linear { f } | LowOrderTerm::Obstacle { f } => Some(f),
            LowOrderTerm::Quadratic { .. } => None,
        }
    }
}

/// `Σ_T |T| [φ(∇u|_T) + ψ_h(x_T, u(x_T))]` on an elementwise-affine space.
pub fn affine_energy(
    space: &AffineSpace,
    phi: &ConvexIntegrand,
    lo: &LowOrderTerm,
    u: &[f64],
) -> ExtReal {
    let mesh = space.mesh();
    (0..mesh.num_elements())
        .map(|t| {
            (phi.phi(space.gradient(t, u)) + lo.value(t, space.barycenter_value(t, u)))
                .scale(mesh.elements()[t].area)
        })
        .sum()
}

pub fn primal_energy(pb: &DiscreteProblem, u: &CrFunction) -> ExtReal {
    affine_energy(
        &AffineSpace::crouzeix_raviart(pb.mesh),
        &pb.phi,
        &pb.low_order,
        &u.values,
    )
}

/// Energy of a conforming P1 function with the same discrete functional.
pub fn primal_energy_p1(pb: &DiscreteProblem, u: &P1Function) -> ExtReal {
    affine_energy(&AffineSpace::p1(pb.mesh), &pb.phi, &pb.low_order, &u.values)
}

/// Elementwise `|T| [φ*(z(x_T)) + ψ_h*(x_T, div z|_T)]`, i.e. the negated
/// contributions to `D_h`.
pub fn dual_energy_terms(
    mesh: &Triangulation,
    phi: &ConvexIntegrand,
    lo: &LowOrderTerm,
    z: &RtFunction,
    tol: f64,
) -> Vec<ExtReal> {
    (0..mesh.num_elements())
        .map(|t| {
            let (a, _) = z.affine_on(mesh, t);
            let div = z.divergence_on(mesh, t);
            (phi.phi_star(a) + lo.conjugate(t, div, tol)).scale(mesh.elements()[t].area)
        })
        .collect()
}

/// `D_h(z) = −Σ_T |T| [φ*(z(x_T)) + ψ_h*(x_T, div z|_T)]`. Infeasible fields
/// (value `−∞`) are reported with the violating elements.
pub fn dual_energy(pb: &DiscreteProblem, z: &RtFunction) -> Result<f64> {
    let terms = dual_energy_terms(pb.mesh, &pb.phi, &pb.low_order, z, pb.feasibility_tol);
    let bad: Vec<usize> = terms
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(t, _)| t)
        .collect();
    if !bad.is_empty() {
        return Err(FemError::Infeasible { elements: bad });
    }
    Ok(-terms.iter().map(|v| v.to_f64()).sum::<f64>())
}

#[derive(Clone, Debug)]
pub struct FluxReconstruction {
    pub flux: RtFunction,
    /// Largest normal-flux mismatch of the elementwise formula across a side
    /// (equal to the Euler-Lagrange residual of that side divided by `|S|`).
    pub normal_jump: f64,
    /// L2 norm of the Riesz representative of the discrete Euler-Lagrange
    /// residual, `(Σ_S (|S| jump_S)² / m_S)^{1/2}` with the CR mass `m_S`.
    pub residual: f64,
}

/// Elementwise formula `Dφ(∇_h u|_T) + d⁻¹ (Dψ_h(u(x_T)) + μ_T)(x − x_T)` as
/// `(a_T, b_T)`.
fn flux_formula(
    pb: &DiscreteProblem,
    u: &CrFunction,
    mu: Option<&P0Function>,
) -> Result<Vec<(Point, f64)>> {
    let mesh = pb.mesh;
    (0..mesh.num_elements())
        .map(|t| {
            let g = u.grad_on(mesh, t);
            let a = pb.phi.d_phi(g).ok_or_else(|| {
                FemError::Domain(format!(
                    "gradient on element {t} is outside the domain of Dφ"
                ))
            })?;
            let mut dpsi = pb.low_order.derivative(t, u.barycenter_value(mesh, t));
            if let Some(mu) = mu {
                dpsi += mu.values[t];
            }
            Ok((a, dpsi / DIM))
        })
        .collect()
}

/// Generalized Marini reconstruction of the discrete dual solution from a
/// discrete primal solution. `mu` is the multiplier of an obstacle
/// constraint. Rejected if the Euler-Lagrange residual (see
/// [`FluxReconstruction::residual`]) exceeds `el_tol`, i.e. `u` is not a
/// discrete minimizer. Mismatched normal fluxes are averaged.
pub fn reconstruct_flux(
    pb: &DiscreteProblem,
    u: &CrFunction,
    mu: Option<&P0Function>,
    el_tol: f64,
) -> Result<FluxReconstruction> {
    let mesh = pb.mesh;
    let local = flux_formula(pb, u, mu)?;
    let normal_from = |t: usize, s: usize| {
        let side = &mesh.sides()[s];
        let (a, b) = local[t];
        (a + (side.midpoint - mesh.elements()[t].barycenter) * b).dot(&side.normal)
    };
    let mut fluxes = vec![0.0; mesh.num_sides()];
    let mut jump: f64 = 0.0;
    let mut res2 = 0.0;
    for (s, side) in mesh.sides().iter().enumerate() {
        let minus = normal_from(side.minus, s);
        let mass = side_mass(mesh, s);
        let j = match side.plus {
            Some(p) => {
                let plus = normal_from(p, s);
                fluxes[s] = 0.5 * (minus + plus);
                minus - plus
            }
            None if mesh.is_neumann(s) => minus,
            None => {
                fluxes[s] = minus;
                0.0
            }
        };
        jump = jump.max(j.abs());
        res2 += (side.length * j).powi(2) / mass;
    }
    let residual = res2.sqrt();
    if !(residual <= el_tol) {
        return Err(FemError::Reconstruction {
            residual,
            tolerance: el_tol,
        });
    }
    Ok(FluxReconstruction {
        flux: RtFunction::new(fluxes),
        normal_jump: jump,
        residual,
    })
}

/// Diagonal CR mass `Σ_{T ∋ S} |T|/3` of side `s`.
fn side_mass(mesh: &Triangulation, s: usize) -> f64 {
    let side = &mesh.sides()[s];
    let mut m = mesh.elements()[side.minus].area;
    if let Some(p) = side.plus {
        m += mesh.elements()[p].area;
    }
    m / 3.0
}

#[derive(Clone, Debug)]
pub struct PrimalReconstruction {
    pub u: CrFunction,
    /// Largest midpoint mismatch across sides (and of the Dirichlet trace).
    pub continuity_residual: f64,
}

/// Inverse reconstruction `u|_T(x) = ū_T + Dφ*(z(x_T))·(x − x_T)`; the
/// elementwise affine function must be continuous at side midpoints to
/// within `tol`.
pub fn reconstruct_primal(
    pb: &DiscreteProblem,
    z: &RtFunction,
    u_bar: &P0Function,
    tol: f64,
) -> Result<PrimalReconstruction> {
    let mesh = pb.mesh;
    let slopes: Vec<Point> = (0..mesh.num_elements())
        .map(|t| {
            let (a, _) = z.affine_on(mesh, t);
            pb.phi.d_phi_star(a).ok_or_else(|| {
                FemError::Domain(format!("flux on element {t} is outside the domain of Dφ*"))
            })
        })
        .collect::<Result<_>>()?;
    let value_at =
        |t: usize, x: Point| u_bar.values[t] + slopes[t].dot(&(x - mesh.elements()[t].barycenter));
    let mut values = vec![0.0; mesh.num_sides()];
    let mut residual: f64 = 0.0;
    for (s, side) in mesh.sides().iter().enumerate() {
        let minus = value_at(side.minus, side.midpoint);
        match side.plus {
            Some(p) => {
                let plus = value_at(p, side.midpoint);
                residual = residual.max((minus - plus).abs());
                values[s] = 0.5 * (minus + plus);
            }
            None if mesh.is_dirichlet(s) => residual = residual.max(minus.abs()),
            None => values[s] = minus,
        }
    }
    if !(residual <= tol) {
        return Err(FemError::Reconstruction {
            residual,
            tolerance: tol,
        });
    }
    Ok(PrimalReconstruction {
        u: CrFunction::new(values),
        continuity_residual: residual,
    })
}

/// `∫_T |x − x_T|² = |T| (|e₁|² + |e₂|² + |e₃|²) / 36`.
pub fn second_moment(mesh: &Triangulation, t: usize) -> f64 {
    let v = mesh.vertices(t);
    let e2 =
        (v[1] - v[0]).norm_squared() + (v[2] - v[1]).norm_squared() + (v[0] - v[2]).norm_squared();
    mesh.elements()[t].area * e2 / 36.0
}

/// Multiplier of the classical mixed method from the CR solution:
/// `ū_T = u(x_T) + f_T/(d²|T|) ∫_T |x − x_T|²`.
pub fn classical_multiplier_correction(
    mesh: &Triangulation,
    u: &CrFunction,
    f: &P0Function,
) -> P0Function {
    P0Function::new(
        (0..mesh.num_elements())
            .map(|t| {
                u.barycenter_value(mesh, t)
                    + f.values[t] / (DIM * DIM * mesh.elements()[t].area) * second_moment(mesh, t)
            })
            .collect(),
    )
}

/// `I_h(u) − D_h(z)`.
pub fn duality_gap(pb: &DiscreteProblem, u: &CrFunction, z: &RtFunction) -> Result<f64> {
    let d = dual_energy(pb, z)?;
    match primal_energy(pb, u) {
        ExtReal::Finite(i) => Ok(i - d),
        other => Err(FemError::Domain(format!(
            "primal energy is not finite: {other:?}"
        ))),
    }
}

#[derive(Clone, Debug)]
pub struct Estimator {
    pub eta: f64,
    /// Elementwise contributions to `η²`.
    pub contributions: Vec<f64>,
}

impl Estimator {
    /// CSV `element,x_T,y_T,eta_sq_contribution`.
    pub fn to_csv(&self, mesh: &Triangulation) -> String {
        let mut out = String::from("element,x_T,y_T,eta_sq_contribution\n");
        for (t, c) in self.contributions.iter().enumerate() {
            let x = mesh.elements()[t].barycenter;
            let _ = writeln!(out, "{t},{},{},{}", fmt_sig(x.x), fmt_sig(x.y), fmt_sig(*c));
        }
        out
    }

    pub fn write_csv(&self, path: &Path, mesh: &Triangulation) -> Result<()> {
        std::fs::write(path, self.to_csv(mesh)).map_err(|source| FemError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// `η² = 2 Σ_T ∫_T [φ(∇u_c) − z·∇u_c + φ*(z)]` for a conforming `u_c` and a
/// flux with `−div z = f_h`. The integral uses the edge-midpoint rule.
pub fn aposteriori_eta(
    pb: &DiscreteProblem,
    u_c: &P1Function,
    z: &RtFunction,
) -> Result<Estimator> {
    let mesh = pb.mesh;
    if let LowOrderTerm::Linear { f } = &pb.low_order {
        let bad: Vec<usize> = (0..mesh.num_elements())
            .filter(|&t| {
                (z.divergence_on(mesh, t) + f.values[t]).abs()
                    > pb.feasibility_tol * (1.0 + f.values[t].abs())
            })
            .collect();
        if !bad.is_empty() {
            return Err(FemError::Infeasible { elements: bad });
        }
    }
    let rule = TriangleRule::edge_midpoint();
    let mut contributions = Vec::with_capacity(mesh.num_elements());
    let mut bad = Vec::new();
    for t in 0..mesh.num_elements() {
        let g = u_c.grad_on(mesh, t);
        let el = &mesh.elements()[t];
        let phi_g = pb.phi.phi(g);
        let mut finite = phi_g.is_finite();
        let c = rule.integrate(&mesh.vertices(t), el.area, |x| {
            let zx = z.eval_unchecked(mesh, t, x);
            let v = phi_g + pb.phi.phi_star(zx) + (-zx.dot(&g));
            finite &= v.is_finite();
            v.to_f64()
        });
        if !finite {
            bad.push(t);
        }
        contributions.push(2.0 * c);
    }
    if !bad.is_empty() {
        return Err(FemError::Infeasible { elements: bad });
    }
    let eta = contributions.iter().sum::<f64>().max(0.0).sqrt();
    Ok(Estimator { eta, contributions })
}

/// `‖∇u_c − ∇_h u_h‖ + ‖(f_h/d)(x − x_T)‖`.
pub fn aposteriori_eta_tilde(
    mesh: &Triangulation,
    u_c: &P1Function,
    u_cr: &CrFunction,
    f: &P0Function,
) -> f64 {
    let mut grad = 0.0;
    let mut osc = 0.0;
    for t in 0..mesh.num_elements() {
        grad +=
            mesh.elements()[t].area * (u_c.grad_on(mesh, t) - u_cr.grad_on(mesh, t)).norm_squared();
        osc += (f.values[t] / DIM).powi(2) * second_moment(mesh, t);
    }
    grad.sqrt() + osc.sqrt()
}

/// Euler-Lagrange residual of `u` as in [`FluxReconstruction::residual`].
pub fn euler_lagrange_residual(
    pb: &DiscreteProblem,
    u: &CrFunction,
    mu: Option<&P0Function>,
) -> Result<f64> {
    reconstruct_flux(pb, u, mu, f64::INFINITY).map(|r| r.residual)
}

/// Integral of `f` over the mesh with the degree-5 rule.
pub fn integrate<F: Fn(Point) -> f64>(mesh: &Triangulation, f: F) -> f64 {
    let rule = TriangleRule::degree5();
    (0..mesh.num_elements())
        .map(|t| rule.integrate(&mesh.vertices(t), mesh.elements()[t].area, &f))
        .sum()
}
