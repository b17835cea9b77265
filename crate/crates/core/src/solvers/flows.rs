//! Semi-implicit primal and dual gradient flows with L2 time derivative.

use super::{saddle_solve, IterationTrace, SaddleOptions, SolverConfig};
use crate::assembly::{
    affine_barycenter_mass, affine_load, affine_mass, affine_weighted_stiffness, div_coupling,
    rt_mass_exact, rt_mass_modified_weighted,
};
use crate::duality::{affine_energy, dual_energy_terms};
use crate::error::{FemError, Result};
use crate::integrands::{ConvexIntegrand, LowOrderTerm};
use crate::linalg::{Cholesky, SparseOperator};
use crate::mesh::Triangulation;
use crate::spaces::{rt_dofmap, AffineSpace, DofMap, P0Function, RtFunction};

#[derive(Clone, Debug)]
pub struct PrimalFlowResult {
    /// Global coefficient vector in the space the flow ran on.
    pub u: Vec<f64>,
    pub trace: IterationTrace,
}

/// Semi-implicit primal iteration: each step solves
/// `(d_t u^k, v) + (ϕ'(|∇u^{k−1}|)/|∇u^{k−1}| ∇u^k, ∇v) + (Dψ_h(Π u^k), Π v) = 0`,
/// implicit in the (linear or quadratic) low-order term. Stops once
/// `‖d_t u^k‖_{L2} ≤ eps_stop`; running out of iterations is reported through
/// `trace.converged`.
pub fn primal_flow(
    space: &AffineSpace,
    phi: &ConvexIntegrand,
    lo: &LowOrderTerm,
    u0: &[f64],
    cfg: &SolverConfig,
) -> Result<PrimalFlowResult> {
    cfg.validate()?;
    if !phi.is_algorithm_eligible() {
        return Err(FemError::Precondition(
            "integrand radial ratio is not positive, continuous and non-increasing".into(),
        ));
    }
    let mesh = space.mesh();
    if u0.len() != space.num_dofs() || lo.num_elements() != mesh.num_elements() {
        return Err(FemError::Parameter(
            "initial iterate or data do not match the space".into(),
        ));
    }
    let dofs = space.dofs();
    let mass = affine_mass(space).restrict(dofs, dofs);
    let (fidelity, load) = match lo {
        LowOrderTerm::Linear { f } => (None, affine_load(space, f)),
        LowOrderTerm::Quadratic { g, alpha } => {
            let m0 = affine_barycenter_mass(space, &vec![*alpha; mesh.num_elements()])
                .restrict(dofs, dofs);
            let ag = P0Function::new(g.values.iter().map(|g| alpha * g).collect());
            (Some(m0), affine_load(space, &ag))
        }
        LowOrderTerm::Obstacle { .. } => {
            return Err(FemError::Parameter(
                "the primal flow needs a linear or quadratic low-order term".into(),
            ))
        }
    };
    let load = dofs.restrict(&load);
    let mut base = mass.scaled(1.0 / cfg.tau);
    if let Some(m0) = &fidelity {
        base = base.add_scaled(m0, 1.0);
    }

    let mut u = dofs.restrict(u0);
    let mut full = dofs.extend(&u);
    let mut trace = IterationTrace::start(affine_energy(space, phi, lo, &full).to_f64());
    let mut chol: Option<Cholesky> = None;
    for _ in 0..cfg.max_iters {
        let weights = P0Function::new(
            space
                .gradients(&full)
                .iter()
                .map(|g| phi.radial_ratio(g.norm()))
                .collect(),
        );
        let a = base.add_scaled(
            &affine_weighted_stiffness(space, &weights)?.restrict(dofs, dofs),
            1.0,
        );
        match chol.as_mut() {
            Some(c) => c.refactor(&a)?,
            None => chol = Some(Cholesky::factor(&a)?),
        }
        let mu = mass.matvec(&u);
        let rhs: Vec<f64> = mu.iter().zip(&load).map(|(m, b)| m / cfg.tau + b).collect();
        let next = chol.as_ref().unwrap().solve(&rhs);
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let step = mass.quadratic_form(&diff).max(0.0).sqrt() / cfg.tau;
        u = next;
        full = dofs.extend(&u);
        trace.push(affine_energy(space, phi, lo, &full).to_f64(), step);
        if step <= cfg.eps_stop {
            trace.converged = true;
            break;
        }
    }
    Ok(PrimalFlowResult { u: full, trace })
}

#[derive(Clone, Debug)]
pub struct DualFlowResult {
    pub z: RtFunction,
    /// Multiplier of the final step (elementwise primal average).
    pub u_bar: P0Function,
    pub trace: IterationTrace,
}

struct DualSetup {
    dofs: DofMap,
    rows: Vec<usize>,
    b: SparseOperator,
    mass: SparseOperator,
}

fn dual_setup(mesh: &Triangulation) -> DualSetup {
    let dofs = rt_dofmap(mesh);
    let all = DofMap::from_constraints(&vec![false; mesh.num_elements()]);
    let mut rows: Vec<usize> = (0..mesh.num_elements()).collect();
    if !mesh.has_dirichlet() {
        // constants are not seen by the divergence; pin the last element
        rows.pop();
    }
    let b = div_coupling(mesh).restrict(&all, &dofs).select_rows(&rows);
    let mass = rt_mass_exact(mesh).restrict(&dofs, &dofs);
    DualSetup {
        dofs,
        rows,
        b,
        mass,
    }
}

fn divergence_defect(mesh: &Triangulation, z: &RtFunction, f: &P0Function) -> f64 {
    let d = z.divergence(mesh);
    let r = P0Function::new(d.values.iter().zip(&f.values).map(|(a, b)| a + b).collect());
    r.l2_norm(mesh)
}

/// RT mass matrix used by the mixed Poisson solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtMass {
    /// `(z, y)` integrated exactly: the classical mixed method.
    Exact,
    /// `(Π z, Π y)`: barycenter evaluation, the modified mixed method.
    Barycentric,
}

#[derive(Clone, Debug)]
pub struct MixedSolution {
    pub z: RtFunction,
    /// Multiplier, the elementwise primal average.
    pub u_bar: P0Function,
    pub iterations: usize,
}

/// Mixed Poisson system `(z, y) + (ū, div y) = 0`, `(div z, v̄) = −(f_h, v̄)`.
/// Solved with the augmentation `Bᵀ diag(1/|T|) B`, which the barycentric
/// mass requires (it is singular).
pub fn mixed_poisson(
    mesh: &Triangulation,
    f: &P0Function,
    mass: RtMass,
    linear_tol: f64,
) -> Result<MixedSolution> {
    if f.values.len() != mesh.num_elements() {
        return Err(FemError::Parameter("data does not match the mesh".into()));
    }
    let s = dual_setup(mesh);
    let area: Vec<f64> = mesh.elements().iter().map(|e| e.area).collect();
    let bottom: Vec<f64> = s.rows.iter().map(|&t| -f.values[t] * area[t]).collect();
    let top = vec![0.0; s.dofs.num_free()];
    let m = match mass {
        RtMass::Exact => s.mass,
        RtMass::Barycentric => rt_mass_modified_weighted(mesh, &vec![1.0; mesh.num_elements()])
            .restrict(&s.dofs, &s.dofs),
    };
    let augmentation = Some(s.rows.iter().map(|&t| 1.0 / area[t]).collect());
    let opts = SaddleOptions {
        tol: linear_tol,
        augmentation,
        ..Default::default()
    };
    let sol = saddle_solve(&m, &s.b, &top, &bottom, &opts)?;
    let mut u_bar = vec![0.0; mesh.num_elements()];
    for (k, &t) in s.rows.iter().enumerate() {
        u_bar[t] = sol.multiplier[k];
    }
    Ok(MixedSolution {
        z: RtFunction::new(s.dofs.extend(&sol.primal)),
        u_bar: P0Function::new(u_bar),
        iterations: sol.iterations,
    })
}

/// Flux `z` with `−div z = f_h` from the classical mixed Poisson system; also
/// returns its multiplier.
pub fn feasible_flux(
    mesh: &Triangulation,
    f: &P0Function,
    linear_tol: f64,
) -> Result<(RtFunction, P0Function)> {
    let sol = mixed_poisson(mesh, f, RtMass::Exact, linear_tol)?;
    Ok((sol.z, sol.u_bar))
}

/// Semi-implicit dual iteration for maximizing `D_h`: each step solves
/// `(d_t z^k, y) + Σ_T |T| w_T z^k(x_T)·y(x_T) + (Dψ_h*(div z^k), div y) = 0` with
/// `w_T = ϕ*'(|z^{k−1}(x_T)|)/|z^{k−1}(x_T)|`. For a linear low-order term the
/// constraint `−div z^k = f_h` is imposed by a saddle-point solve whose
/// multiplier is the elementwise primal average.
pub fn dual_flow(
    mesh: &Triangulation,
    phi: &ConvexIntegrand,
    lo: &LowOrderTerm,
    z0: &RtFunction,
    cfg: &SolverConfig,
) -> Result<DualFlowResult> {
    cfg.validate()?;
    let phi_star = phi.conjugate();
    if !phi_star.is_algorithm_eligible() {
        return Err(FemError::Precondition(
            "conjugate radial ratio is not eligible for the dual iteration".into(),
        ));
    }
    if z0.fluxes.len() != mesh.num_sides() || lo.num_elements() != mesh.num_elements() {
        return Err(FemError::Parameter(
            "initial flux or data do not match the mesh".into(),
        ));
    }
    let s = dual_setup(mesh);
    let ne = mesh.num_elements();
    let area: Vec<f64> = mesh.elements().iter().map(|e| e.area).collect();
    let energy = |z: &RtFunction| -> f64 {
        let terms = dual_energy_terms(mesh, phi, lo, z, f64::INFINITY);
        terms.iter().map(|t| t.to_f64()).sum()
    };

    // the (div, div) augmentation does not change the constrained solution
    let aug: Vec<f64> = s.rows.iter().map(|&t| 1.0 / area[t]).collect();
    let mut z = s.dofs.restrict(&z0.fluxes);
    let mut full = RtFunction::new(s.dofs.extend(&z));
    let mut u_bar = P0Function::zeros(mesh);
    let mut trace = IterationTrace::start(energy(&full));
    let mut chol: Option<Cholesky> = None;

    let feas_tol = |f: &P0Function| 10.0 * cfg.linear_tol * (1.0 + f.l2_norm(mesh));
    if let LowOrderTerm::Linear { f } = lo {
        let defect = divergence_defect(mesh, &full, f);
        if defect > feas_tol(f) {
            return Err(FemError::Precondition(format!(
                "initial flux is infeasible: ‖div z0 + f_h‖ = {defect:.3e}"
            )));
        }
    }

    for _ in 0..cfg.max_iters {
        let w: Vec<f64> = full
            .project_p0(mesh)
            .values
            .iter()
            .map(|a| phi_star.radial_ratio(a.norm()))
            .collect();
        if let Some(t) = w.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(FemError::Parameter(format!(
                "dual weight on element {t} is not positive"
            )));
        }
        let lumped = rt_mass_modified_weighted(mesh, &w).restrict(&s.dofs, &s.dofs);
        let mut a = s.mass.scaled(1.0 / cfg.tau).add_scaled(&lumped, 1.0);
        let mz = s.mass.matvec(&z);
        let mut rhs: Vec<f64> = mz.iter().map(|v| v / cfg.tau).collect();
        let next = match lo {
            LowOrderTerm::Linear { f } => {
                let bottom: Vec<f64> = s.rows.iter().map(|&t| -f.values[t] * area[t]).collect();
                let opts = SaddleOptions {
                    tol: cfg.linear_tol,
                    augmentation: Some(aug.clone()),
                    ..Default::default()
                };
                let sol = saddle_solve(&a, &s.b, &rhs, &bottom, &opts)?;
                let mut ub = vec![0.0; ne];
                for (k, &t) in s.rows.iter().enumerate() {
                    ub[t] = sol.multiplier[k];
                }
                u_bar = P0Function::new(ub);
                sol.primal
            }
            LowOrderTerm::Quadratic { g, alpha } => {
                let b = div_coupling(mesh)
                    .restrict(&DofMap::from_constraints(&vec![false; ne]), &s.dofs);
                let wdiv: Vec<f64> = area.iter().map(|a| 1.0 / (alpha * a)).collect();
                a = a.add_scaled(&b.weighted_gram(&wdiv), 1.0);
                let bg = b.transpose_matvec(&g.values);
                rhs.iter_mut().zip(&bg).for_each(|(r, b)| *r -= b);
                match chol.as_mut() {
                    Some(c) => c.refactor(&a)?,
                    None => chol = Some(Cholesky::factor(&a)?),
                }
                let next = chol.as_ref().unwrap().solve(&rhs);
                let zf = RtFunction::new(s.dofs.extend(&next));
                let div = zf.divergence(mesh);
                u_bar = P0Function::new(
                    (0..ne)
                        .map(|t| div.values[t] / alpha + g.values[t])
                        .collect(),
                );
                next
            }
            LowOrderTerm::Obstacle { .. } => {
                return Err(FemError::Parameter(
                    "the dual flow needs a linear or quadratic low-order term".into(),
                ))
            }
        };
        let diff: Vec<f64> = next.iter().zip(&z).map(|(a, b)| a - b).collect();
        let step = s.mass.quadratic_form(&diff).max(0.0).sqrt() / cfg.tau;
        z = next;
        full = RtFunction::new(s.dofs.extend(&z));
        if let LowOrderTerm::Linear { f } = lo {
            let defect = divergence_defect(mesh, &full, f);
            if defect > feas_tol(f) {
                return Err(FemError::Solver {
                    iterations: trace.iterations + 1,
                    residual: defect,
                });
            }
        }
        trace.push(energy(&full), step);
        if step <= cfg.eps_stop {
            trace.converged = true;
            break;
        }
    }
    Ok(DualFlowResult {
        z: full,
        u_bar,
        trace,
    })
}
