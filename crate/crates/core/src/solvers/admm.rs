//! Alternating direction method of multipliers for `∫φ(∇u) + ∫ψ_h(Πu)`.

use super::{IterationTrace, SolverConfig};
use crate::assembly::{affine_barycenter_mass, affine_load, affine_weighted_stiffness};
use crate::error::{FemError, Result};
use crate::integrands::{ConvexIntegrand, LowOrderTerm};
use crate::linalg::Cholesky;
use crate::mesh::Point;
use crate::spaces::{AffineSpace, P0Function};

#[derive(Clone, Debug)]
pub struct AdmmResult {
    pub u: Vec<f64>,
    /// Splitting variable approximating `∇u`.
    pub q: Vec<Point>,
    /// Multiplier of the constraint `∇u = q`.
    pub lambda: Vec<Point>,
    pub trace: IterationTrace,
}

/// ADMM on the augmented Lagrangian
/// `∫φ(q) + ∫ψ_h(Πu) + (λ, ∇u − q) + τ/2 ‖∇u − q‖²` with elementwise L2
/// pairing. The u-step is a linear solve with a fixed matrix, the q-step the
/// proximal map of `φ`. Stops when both the primal residual `‖∇u − q‖` and
/// the dual residual `τ‖q^k − q^{k−1}‖` are at most `eps_stop`.
///
/// The trace records `∫φ(q) + ∫ψ_h(Πu)` and the primal residual.
pub fn admm(
    space: &AffineSpace,
    phi: &ConvexIntegrand,
    lo: &LowOrderTerm,
    cfg: &SolverConfig,
    tau_admm: f64,
) -> Result<AdmmResult> {
    cfg.validate()?;
    if !(tau_admm.is_finite() && tau_admm > 0.0) {
        return Err(FemError::Parameter(format!(
            "ADMM penalty must be positive, got {tau_admm}"
        )));
    }
    let mesh = space.mesh();
    let ne = mesh.num_elements();
    let dofs = space.dofs();
    let area: Vec<f64> = mesh.elements().iter().map(|e| e.area).collect();

    let mut a = affine_weighted_stiffness(space, &P0Function::constant(mesh, tau_admm))?
        .restrict(dofs, dofs);
    let load = match lo {
        LowOrderTerm::Linear { f } => affine_load(space, f),
        LowOrderTerm::Quadratic { g, alpha } => {
            a = a.add_scaled(
                &affine_barycenter_mass(space, &vec![*alpha; ne]).restrict(dofs, dofs),
                1.0,
            );
            affine_load(
                space,
                &P0Function::new(g.values.iter().map(|g| alpha * g).collect()),
            )
        }
        LowOrderTerm::Obstacle { .. } => {
            return Err(FemError::Parameter(
                "ADMM needs a linear or quadratic low-order term".into(),
            ))
        }
    };
    let chol = Cholesky::factor(&a)?;

    let energy = |u: &[f64], q: &[Point]| -> f64 {
        (0..ne)
            .map(|t| {
                let v = phi.phi(q[t]) + lo.value(t, space.barycenter_value(t, u));
                area[t] * v.to_f64()
            })
            .sum()
    };

    let mut u = vec![0.0; space.num_dofs()];
    let mut q = vec![Point::zeros(); ne];
    let mut lambda = vec![Point::zeros(); ne];
    let mut trace = IterationTrace::start(energy(&u, &q));
    for _ in 0..cfg.max_iters {
        // rhs = load + Gᵀ(τ q − λ), with Gᵀ(μ)_i = Σ_T |T| μ_T·∇φ_i
        let mut rhs = load.clone();
        for t in 0..ne {
            let m = (q[t] * tau_admm - lambda[t]) * area[t];
            let d = space.local_dofs(t);
            let g = space.local_gradients(t);
            for i in 0..3 {
                rhs[d[i]] += m.dot(&g[i]);
            }
        }
        u = dofs.extend(&chol.solve(&dofs.restrict(&rhs)));
        let mut primal = 0.0;
        let mut dual = 0.0;
        for t in 0..ne {
            let g = space.gradient(t, &u);
            let qn = phi.prox(g + lambda[t] / tau_admm, tau_admm);
            dual += area[t] * (qn - q[t]).norm_squared();
            q[t] = qn;
            let r = g - qn;
            primal += area[t] * r.norm_squared();
            lambda[t] += r * tau_admm;
        }
        let primal = primal.sqrt();
        let dual = tau_admm * dual.sqrt();
        trace.push(energy(&u, &q), primal);
        if primal <= cfg.eps_stop && dual <= cfg.eps_stop {
            trace.converged = true;
            break;
        }
    }
    Ok(AdmmResult {
        u,
        q,
        lambda,
        trace,
    })
}
