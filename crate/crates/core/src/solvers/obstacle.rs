//! Primal-dual active set method for the CR obstacle problem.

use super::{saddle_solve, IterationTrace, SaddleOptions, SolverConfig};
use crate::assembly::{cr_load, cr_weighted_stiffness};
use crate::duality::affine_energy;
use crate::error::{FemError, Result};
use crate::integrands::{ConvexIntegrand, LowOrderTerm};
use crate::linalg::{Cholesky, SparseOperator};
use crate::mesh::Triangulation;
use crate::spaces::{cr_dofmap, AffineSpace, CrFunction, P0Function};

const AUGMENTATION: f64 = 1e4;

#[derive(Clone, Debug)]
pub struct ObstacleResult {
    pub u: CrFunction,
    /// Multiplier `μ_h ≤ 0`, supported on the active set.
    pub mu: P0Function,
    pub active: Vec<bool>,
    /// Energies per sweep; the step norm is the number of elements that
    /// changed status.
    pub trace: IterationTrace,
}

/// Minimizes `½‖∇_h u‖² − (f_h, Πu)` over CR functions with `Πu ≥ 0`
/// elementwise. The multiplier satisfies
/// `(μ_h, Πv) = (f_h, Πv) − (∇_h u, ∇_h v)` for all `v`.
pub fn obstacle_active_set(
    mesh: &Triangulation,
    f: &P0Function,
    cfg: &SolverConfig,
) -> Result<ObstacleResult> {
    cfg.validate()?;
    if !mesh.has_dirichlet() {
        return Err(FemError::Precondition(
            "the obstacle problem needs a nonempty Dirichlet boundary".into(),
        ));
    }
    let ne = mesh.num_elements();
    let dofs = cr_dofmap(mesh);
    let space = AffineSpace::crouzeix_raviart(mesh);
    let k = cr_weighted_stiffness(mesh, &P0Function::constant(mesh, 1.0))?.restrict(&dofs, &dofs);
    let b = dofs.restrict(&cr_load(mesh, f));
    let phi = ConvexIntegrand::p_power(2.0)?;
    let lo = LowOrderTerm::obstacle(f.clone());
    let area: Vec<f64> = mesh.elements().iter().map(|e| e.area).collect();

    // barycenter evaluation restricted to free dofs
    let bary_row = |t: usize| -> Vec<(usize, f64)> {
        mesh.elements()[t]
            .sides
            .iter()
            .filter_map(|&s| dofs.free_index(s).map(|i| (i, 1.0 / 3.0)))
            .collect()
    };
    let pi_u = |u: &CrFunction| u.project_p0(mesh).values;

    let unconstrained = Cholesky::factor(&k)?.solve(&b);
    let mut u = CrFunction::new(dofs.extend(&unconstrained));
    let mut mu = vec![0.0; ne];
    let mut active: Vec<bool> = pi_u(&u).iter().map(|v| *v < 0.0).collect();
    let mut trace = IterationTrace::start(
        affine_energy(&space, &phi, &LowOrderTerm::linear(f.clone()), &u.values).to_f64(),
    );

    for _ in 0..cfg.max_iters {
        let rows: Vec<usize> = (0..ne)
            .filter(|&t| active[t] && !bary_row(t).is_empty())
            .collect();
        let mut trip = Vec::with_capacity(3 * rows.len());
        for (r, &t) in rows.iter().enumerate() {
            trip.extend(bary_row(t).into_iter().map(|(i, v)| (r, i, v)));
        }
        let p = SparseOperator::from_triplets(rows.len(), dofs.num_free(), &trip, false);
        // γ PᵀP leaves the solution unchanged and clusters the Schur spectrum
        let opts = SaddleOptions {
            tol: cfg.linear_tol * 1e-2,
            max_iters: 5000,
            augmentation: Some(vec![AUGMENTATION; rows.len()]),
            // a fully active checkerboard-colourable region has one dependent row
            redundant_rows: true,
        };
        let sol = saddle_solve(&k, &p, &b, &vec![0.0; rows.len()], &opts)?;
        u = CrFunction::new(dofs.extend(&sol.primal));
        mu = vec![0.0; ne];
        for (r, &t) in rows.iter().enumerate() {
            mu[t] = sol.multiplier[r] / area[t];
        }
        let pu = pi_u(&u);
        let next: Vec<bool> = (0..ne).map(|t| mu[t] + pu[t] < 0.0).collect();
        let changed = next.iter().zip(&active).filter(|(a, b)| a != b).count();
        active = next;
        trace.push(
            affine_energy(&space, &phi, &lo, &u.values).to_f64(),
            changed as f64,
        );
        if changed == 0 {
            trace.converged = true;
            break;
        }
    }
    Ok(ObstacleResult {
        u,
        mu: P0Function::new(mu),
        active,
        trace,
    })
}
