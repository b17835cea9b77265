//! Global operators and load vectors.
//!
//! Operators are assembled over all global dofs; constrained dofs are
//! eliminated afterwards with [`SparseOperator::restrict`].

use crate::error::{FemError, Result};
use crate::mesh::{Point, Triangulation};
use crate::quadrature::TriangleRule;
use crate::spaces::{AffineSpace, P0Function};

pub use crate::linalg::SparseOperator;

/// Local RT basis on element `t`: `ψ_i(x) = β_i (p_i − x)` with `p_i` the
/// vertex opposite side `i`.
pub fn rt_local_basis(mesh: &Triangulation, t: usize) -> [(f64, Point); 3] {
    let el = &mesh.elements()[t];
    let v = mesh.vertices(t);
    let beta = |i: usize| -el.orientation[i] * mesh.sides()[el.sides[i]].length / (2.0 * el.area);
    [(beta(0), v[0]), (beta(1), v[1]), (beta(2), v[2])]
}

fn check_weights(w: &P0Function, mesh: &Triangulation) -> Result<()> {
    if w.values.len() != mesh.num_elements() {
        return Err(FemError::Parameter(
            "weight field has the wrong length".into(),
        ));
    }
    if let Some(t) = w.values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FemError::Parameter(format!(
            "weight on element {t} is not positive: {}",
            w.values[t]
        )));
    }
    Ok(())
}

/// `(w ∇u, ∇v)` on an elementwise-affine space; exact since the integrand is
/// elementwise constant.
pub fn affine_weighted_stiffness(
    space: &AffineSpace,
    weights: &P0Function,
) -> Result<SparseOperator> {
    let mesh = space.mesh();
    check_weights(weights, mesh)?;
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let d = space.local_dofs(k);
        let g = space.local_gradients(k);
        let c = weights.values[k] * el.area;
        for i in 0..3 {
            for j in 0..3 {
                t.push((d[i], d[j], c * g[i].dot(&g[j])));
            }
        }
    }
    let n = space.num_dofs();
    Ok(SparseOperator::from_triplets(n, n, &t, true))
}

/// L2 mass matrix of an elementwise-affine space (CR mass is diagonal).
pub fn affine_mass(space: &AffineSpace) -> SparseOperator {
    let mesh = space.mesh();
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let d = space.local_dofs(k);
        match space.kind() {
            crate::spaces::AffineKind::CrouzeixRaviart => {
                for &di in &d {
                    t.push((di, di, el.area / 3.0));
                }
            }
            crate::spaces::AffineKind::P1 => {
                for i in 0..3 {
                    for j in 0..3 {
                        let f = if i == j { 2.0 } else { 1.0 };
                        t.push((d[i], d[j], f * el.area / 12.0));
                    }
                }
            }
        }
    }
    let n = space.num_dofs();
    SparseOperator::from_triplets(n, n, &t, true)
}

/// `Σ_T |T| w_T u(x_T) v(x_T)`.
pub fn affine_barycenter_mass(space: &AffineSpace, weights: &[f64]) -> SparseOperator {
    let mesh = space.mesh();
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let d = space.local_dofs(k);
        let c = weights[k] * el.area / 9.0;
        for &di in &d {
            for &dj in &d {
                t.push((di, dj, c));
            }
        }
    }
    let n = space.num_dofs();
    SparseOperator::from_triplets(n, n, &t, true)
}

/// `(f_h, v)` for elementwise constant `f_h`; every local basis function has
/// integral `|T|/3`.
pub fn affine_load(space: &AffineSpace, f: &P0Function) -> Vec<f64> {
    let mesh = space.mesh();
    let mut b = vec![0.0; space.num_dofs()];
    for (k, el) in mesh.elements().iter().enumerate() {
        for &d in &space.local_dofs(k) {
            b[d] += f.values[k] * el.area / 3.0;
        }
    }
    b
}

/// `(w ∇_h u, ∇_h v)` over all CR dofs.
pub fn cr_weighted_stiffness(mesh: &Triangulation, weights: &P0Function) -> Result<SparseOperator> {
    affine_weighted_stiffness(&AffineSpace::crouzeix_raviart(mesh), weights)
}

/// `(f_h, v_h)` over all CR dofs.
pub fn cr_load(mesh: &Triangulation, f: &P0Function) -> Vec<f64> {
    affine_load(&AffineSpace::crouzeix_raviart(mesh), f)
}

/// Conforming P1 stiffness matrix over all vertices.
pub fn p1_stiffness(mesh: &Triangulation) -> SparseOperator {
    affine_weighted_stiffness(&AffineSpace::p1(mesh), &P0Function::constant(mesh, 1.0))
        .expect("unit weights are positive")
}

/// `Σ_T |T| w_T z(x_T)·y(x_T)` over all RT dofs.
pub fn rt_mass_modified_weighted(mesh: &Triangulation, weights: &[f64]) -> SparseOperator {
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let basis = rt_local_basis(mesh, k);
        let vals: Vec<Point> = basis
            .iter()
            .map(|(b, p)| (p - el.barycenter) * *b)
            .collect();
        let c = weights[k] * el.area;
        for i in 0..3 {
            for j in 0..3 {
                t.push((el.sides[i], el.sides[j], c * vals[i].dot(&vals[j])));
            }
        }
    }
    let n = mesh.num_sides();
    SparseOperator::from_triplets(n, n, &t, true)
}

/// Lumped RT mass `Σ_T |T| z(x_T)·y(x_T)`.
pub fn rt_mass_modified(mesh: &Triangulation) -> SparseOperator {
    rt_mass_modified_weighted(mesh, &vec![1.0; mesh.num_elements()])
}

/// Exact RT mass `∫ z·y` (edge-midpoint rule, exact for affine products).
pub fn rt_mass_exact(mesh: &Triangulation) -> SparseOperator {
    let rule = TriangleRule::edge_midpoint();
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let basis = rt_local_basis(mesh, k);
        let v = mesh.vertices(k);
        for i in 0..3 {
            for j in 0..3 {
                let (bi, pi) = basis[i];
                let (bj, pj) = basis[j];
                let m = rule.integrate(&v, el.area, |x| bi * bj * (pi - x).dot(&(pj - x)));
                t.push((el.sides[i], el.sides[j], m));
            }
        }
    }
    let n = mesh.num_sides();
    SparseOperator::from_triplets(n, n, &t, true)
}

/// `(div y, v̄)`: rows are elements, columns RT dofs, entries `±|S|`.
pub fn div_coupling(mesh: &Triangulation) -> SparseOperator {
    let mut t = Vec::with_capacity(3 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        for i in 0..3 {
            let s = el.sides[i];
            t.push((k, s, el.orientation[i] * mesh.sides()[s].length));
        }
    }
    SparseOperator::from_triplets(mesh.num_elements(), mesh.num_sides(), &t, false)
}

/// `G[v, y] = ∫ ∇_h φ_v · ψ_y`: rows CR dofs, columns RT dofs.
pub fn cr_rt_gradient_pairing(mesh: &Triangulation) -> SparseOperator {
    let space = AffineSpace::crouzeix_raviart(mesh);
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (k, el) in mesh.elements().iter().enumerate() {
        let g = space.local_gradients(k);
        let basis = rt_local_basis(mesh, k);
        for i in 0..3 {
            for j in 0..3 {
                // ∇φ is constant, so ∫ ψ = |T| ψ(x_T)
                let (b, p) = basis[j];
                t.push((
                    el.sides[i],
                    el.sides[j],
                    el.area * g[i].dot(&((p - el.barycenter) * b)),
                ));
            }
        }
    }
    SparseOperator::from_triplets(mesh.num_sides(), mesh.num_sides(), &t, false)
}
