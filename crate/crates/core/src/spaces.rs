//! Crouzeix-Raviart, Raviart-Thomas, piecewise constant, P1 and P2 spaces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::mesh::{Point, Triangulation};
use crate::quadrature::{SideRule, TriangleRule};

/// Numbering of the unconstrained degrees of freedom.
#[derive(Clone, Debug)]
pub struct DofMap {
    to_free: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl DofMap {
    /// `constrained[i]` marks global dof `i` as fixed to zero.
    pub fn from_constraints(constrained: &[bool]) -> Self {
        let mut to_free = vec![None; constrained.len()];
        let mut free = Vec::new();
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                to_free[i] = Some(free.len());
                free.push(i);
            }
        }
        DofMap { to_free, free }
    }

    pub fn num_global(&self) -> usize {
        self.to_free.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        self.to_free[global]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn is_constrained(&self, global: usize) -> bool {
        self.to_free[global].is_none()
    }

    /// Global vector to free coefficients.
    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| global[g]).collect()
    }

    /// Free coefficients to a global vector, zero on constrained dofs.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.to_free.len()];
        for (i, &g) in self.free.iter().enumerate() {
            out[g] = free[i];
        }
        out
    }
}

/// CR dofs: sides, constrained on Dirichlet sides.
pub fn cr_dofmap(mesh: &Triangulation) -> DofMap {
    let c: Vec<bool> = (0..mesh.num_sides())
        .map(|s| mesh.is_dirichlet(s))
        .collect();
    DofMap::from_constraints(&c)
}

/// RT dofs: sides, constrained on Neumann sides.
pub fn rt_dofmap(mesh: &Triangulation) -> DofMap {
    let c: Vec<bool> = (0..mesh.num_sides()).map(|s| mesh.is_neumann(s)).collect();
    DofMap::from_constraints(&c)
}

/// P1 dofs: vertices, constrained on Dirichlet vertices.
pub fn p1_dofmap(mesh: &Triangulation) -> DofMap {
    DofMap::from_constraints(&mesh.dirichlet_nodes())
}

/// Piecewise constant scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct P0Function {
    pub values: Vec<f64>,
}

impl P0Function {
    pub fn new(values: Vec<f64>) -> Self {
        P0Function { values }
    }

    pub fn zeros(mesh: &Triangulation) -> Self {
        P0Function {
            values: vec![0.0; mesh.num_elements()],
        }
    }

    pub fn constant(mesh: &Triangulation, c: f64) -> Self {
        P0Function {
            values: vec![c; mesh.num_elements()],
        }
    }

    pub fn l2_norm(&self, mesh: &Triangulation) -> f64 {
        mesh.elements()
            .iter()
            .zip(&self.values)
            .map(|(e, v)| e.area * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `Σ_T |T| a_T b_T`.
    pub fn pairing(&self, other: &P0Function, mesh: &Triangulation) -> f64 {
        mesh.elements()
            .iter()
            .enumerate()
            .map(|(t, e)| e.area * self.values[t] * other.values[t])
            .sum()
    }
}

/// Piecewise constant vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct P0Field {
    pub values: Vec<Point>,
}

impl P0Field {
    pub fn l2_norm(&self, mesh: &Triangulation) -> f64 {
        mesh.elements()
            .iter()
            .zip(&self.values)
            .map(|(e, v)| e.area * v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn norms(&self) -> P0Function {
        P0Function {
            values: self.values.iter().map(|v| v.norm()).collect(),
        }
    }
}

/// Crouzeix-Raviart function: one value per side midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CrFunction {
    pub values: Vec<f64>,
}

impl CrFunction {
    pub fn new(values: Vec<f64>) -> Self {
        CrFunction { values }
    }

    pub fn zeros(mesh: &Triangulation) -> Self {
        CrFunction {
            values: vec![0.0; mesh.num_sides()],
        }
    }

    pub fn local(&self, mesh: &Triangulation, t: usize) -> [f64; 3] {
        let s = mesh.elements()[t].sides;
        [self.values[s[0]], self.values[s[1]], self.values[s[2]]]
    }

    /// Gradient on element `t`; the basis function of side `i` is `1 - 2λ_i`.
    pub fn grad_on(&self, mesh: &Triangulation, t: usize) -> Point {
        let el = &mesh.elements()[t];
        let u = self.local(mesh, t);
        (0..3).map(|i| el.grad_lambda[i] * (-2.0 * u[i])).sum()
    }

    pub fn grad_h(&self, mesh: &Triangulation) -> P0Field {
        P0Field {
            values: (0..mesh.num_elements())
                .map(|t| self.grad_on(mesh, t))
                .collect(),
        }
    }

    /// Evaluates the affine restriction to element `t` at `x`.
    pub fn eval(&self, mesh: &Triangulation, t: usize, x: Point) -> f64 {
        let el = &mesh.elements()[t];
        self.barycenter_value(mesh, t) + self.grad_on(mesh, t).dot(&(x - el.barycenter))
    }

    pub fn barycenter_value(&self, mesh: &Triangulation, t: usize) -> f64 {
        self.local(mesh, t).iter().sum::<f64>() / 3.0
    }

    /// Barycenter values, i.e. the elementwise L2 projection.
    pub fn project_p0(&self, mesh: &Triangulation) -> P0Function {
        P0Function {
            values: (0..mesh.num_elements())
                .map(|t| self.barycenter_value(mesh, t))
                .collect(),
        }
    }

    /// Values of the restriction to element `t` at its vertices.
    pub fn vertex_values(&self, mesh: &Triangulation, t: usize) -> [f64; 3] {
        let u = self.local(mesh, t);
        let total = u[0] + u[1] + u[2];
        [total - 2.0 * u[0], total - 2.0 * u[1], total - 2.0 * u[2]]
    }

    pub fn apply_dirichlet(&mut self, mesh: &Triangulation) {
        for s in 0..mesh.num_sides() {
            if mesh.is_dirichlet(s) {
                self.values[s] = 0.0;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lowest-order Raviart-Thomas field: one normal flux per side, w.r.t. `n_S`.
#[derive(Clone, Debug, PartialEq)]
pub struct RtFunction {
    pub fluxes: Vec<f64>,
}

impl RtFunction {
    pub fn new(fluxes: Vec<f64>) -> Self {
        RtFunction { fluxes }
    }

    pub fn zeros(mesh: &Triangulation) -> Self {
        RtFunction {
            fluxes: vec![0.0; mesh.num_sides()],
        }
    }

    /// Representation `a_T + b_T (x - x_T)` on element `t`.
    pub fn affine_on(&self, mesh: &Triangulation, t: usize) -> (Point, f64) {
        let el = &mesh.elements()[t];
        let v = mesh.vertices(t);
        let mut a = Point::zeros();
        let mut sum = 0.0;
        for i in 0..3 {
            let s = el.sides[i];
            let beta =
                -el.orientation[i] * self.fluxes[s] * mesh.sides()[s].length / (2.0 * el.area);
            a += (v[i] - el.barycenter) * beta;
            sum += beta;
        }
        (a, -sum)
    }

    /// Evaluates the field on element `t`; `x` must lie in the element.
    pub fn eval(&self, mesh: &Triangulation, t: usize, x: Point) -> Result<Point> {
        if t >= mesh.num_elements() || !mesh.contains(t, x, 1e-10) {
            return Err(FemError::Domain(format!(
                "point ({}, {}) is not in element {t}",
                x.x, x.y
            )));
        }
        Ok(self.eval_unchecked(mesh, t, x))
    }

    pub fn eval_unchecked(&self, mesh: &Triangulation, t: usize, x: Point) -> Point {
        let (a, b) = self.affine_on(mesh, t);
        a + (x - mesh.elements()[t].barycenter) * b
    }

    pub fn divergence_on(&self, mesh: &Triangulation, t: usize) -> f64 {
        let el = &mesh.elements()[t];
        (0..3)
            .map(|i| {
                let s = el.sides[i];
                el.orientation[i] * self.fluxes[s] * mesh.sides()[s].length
            })
            .sum::<f64>()
            / el.area
    }

    pub fn divergence(&self, mesh: &Triangulation) -> P0Function {
        P0Function {
            values: (0..mesh.num_elements())
                .map(|t| self.divergence_on(mesh, t))
                .collect(),
        }
    }

    /// Barycenter values `a_T`.
    pub fn project_p0(&self, mesh: &Triangulation) -> P0Field {
        P0Field {
            values: (0..mesh.num_elements())
                .map(|t| self.affine_on(mesh, t).0)
                .collect(),
        }
    }

    pub fn l2_norm(&self, mesh: &Triangulation) -> f64 {
        let rule = TriangleRule::edge_midpoint();
        (0..mesh.num_elements())
            .map(|t| {
                let e = &mesh.elements()[t];
                rule.integrate(&mesh.vertices(t), e.area, |x| {
                    self.eval_unchecked(mesh, t, x).norm_squared()
                })
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Conforming P1 function: one value per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct P1Function {
    pub values: Vec<f64>,
}

impl P1Function {
    pub fn new(values: Vec<f64>) -> Self {
        P1Function { values }
    }

    pub fn grad_on(&self, mesh: &Triangulation, t: usize) -> Point {
        let el = &mesh.elements()[t];
        (0..3)
            .map(|i| el.grad_lambda[i] * self.values[el.nodes[i]])
            .sum()
    }

    pub fn grad(&self, mesh: &Triangulation) -> P0Field {
        P0Field {
            values: (0..mesh.num_elements())
                .map(|t| self.grad_on(mesh, t))
                .collect(),
        }
    }

    pub fn eval(&self, mesh: &Triangulation, t: usize, x: Point) -> f64 {
        let el = &mesh.elements()[t];
        let mean = el.nodes.iter().map(|&n| self.values[n]).sum::<f64>() / 3.0;
        mean + self.grad_on(mesh, t).dot(&(x - el.barycenter))
    }

    pub fn project_p0(&self, mesh: &Triangulation) -> P0Function {
        P0Function {
            values: mesh
                .elements()
                .iter()
                .map(|e| e.nodes.iter().map(|&n| self.values[n]).sum::<f64>() / 3.0)
                .collect(),
        }
    }

    /// The same function seen as a CR function.
    pub fn to_cr(&self, mesh: &Triangulation) -> CrFunction {
        CrFunction {
            values: mesh
                .sides()
                .iter()
                .map(|s| 0.5 * (self.values[s.nodes[0]] + self.values[s.nodes[1]]))
                .collect(),
        }
    }
}

/// Conforming P2 function: values at vertices and at side midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct P2Function {
    pub vertex: Vec<f64>,
    pub side: Vec<f64>,
}

impl P2Function {
    fn local(&self, mesh: &Triangulation, t: usize) -> ([f64; 3], [f64; 3]) {
        let el = &mesh.elements()[t];
        (
            [
                self.vertex[el.nodes[0]],
                self.vertex[el.nodes[1]],
                self.vertex[el.nodes[2]],
            ],
            [
                self.side[el.sides[0]],
                self.side[el.sides[1]],
                self.side[el.sides[2]],
            ],
        )
    }

    fn lambda(mesh: &Triangulation, t: usize, x: Point) -> [f64; 3] {
        let el = &mesh.elements()[t];
        let d = x - el.barycenter;
        [
            1.0 / 3.0 + el.grad_lambda[0].dot(&d),
            1.0 / 3.0 + el.grad_lambda[1].dot(&d),
            1.0 / 3.0 + el.grad_lambda[2].dot(&d),
        ]
    }

    pub fn eval(&self, mesh: &Triangulation, t: usize, x: Point) -> f64 {
        let (v, s) = self.local(mesh, t);
        let l = Self::lambda(mesh, t, x);
        (0..3)
            .map(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                v[i] * l[i] * (2.0 * l[i] - 1.0) + s[i] * 4.0 * l[j] * l[k]
            })
            .sum()
    }

    pub fn grad(&self, mesh: &Triangulation, t: usize, x: Point) -> Point {
        let el = &mesh.elements()[t];
        let g = el.grad_lambda;
        let (v, s) = self.local(mesh, t);
        let l = Self::lambda(mesh, t, x);
        (0..3)
            .map(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                g[i] * (v[i] * (4.0 * l[i] - 1.0)) + (g[j] * l[k] + g[k] * l[j]) * (4.0 * s[i])
            })
            .sum()
    }

    /// `‖∇v‖_{L2}`; the squared gradient is quadratic, so the edge-midpoint rule is exact.
    pub fn grad_l2_norm(&self, mesh: &Triangulation) -> f64 {
        let rule = TriangleRule::edge_midpoint();
        (0..mesh.num_elements())
            .map(|t| {
                let e = &mesh.elements()[t];
                rule.integrate(&mesh.vertices(t), e.area, |x| {
                    self.grad(mesh, t, x).norm_squared()
                })
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Side averages of `v` (CR interpolant) with the given side rule; Dirichlet sides are zeroed.
pub fn interpolate_cr_with<F: Fn(Point) -> f64>(
    mesh: &Triangulation,
    v: F,
    rule: SideRule,
) -> CrFunction {
    let nodes = mesh.nodes();
    let mut u = CrFunction {
        values: mesh
            .sides()
            .iter()
            .map(|s| rule.mean(nodes[s.nodes[0]], nodes[s.nodes[1]], &v))
            .collect(),
    };
    u.apply_dirichlet(mesh);
    u
}

pub fn interpolate_cr<F: Fn(Point) -> f64>(mesh: &Triangulation, v: F) -> CrFunction {
    interpolate_cr_with(mesh, v, SideRule::Gauss2)
}

/// Side-average normal fluxes of `z` (RT interpolant); Neumann sides are zeroed.
pub fn interpolate_rt_with<F: Fn(Point) -> Point>(
    mesh: &Triangulation,
    z: F,
    rule: SideRule,
) -> RtFunction {
    let nodes = mesh.nodes();
    let fluxes = mesh
        .sides()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if mesh.is_neumann(i) {
                0.0
            } else {
                rule.mean(nodes[s.nodes[0]], nodes[s.nodes[1]], |x| {
                    z(x).dot(&s.normal)
                })
            }
        })
        .collect();
    RtFunction { fluxes }
}

pub fn interpolate_rt<F: Fn(Point) -> Point>(mesh: &Triangulation, z: F) -> RtFunction {
    interpolate_rt_with(mesh, z, SideRule::Gauss2)
}

/// Nodal P1 interpolant; Dirichlet vertices are zeroed.
pub fn interpolate_p1<F: Fn(Point) -> f64>(mesh: &Triangulation, v: F) -> P1Function {
    let dir = mesh.dirichlet_nodes();
    P1Function {
        values: mesh
            .nodes()
            .iter()
            .zip(&dir)
            .map(|(p, &d)| if d { 0.0 } else { v(*p) })
            .collect(),
    }
}

/// Elementwise means of `f` by the edge-midpoint rule (exact up to degree 2).
pub fn project_p0<F: Fn(Point) -> f64>(mesh: &Triangulation, f: F) -> P0Function {
    project_p0_with(mesh, f, &TriangleRule::edge_midpoint())
}

pub fn project_p0_with<F: Fn(Point) -> f64>(
    mesh: &Triangulation,
    f: F,
    rule: &TriangleRule,
) -> P0Function {
    P0Function {
        values: (0..mesh.num_elements())
            .map(|t| rule.integrate(&mesh.vertices(t), 1.0, &f))
            .collect(),
    }
}

/// Elementwise means of a vector field by the edge-midpoint rule.
pub fn project_p0_field<F: Fn(Point) -> Point>(mesh: &Triangulation, f: F) -> P0Field {
    let rule = TriangleRule::edge_midpoint();
    P0Field {
        values: (0..mesh.num_elements())
            .map(|t| {
                let v = mesh.vertices(t);
                Point::new(
                    rule.integrate(&v, 1.0, |x| f(x).x),
                    rule.integrate(&v, 1.0, |x| f(x).y),
                )
            })
            .collect(),
    }
}

/// Barycenter evaluation of `f`.
pub fn barycenter_values<F: Fn(Point) -> f64>(mesh: &Triangulation, f: F) -> P0Function {
    P0Function {
        values: mesh.elements().iter().map(|e| f(e.barycenter)).collect(),
    }
}

/// Averaging map from CR into conforming P2: side values are copied, vertex
/// values are arithmetic means of the adjacent elements' traces, Dirichlet
/// vertices are zeroed.
pub fn enrich_cr(mesh: &Triangulation, v: &CrFunction) -> P2Function {
    let mut vertex = vec![0.0; mesh.num_nodes()];
    let count = mesh.node_valence();
    for t in 0..mesh.num_elements() {
        let vals = v.vertex_values(mesh, t);
        for (i, &n) in mesh.elements()[t].nodes.iter().enumerate() {
            vertex[n] += vals[i];
        }
    }
    let dir = mesh.dirichlet_nodes();
    for n in 0..vertex.len() {
        vertex[n] = if dir[n] {
            0.0
        } else {
            vertex[n] / count[n] as f64
        };
    }
    P2Function {
        vertex,
        side: v.values.clone(),
    }
}

/// Conforming companion of a CR function: P1 function with the vertex values
/// of [`enrich_cr`].
pub fn cr_nodal_average(mesh: &Triangulation, v: &CrFunction) -> P1Function {
    P1Function::new(enrich_cr(mesh, v).vertex)
}

/// Which local dofs an elementwise-affine space uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffineKind {
    CrouzeixRaviart,
    P1,
}

/// Common view on CR and P1: three local dofs per element whose mean is the
/// barycenter value.
#[derive(Clone, Debug)]
pub struct AffineSpace<'m> {
    mesh: &'m Triangulation,
    kind: AffineKind,
    dofs: DofMap,
}

impl<'m> AffineSpace<'m> {
    pub fn new(mesh: &'m Triangulation, kind: AffineKind) -> Self {
        let dofs = match kind {
            AffineKind::CrouzeixRaviart => cr_dofmap(mesh),
            AffineKind::P1 => p1_dofmap(mesh),
        };
        AffineSpace { mesh, kind, dofs }
    }

    pub fn crouzeix_raviart(mesh: &'m Triangulation) -> Self {
        Self::new(mesh, AffineKind::CrouzeixRaviart)
    }

    pub fn p1(mesh: &'m Triangulation) -> Self {
        Self::new(mesh, AffineKind::P1)
    }

    pub fn mesh(&self) -> &'m Triangulation {
        self.mesh
    }

    pub fn kind(&self) -> AffineKind {
        self.kind
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.num_global()
    }

    pub fn local_dofs(&self, t: usize) -> [usize; 3] {
        let el = &self.mesh.elements()[t];
        match self.kind {
            AffineKind::CrouzeixRaviart => el.sides,
            AffineKind::P1 => el.nodes,
        }
    }

    /// Gradients of the three local basis functions.
    pub fn local_gradients(&self, t: usize) -> [Point; 3] {
        let g = self.mesh.elements()[t].grad_lambda;
        match self.kind {
            AffineKind::CrouzeixRaviart => [g[0] * -2.0, g[1] * -2.0, g[2] * -2.0],
            AffineKind::P1 => g,
        }
    }

    pub fn gradient(&self, t: usize, u: &[f64]) -> Point {
        let d = self.local_dofs(t);
        let g = self.local_gradients(t);
        g[0] * u[d[0]] + g[1] * u[d[1]] + g[2] * u[d[2]]
    }

    pub fn gradients(&self, u: &[f64]) -> Vec<Point> {
        (0..self.mesh.num_elements())
            .map(|t| self.gradient(t, u))
            .collect()
    }

    pub fn barycenter_value(&self, t: usize, u: &[f64]) -> f64 {
        let d = self.local_dofs(t);
        (u[d[0]] + u[d[1]] + u[d[2]]) / 3.0
    }

    pub fn barycenter_values(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|t| self.barycenter_value(t, u))
            .collect()
    }

    /// L2 norm of a coefficient vector (the restriction is affine, so the
    /// edge-midpoint rule is exact).
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.mesh.num_elements() {
            let el = &self.mesh.elements()[t];
            let d = self.local_dofs(t);
            let w = [u[d[0]], u[d[1]], u[d[2]]];
            let mids = match self.kind {
                // CR values are the midpoint values
                AffineKind::CrouzeixRaviart => w,
                AffineKind::P1 => [
                    0.5 * (w[1] + w[2]),
                    0.5 * (w[2] + w[0]),
                    0.5 * (w[0] + w[1]),
                ],
            };
            acc += el.area * mids.iter().map(|m| m * m).sum::<f64>() / 3.0;
        }
        acc.sqrt()
    }
}

/// Formats `x` with 16 significant digits.
pub(crate) fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.15e}")
    } else {
        format!("{x}")
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| FemError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV `dof_index,value`.
pub fn write_dofs_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("dof_index,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_sig(*v));
    }
    write_file(path, &out)
}

/// CSV `x_T,y_T,value`, one row per element.
pub fn write_p0_csv(path: &Path, mesh: &Triangulation, values: &[f64]) -> Result<()> {
    let mut out = String::from("x_T,y_T,value\n");
    for (e, v) in mesh.elements().iter().zip(values) {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_sig(e.barycenter.x),
            fmt_sig(e.barycenter.y),
            fmt_sig(*v)
        );
    }
    write_file(path, &out)
}
