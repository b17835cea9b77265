//! Convergence experiments on uniformly refined meshes of `(-1,1)^2`.

mod problems;
mod report;

use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use problems::*;
pub use report::{emit_report, ExperimentReport, LevelResult, CSV_HEADER};

use crate::assembly::{cr_load, cr_weighted_stiffness};
use crate::duality::{
    aposteriori_eta, aposteriori_eta_tilde, classical_multiplier_correction, dual_energy,
    primal_energy, reconstruct_flux, reconstruct_primal, DiscreteProblem,
};
use crate::error::{FemError, Result};
use crate::integrands::{p_laplace_f, ConvexIntegrand, LowOrderTerm};
use crate::linalg::Cholesky;
use crate::mesh::{nominal_h, unit_square_mesh, Point, Triangulation};
use crate::quadrature::{SideRule, TriangleRule};
use crate::solvers::{
    admm, dual_flow, feasible_flux, mixed_poisson, obstacle_active_set, primal_flow,
    IterationTrace, RtMass, SolverConfig,
};
use crate::spaces::{
    barycenter_values, cr_dofmap, cr_nodal_average, interpolate_cr_with, project_p0_with,
    write_p0_csv, AffineSpace, CrFunction, P0Function, RtFunction,
};

/// Regularization parameter per level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsPolicy {
    /// `ε = h_ℓ = 2^-ℓ`.
    MeshSize,
    Fixed(f64),
}

impl EpsPolicy {
    pub fn value(self, level: usize) -> f64 {
        match self {
            EpsPolicy::MeshSize => nominal_h(level),
            EpsPolicy::Fixed(v) => v,
        }
    }
}

impl FromStr for EpsPolicy {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "h" {
            return Ok(EpsPolicy::MeshSize);
        }
        parse_fixed(s).map(EpsPolicy::Fixed)
    }
}

/// Stopping tolerance of the iterative solvers per level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsStopPolicy {
    /// `h_ℓ / k`.
    MeshSizeOver(f64),
    Fixed(f64),
}

impl Default for EpsStopPolicy {
    fn default() -> Self {
        EpsStopPolicy::MeshSizeOver(20.0)
    }
}

impl EpsStopPolicy {
    pub fn value(self, level: usize) -> f64 {
        match self {
            EpsStopPolicy::MeshSizeOver(k) => nominal_h(level) / k,
            EpsStopPolicy::Fixed(v) => v,
        }
    }
}

impl FromStr for EpsStopPolicy {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = s.strip_prefix("h/") {
            return match k.parse::<f64>() {
                Ok(k) if k.is_finite() && k > 0.0 => Ok(EpsStopPolicy::MeshSizeOver(k)),
                _ => Err(FemError::Parameter(format!(
                    "invalid stopping policy '{s}'"
                ))),
            };
        }
        parse_fixed(s).map(EpsStopPolicy::Fixed)
    }
}

fn parse_fixed(s: &str) -> Result<f64> {
    match s.strip_prefix("fixed:").map(str::parse::<f64>) {
        Some(Ok(v)) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(FemError::Parameter(format!(
            "invalid policy '{s}', expected 'h', 'h/K' or 'fixed:V'"
        ))),
    }
}

/// Solver parameters shared by all experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub eps: EpsPolicy,
    pub eps_stop: EpsStopPolicy,
    /// Step size of the gradient flows and penalty of ADMM.
    pub tau: f64,
    pub max_iters: usize,
    pub linear_tol: f64,
    /// Directory for per-element field dumps.
    pub dump_fields: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eps: EpsPolicy::MeshSize,
            eps_stop: EpsStopPolicy::default(),
            tau: 1.0,
            max_iters: 20_000,
            linear_tol: 1e-10,
            dump_fields: None,
        }
    }
}

impl Settings {
    fn solver_config(&self, level: usize) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            eps_stop: self.eps_stop.value(level),
            max_iters: self.max_iters,
            linear_tol: self.linear_tol,
            ..Default::default()
        }
    }

    fn dump(
        &self,
        prefix: String,
        level: usize,
        mesh: &Triangulation,
        fields: &[(&str, &[f64])],
    ) -> Result<()> {
        let Some(dir) = &self.dump_fields else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|source| FemError::Io {
            path: dir.clone(),
            source,
        })?;
        for (name, values) in fields {
            write_p0_csv(
                &dir.join(format!("{prefix}_level{level}_{name}.csv")),
                mesh,
                values,
            )?;
        }
        Ok(())
    }

    fn dump_trace(&self, prefix: String, level: usize, trace: &IterationTrace) -> Result<()> {
        let Some(dir) = &self.dump_fields else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|source| FemError::Io {
            path: dir.clone(),
            source,
        })?;
        trace.write_csv(&dir.join(format!("{prefix}_level{level}_trace.csv")))
    }

    fn dir(&self) -> Option<&Path> {
        self.dump_fields.as_deref()
    }
}

pub fn check_levels(name: ProblemName, levels: &[usize]) -> Result<()> {
    let (lo, hi) = name.level_range();
    if levels.is_empty() {
        return Err(FemError::Parameter("no levels requested".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FemError::Parameter(
            "levels must be strictly increasing".into(),
        ));
    }
    if let Some(l) = levels.iter().find(|&&l| l < lo || l > hi) {
        return Err(FemError::Parameter(format!(
            "level {l} is outside {lo}..{hi} for {name}"
        )));
    }
    Ok(())
}

fn degree5_average<F: Fn(Point) -> f64>(mesh: &Triangulation, f: F) -> P0Function {
    project_p0_with(mesh, f, &TriangleRule::degree5())
}

/// `‖v_T − w_T‖_{L2}` for elementwise constants.
fn p0_distance(mesh: &Triangulation, v: &[f64], w: &[f64]) -> f64 {
    mesh.elements()
        .iter()
        .zip(v.iter().zip(w))
        .map(|(e, (a, b))| e.area * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn level_row(mesh: &Triangulation, level: usize, error: f64) -> LevelResult {
    LevelResult::new(level, mesh.num_nodes(), nominal_h(level), error)
}

fn record_trace(row: &mut LevelResult, trace: IterationTrace, tau: f64) {
    row.iterations = trace.iterations;
    row.converged = trace.converged;
    row.set("descent_defect", trace.descent_defect(tau));
    row.trace = Some(trace);
}

fn finite_gap(row: &mut LevelResult) {
    if let (Some(i), Some(d)) = (row.energy_primal, row.energy_dual) {
        row.gap = Some(i - d);
    }
}

/// Solves the CR Poisson problem `(∇_h u, ∇_h v) = (f_h, Π v)` directly.
pub fn solve_cr_poisson(mesh: &Triangulation, f: &P0Function) -> Result<CrFunction> {
    let dofs = cr_dofmap(mesh);
    let k = cr_weighted_stiffness(mesh, &P0Function::constant(mesh, 1.0))?.restrict(&dofs, &dofs);
    let b = dofs.restrict(&cr_load(mesh, f));
    Ok(CrFunction::new(
        dofs.extend(&Cholesky::factor(&k)?.solve(&b)),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoissonVariant {
    ClassicalMixed,
    ModifiedMixed,
    CrPrimal,
}

impl PoissonVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PoissonVariant::ClassicalMixed => "classical_mixed",
            PoissonVariant::ModifiedMixed => "modified_mixed",
            PoissonVariant::CrPrimal => "cr_primal",
        }
    }
}

impl FromStr for PoissonVariant {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        [
            PoissonVariant::ClassicalMixed,
            PoissonVariant::ModifiedMixed,
            PoissonVariant::CrPrimal,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| FemError::Parameter(format!("unknown Poisson variant '{s}'")))
    }
}

/// Poisson problem with `f_h` the exact elementwise average of `f`. The error
/// is `‖ū_h − u(x_T)‖`. Diagnostics: `flux_mismatch` and
/// `multiplier_mismatch` against the CR solution with flux reconstruction and
/// the matching multiplier formula, `eta`, `eta_tilde` and `conforming_error`
/// for the nodal average of the CR solution.
pub fn run_poisson(
    levels: &[usize],
    variant: PoissonVariant,
    settings: &Settings,
) -> Result<ExperimentReport> {
    check_levels(ProblemName::Poisson, levels)?;
    let mut report = ExperimentReport::new("poisson", variant.as_str());
    for &level in levels {
        let mesh = unit_square_mesh(level)?;
        let f = degree5_average(&mesh, poisson_rhs);
        let exact = barycenter_values(&mesh, poisson_exact);
        let u = solve_cr_poisson(&mesh, &f)?;
        let pb = DiscreteProblem::new(
            &mesh,
            ConvexIntegrand::p_power(2.0)?,
            LowOrderTerm::linear(f.clone()),
        )?;
        let rec = reconstruct_flux(&pb, &u, None, 1e-8)?;
        let (z, u_bar, iterations, reference) = match variant {
            PoissonVariant::ClassicalMixed => {
                let sol = mixed_poisson(&mesh, &f, RtMass::Exact, settings.linear_tol * 1e-2)?;
                let reference = classical_multiplier_correction(&mesh, &u, &f);
                (sol.z, sol.u_bar, sol.iterations, reference)
            }
            PoissonVariant::ModifiedMixed => {
                let sol =
                    mixed_poisson(&mesh, &f, RtMass::Barycentric, settings.linear_tol * 1e-2)?;
                (sol.z, sol.u_bar, sol.iterations, u.project_p0(&mesh))
            }
            PoissonVariant::CrPrimal => (
                rec.flux.clone(),
                u.project_p0(&mesh),
                0,
                u.project_p0(&mesh),
            ),
        };
        let mut row = level_row(
            &mesh,
            level,
            p0_distance(&mesh, &u_bar.values, &exact.values),
        );
        row.iterations = iterations;
        row.energy_primal = primal_energy(&pb, &u).finite();
        row.energy_dual = Some(dual_energy(&pb, &z)?);
        finite_gap(&mut row);
        row.set("flux_mismatch", max_abs_diff(&z.fluxes, &rec.flux.fluxes));
        row.set(
            "multiplier_mismatch",
            max_abs_diff(&u_bar.values, &reference.values),
        );
        row.set("normal_jump", rec.normal_jump);

        let u_c = cr_nodal_average(&mesh, &u);
        let est = aposteriori_eta(&pb, &u_c, &rec.flux)?;
        row.set("eta", est.eta);
        row.set("eta_tilde", aposteriori_eta_tilde(&mesh, &u_c, &u, &f));
        let rule = TriangleRule::degree5();
        let conforming: f64 = (0..mesh.num_elements())
            .map(|t| {
                let g = u_c.grad_on(&mesh, t);
                rule.integrate(&mesh.vertices(t), mesh.elements()[t].area, |x| {
                    (g - poisson_gradient(x)).norm_squared()
                })
            })
            .sum();
        row.set("conforming_error", conforming.sqrt());

        let prefix = format!("poisson_{}", variant.as_str());
        let err: Vec<f64> = u_bar
            .values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| a - b)
            .collect();
        settings.dump(
            prefix.clone(),
            level,
            &mesh,
            &[("u_bar", &u_bar.values), ("error", &err)],
        )?;
        if let Some(dir) = settings.dir() {
            est.write_csv(
                &dir.join(format!("{prefix}_level{level}_estimator.csv")),
                &mesh,
            )?;
        }
        report.push(row);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TvMethod {
    Cr,
    P1,
}

impl TvMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TvMethod::Cr => "cr",
            TvMethod::P1 => "p1",
        }
    }
}

impl FromStr for TvMethod {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cr" => Ok(TvMethod::Cr),
            "p1" => Ok(TvMethod::P1),
            _ => Err(FemError::Parameter(format!("unknown TV method '{s}'"))),
        }
    }
}

/// Regularized TV minimization `∫|∇u|_ε + α/2 ‖Πu − g̃_h‖²` with `g̃_h` the
/// barycenter values of the disc indicator, solved by the primal flow from
/// zero. The error column is the squared error `‖Πu_h − u(x_T)‖²`. For the
/// CR method the dual energy uses the reconstructed flux (left empty if the
/// reconstruction is rejected).
pub fn run_tv(
    levels: &[usize],
    alpha: f64,
    radius: f64,
    method: TvMethod,
    settings: &Settings,
) -> Result<ExperimentReport> {
    check_levels(ProblemName::Tv, levels)?;
    if !(alpha > 0.0 && radius > 0.0) {
        return Err(FemError::Parameter(
            "alpha and radius must be positive".into(),
        ));
    }
    let mut report = ExperimentReport::new("tv", method.as_str());
    for &level in levels {
        let mesh = unit_square_mesh(level)?;
        let eps = settings.eps.value(level);
        let cfg = settings.solver_config(level);
        let g = barycenter_values(&mesh, |x| disc_indicator(radius, x));
        let exact = barycenter_values(&mesh, |x| tv_exact(alpha, radius, x));
        let phi = ConvexIntegrand::regularized_modulus(eps)?;
        let lo = LowOrderTerm::quadratic(g.clone(), alpha)?;
        let space = match method {
            TvMethod::Cr => AffineSpace::crouzeix_raviart(&mesh),
            TvMethod::P1 => AffineSpace::p1(&mesh),
        };
        let run = primal_flow(&space, &phi, &lo, &vec![0.0; space.num_dofs()], &cfg)?;
        let pu = space.barycenter_values(&run.u);
        let err = p0_distance(&mesh, &pu, &exact.values);
        let mut row = level_row(&mesh, level, err * err);
        row.energy_primal = Some(run.trace.final_energy());
        if method == TvMethod::Cr {
            let pb = DiscreteProblem::new(&mesh, phi, lo)?;
            let u = CrFunction::new(run.u.clone());
            match reconstruct_flux(&pb, &u, None, 10.0 * cfg.eps_stop) {
                Ok(rec) => {
                    row.set("normal_jump", rec.normal_jump);
                    row.set("el_residual", rec.residual);
                    row.energy_dual = dual_energy(&pb, &rec.flux).ok();
                }
                Err(FemError::Reconstruction { residual, .. }) => row.set("el_residual", residual),
                Err(e) => return Err(e),
            }
            finite_gap(&mut row);
        }
        row.set(
            "plateau_max",
            pu.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let prefix = format!("tv_{}", method.as_str());
        settings.dump(
            prefix.clone(),
            level,
            &mesh,
            &[("u", &pu), ("g", &g.values)],
        )?;
        settings.dump_trace(prefix, level, &run.trace)?;
        record_trace(&mut row, run.trace, cfg.tau);
        report.push(row);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfLaplaceMethod {
    RtDual,
    P1Admm,
}

impl InfLaplaceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InfLaplaceMethod::RtDual => "rt_dual",
            InfLaplaceMethod::P1Admm => "p1_admm",
        }
    }
}

impl FromStr for InfLaplaceMethod {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rt_dual" => Ok(InfLaplaceMethod::RtDual),
            "p1_admm" => Ok(InfLaplaceMethod::P1Admm),
            _ => Err(FemError::Parameter(format!(
                "unknown infinity Laplace method '{s}'"
            ))),
        }
    }
}

/// Infinity Laplace problem with `f = 1`. `rt_dual` maximizes
/// `D_{ε,h}(z) = −Σ|T| |z(x_T)|_ε` under `−div z = f_h` by the dual flow and
/// reports `|D(z) − D_{ε,h}(z_h)|`; the CR reconstruction is evaluated as
/// the primal side. `p1_admm` minimizes `−∫u` over P1 functions with
/// `|∇u| ≤ 1` by ADMM and reports `|I(u) − I(u_h^c)|`, evaluating the linear
/// part of `I` only.
pub fn run_inf_laplace(
    levels: &[usize],
    method: InfLaplaceMethod,
    settings: &Settings,
) -> Result<ExperimentReport> {
    check_levels(ProblemName::InfLaplace, levels)?;
    let mut report = ExperimentReport::new("inf_laplace", method.as_str());
    for &level in levels {
        let mesh = unit_square_mesh(level)?;
        let cfg = settings.solver_config(level);
        let f = P0Function::constant(&mesh, 1.0);
        let prefix = format!("inf_laplace_{}", method.as_str());
        let row = match method {
            InfLaplaceMethod::RtDual => {
                let eps = settings.eps.value(level);
                let phi = ConvexIntegrand::regularized_modulus(eps)?.conjugate();
                let pb = DiscreteProblem::new(&mesh, phi, LowOrderTerm::linear(f.clone()))?
                    .with_feasibility_tol(1e-6);
                let (z0, _) = feasible_flux(&mesh, &f, cfg.linear_tol)?;
                let run = dual_flow(&mesh, &phi, &pb.low_order, &z0, &cfg)?;
                let d = dual_energy(&pb, &run.z)?;
                let mut row = level_row(&mesh, level, (INF_LAPLACE_ENERGY - d).abs());
                row.energy_dual = Some(d);
                let rec = reconstruct_primal(&pb, &run.z, &run.u_bar, f64::INFINITY)?;
                row.energy_primal = primal_energy(&pb, &rec.u).finite();
                finite_gap(&mut row);
                row.set("continuity_residual", rec.continuity_residual);
                let pu = rec.u.project_p0(&mesh);
                let u_max = (0..mesh.num_elements())
                    .flat_map(|t| rec.u.vertex_values(&mesh, t))
                    .fold(f64::NEG_INFINITY, f64::max);
                row.set("u_max", u_max);
                let znorm = run.z.project_p0(&mesh).norms();
                settings.dump(
                    prefix.clone(),
                    level,
                    &mesh,
                    &[
                        ("u_bar", &run.u_bar.values),
                        ("u_cr", &pu.values),
                        ("z_norm", &znorm.values),
                    ],
                )?;
                settings.dump_trace(prefix, level, &run.trace)?;
                record_trace(&mut row, run.trace, cfg.tau);
                row
            }
            InfLaplaceMethod::P1Admm => {
                let space = AffineSpace::p1(&mesh);
                let lo = LowOrderTerm::linear(f.clone());
                let run = admm(
                    &space,
                    &ConvexIntegrand::unit_ball_indicator(),
                    &lo,
                    &cfg,
                    settings.tau,
                )?;
                let pu = space.barycenter_values(&run.u);
                // ∫u = Σ|T| u(x_T) for elementwise affine u
                let energy: f64 = -mesh
                    .elements()
                    .iter()
                    .zip(&pu)
                    .map(|(e, v)| e.area * v)
                    .sum::<f64>();
                let mut row = level_row(&mesh, level, (INF_LAPLACE_ENERGY - energy).abs());
                row.energy_primal = Some(energy);
                let max_grad = space
                    .gradients(&run.u)
                    .iter()
                    .map(|g| g.norm())
                    .fold(0.0, f64::max);
                row.set("max_gradient", max_grad);
                row.set("q_max", run.q.iter().map(|q| q.norm()).fold(0.0, f64::max));
                settings.dump(prefix.clone(), level, &mesh, &[("u", &pu)])?;
                settings.dump_trace(prefix, level, &run.trace)?;
                row.iterations = run.trace.iterations;
                row.converged = run.trace.converged;
                row.trace = Some(run.trace);
                row
            }
        };
        report.push(row);
    }
    Ok(report)
}

/// Obstacle problem `½‖∇_h u‖² − (f_h, Πu)` with `Πu ≥ 0`. No exact solution
/// is available; the error column is `‖∇_h(u_ℓ − u_ref)‖` against the
/// solution one level above the finest requested one. Diagnostics:
/// `complementarity` `|(μ_h, Πu_h)|`, `max_mu`, `min_pi_u`, `normal_jump` of the
/// reconstructed flux, `active` element count.
pub fn run_obstacle<F: Fn(Point) -> f64>(
    levels: &[usize],
    f: F,
    settings: &Settings,
) -> Result<ExperimentReport> {
    check_levels(ProblemName::Obstacle, levels)?;
    let cfg = SolverConfig {
        linear_tol: settings.linear_tol,
        max_iters: settings.max_iters,
        ..Default::default()
    };
    let ref_level = levels[levels.len() - 1] + 1;
    let ref_mesh = unit_square_mesh(ref_level)?;
    let ref_f = degree5_average(&ref_mesh, &f);
    let reference = obstacle_active_set(&ref_mesh, &ref_f, &cfg)?;
    let ref_grad = reference.u.grad_h(&ref_mesh);

    let mut report = ExperimentReport::new("obstacle", "cr_active_set");
    for &level in levels {
        let mesh = unit_square_mesh(level)?;
        let fh = degree5_average(&mesh, &f);
        let run = obstacle_active_set(&mesh, &fh, &cfg)?;
        let grad = run.u.grad_h(&mesh);
        let shift = 2 * (ref_level - level);
        let err: f64 = ref_mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(t, e)| e.area * (grad.values[t >> shift] - ref_grad.values[t]).norm_squared())
            .sum();
        let mut row = level_row(&mesh, level, err.sqrt());
        let pb = DiscreteProblem::new(
            &mesh,
            ConvexIntegrand::p_power(2.0)?,
            LowOrderTerm::obstacle(fh.clone()),
        )?;
        row.energy_primal = primal_energy(&pb, &run.u).finite();
        let rec = reconstruct_flux(&pb, &run.u, Some(&run.mu), 1e-8)?;
        row.energy_dual = dual_energy(&pb, &rec.flux).ok();
        finite_gap(&mut row);
        let pu = run.u.project_p0(&mesh);
        row.set("complementarity", run.mu.pairing(&pu, &mesh).abs());
        row.set(
            "max_mu",
            run.mu
                .values
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        );
        row.set(
            "min_pi_u",
            pu.values.iter().copied().fold(f64::INFINITY, f64::min),
        );
        row.set("normal_jump", rec.normal_jump);
        row.set("active", run.active.iter().filter(|a| **a).count() as f64);
        settings.dump(
            "obstacle".into(),
            level,
            &mesh,
            &[("u", &pu.values), ("mu", &run.mu.values)],
        )?;
        row.iterations = run.trace.iterations;
        row.converged = run.trace.converged;
        row.trace = Some(run.trace);
        report.push(row);
    }
    Ok(report)
}

/// p-Laplace problem with exact solution `(1 − x²)(1 − y²)`. For `p ≤ 2` the
/// primal flow is run on the regularized p-power (plain for `p = 2`), for
/// `p > 2` the dual flow on the regularized conjugate exponent followed by
/// the CR reconstruction. The error is `‖F(∇_h I_cr u) − F(∇_h u_h)‖`.
pub fn run_p_laplace(levels: &[usize], p: f64, settings: &Settings) -> Result<ExperimentReport> {
    if !(p.is_finite() && p > 1.0) {
        return Err(FemError::Parameter(format!(
            "the p-Laplace exponent must exceed 1, got {p}"
        )));
    }
    check_levels(ProblemName::PLaplace, levels)?;
    let method = if p <= 2.0 {
        "cr_primal_flow"
    } else {
        "rt_dual_flow"
    };
    let mut report = ExperimentReport::new("p_laplace", method);
    for &level in levels {
        let mesh = unit_square_mesh(level)?;
        let cfg = settings.solver_config(level);
        let eps = settings.eps.value(level);
        let f = degree5_average(&mesh, |x| p_laplace_rhs(p, x));
        let interp = interpolate_cr_with(&mesh, poisson_exact, SideRule::Gauss3);
        let lo = LowOrderTerm::linear(f.clone());
        let (phi, u, trace, energy_dual) = if p <= 2.0 {
            let phi = if p == 2.0 {
                ConvexIntegrand::p_power(2.0)?
            } else {
                ConvexIntegrand::regularized_p_power(p, eps)?
            };
            let space = AffineSpace::crouzeix_raviart(&mesh);
            let run = primal_flow(&space, &phi, &lo, &vec![0.0; space.num_dofs()], &cfg)?;
            (phi, CrFunction::new(run.u), run.trace, None)
        } else {
            let q = p / (p - 1.0);
            let phi = ConvexIntegrand::regularized_p_power(q, eps)?.conjugate();
            let (z0, _) = feasible_flux(&mesh, &f, cfg.linear_tol)?;
            let run = dual_flow(&mesh, &phi, &lo, &z0, &cfg)?;
            let pb = DiscreteProblem::new(&mesh, phi, lo.clone())?.with_feasibility_tol(1e-6);
            let rec = reconstruct_primal(&pb, &run.z, &run.u_bar, f64::INFINITY)?;
            let d = dual_energy(&pb, &run.z).ok();
            (phi, rec.u, run.trace, d)
        };
        let err: f64 = (0..mesh.num_elements())
            .map(|t| {
                let a = p_laplace_f(p, interp.grad_on(&mesh, t));
                let b = p_laplace_f(p, u.grad_on(&mesh, t));
                mesh.elements()[t].area * (a - b).norm_squared()
            })
            .sum();
        let mut row = level_row(&mesh, level, err.sqrt());
        let pb = DiscreteProblem::new(&mesh, phi, lo)?.with_feasibility_tol(1e-6);
        row.energy_primal = primal_energy(&pb, &u).finite();
        row.energy_dual = energy_dual;
        if row.energy_dual.is_none() {
            match reconstruct_flux(&pb, &u, None, 10.0 * cfg.eps_stop) {
                Ok(rec) => {
                    row.set("normal_jump", rec.normal_jump);
                    row.set("el_residual", rec.residual);
                    row.energy_dual = dual_energy(&pb, &rec.flux).ok();
                }
                Err(FemError::Reconstruction { residual, .. }) => row.set("el_residual", residual),
                Err(e) => return Err(e),
            }
        }
        finite_gap(&mut row);
        let pu = u.project_p0(&mesh);
        settings.dump("p_laplace".into(), level, &mesh, &[("u", &pu.values)])?;
        settings.dump_trace("p_laplace".into(), level, &trace)?;
        record_trace(&mut row, trace, cfg.tau);
        report.push(row);
    }
    Ok(report)
}

/// Flux of the CR reconstruction for a given Poisson-type solution; exposed
/// for cross-checks.
pub fn poisson_reconstruction(
    mesh: &Triangulation,
    u: &CrFunction,
    f: &P0Function,
) -> Result<RtFunction> {
    let pb = DiscreteProblem::new(
        mesh,
        ConvexIntegrand::p_power(2.0)?,
        LowOrderTerm::linear(f.clone()),
    )?;
    Ok(reconstruct_flux(&pb, u, None, 1e-8)?.flux)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_parse() {
        assert_eq!("h".parse::<EpsPolicy>().unwrap(), EpsPolicy::MeshSize);
        assert_eq!(
            "fixed:0.5".parse::<EpsPolicy>().unwrap(),
            EpsPolicy::Fixed(0.5)
        );
        assert!("fixed:-1".parse::<EpsPolicy>().is_err());
        assert_eq!(
            "h/20".parse::<EpsStopPolicy>().unwrap(),
            EpsStopPolicy::MeshSizeOver(20.0)
        );
        assert_eq!(
            "fixed:1e-6".parse::<EpsStopPolicy>().unwrap(),
            EpsStopPolicy::Fixed(1e-6)
        );
        assert!((EpsStopPolicy::default().value(3) - 0.125 / 20.0).abs() < 1e-16);
    }

    #[test]
    fn level_checks() {
        assert!(check_levels(ProblemName::Poisson, &[2, 3]).is_ok());
        assert!(check_levels(ProblemName::Poisson, &[1]).is_err());
        assert!(check_levels(ProblemName::Poisson, &[3, 3]).is_err());
        assert!(check_levels(ProblemName::Poisson, &[]).is_err());
    }
}
