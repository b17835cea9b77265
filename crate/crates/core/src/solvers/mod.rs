//! Linear and nonlinear solution drivers.

mod admm;
mod flows;
mod linear;
mod obstacle;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::spaces::fmt_sig;

pub use admm::{admm, AdmmResult};
pub use flows::{
    dual_flow, feasible_flux, mixed_poisson, primal_flow, DualFlowResult, MixedSolution,
    PrimalFlowResult, RtMass,
};
pub use linear::{cg_solve, pcg, saddle_solve, CgSolution, SaddleOptions, SaddleSolution};
pub use obstacle::{obstacle_active_set, ObstacleResult};

/// Inner product used for the discrete time derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InnerProduct {
    #[default]
    L2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub eps_stop: f64,
    pub max_iters: usize,
    /// Relative residual for the linear solves.
    pub linear_tol: f64,
    pub inner_product: InnerProduct,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 1.0,
            eps_stop: 1e-6,
            max_iters: 10_000,
            linear_tol: 1e-10,
            inner_product: InnerProduct::L2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(FemError::Parameter(format!(
                "step size must be positive, got {}",
                self.tau
            )));
        }
        if !(self.eps_stop.is_finite() && self.eps_stop > 0.0) {
            return Err(FemError::Parameter(format!(
                "stopping tolerance must be positive, got {}",
                self.eps_stop
            )));
        }
        if self.max_iters == 0 {
            return Err(FemError::Parameter(
                "at least one iteration is required".into(),
            ));
        }
        if !(self.linear_tol.is_finite() && self.linear_tol > 0.0) {
            return Err(FemError::Parameter(format!(
                "linear tolerance must be positive, got {}",
                self.linear_tol
            )));
        }
        Ok(())
    }
}

/// History of an iterative run. `energies[0]` is the energy of the initial
/// iterate and `energies[k]`, `step_norms[k - 1]` belong to step `k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub energies: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IterationTrace {
    fn start(energy: f64) -> Self {
        IterationTrace {
            energies: vec![energy],
            ..Default::default()
        }
    }

    fn push(&mut self, energy: f64, step: f64) {
        self.energies.push(energy);
        self.step_norms.push(step);
        self.iterations += 1;
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&f64::NAN)
    }

    /// `max_ℓ [E(ℓ) + τ Σ_{k≤ℓ} ‖d_t u^k‖² − E(0)] / (1 + |E(0)|)`; the
    /// discrete energy law requires this to be at most zero.
    pub fn descent_defect(&self, tau: f64) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        let mut dissipated = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for (k, step) in self.step_norms.iter().enumerate() {
            dissipated += tau * step * step;
            worst = worst.max(self.energies[k + 1] + dissipated - e0);
        }
        worst / (1.0 + e0.abs())
    }

    /// `E(ℓ) + τ Σ ‖d_t u^k‖² ≤ E(0) + 1e-9 (1 + |E(0)|)` for every `ℓ`.
    pub fn satisfies_descent_bound(&self, tau: f64) -> bool {
        self.step_norms.is_empty() || self.descent_defect(tau) <= 1e-9
    }

    /// CSV `k,energy,step_norm`; the initial row has an empty step norm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,energy,step_norm\n");
        for (k, e) in self.energies.iter().enumerate() {
            let step = if k == 0 {
                String::new()
            } else {
                fmt_sig(self.step_norms[k - 1])
            };
            let _ = writeln!(out, "{k},{},{step}", fmt_sig(*e));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| FemError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            tau: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            eps_stop: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn descent_bound_from_trace() {
        let mut t = IterationTrace::start(1.0);
        t.push(0.5, 0.5);
        t.push(0.4, 0.1);
        assert!(t.satisfies_descent_bound(1.0));
        assert!(t.descent_defect(1.0) < 0.0);
        let mut bad = IterationTrace::start(1.0);
        bad.push(0.9, 1.0);
        assert!(!bad.satisfies_descent_bound(1.0));
        let csv = t.to_csv();
        assert!(csv.starts_with("k,energy,step_norm\n0,1.000000000000000e0,\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
