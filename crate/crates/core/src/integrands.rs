//! Convex integrands with conjugates, derivatives and radial profiles, and
//! the low-order terms of the discrete functionals.

use std::ops::{Add, Neg};

use crate::error::{FemError, Result};
use crate::mesh::Point;
use crate::spaces::P0Function;

/// Slack allowed when testing membership of the closed unit ball.
pub const BALL_TOL: f64 = 1e-10;

/// Value in `[-inf, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Lossy conversion using IEEE infinities, for printing.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// Multiplication by a nonnegative finite factor; `0 * inf = 0`.
    pub fn scale(self, c: f64) -> ExtReal {
        debug_assert!(c >= 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(c * v),
            _ if c == 0.0 => ExtReal::Finite(0.0),
            other => other,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::Finite(v)
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => panic!("+inf + -inf is undefined"),
            (PosInf, _) | (_, PosInf) => PosInf,
            _ => NegInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

impl std::iter::Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> Self {
        iter.fold(ExtReal::Finite(0.0), |a, b| a + b)
    }
}

/// Isotropic profiles `φ(s) = ϕ(|s|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `r^p / p`.
    PPower { p: f64 },
    /// `((r² + ε²)^{p/2} − ε^p) / p`.
    RegularizedPPower { p: f64, eps: f64 },
    /// `(r² + ε²)^{1/2}`.
    RegularizedModulus { eps: f64 },
    /// `r²/(2ε)` for `r ≤ ε`, `r − ε/2` beyond.
    TruncatedModulus { eps: f64 },
    /// `r`.
    Modulus,
    /// Indicator of `r ≤ 1`.
    UnitBall,
}

impl Profile {
    fn value(self, r: f64) -> ExtReal {
        use Profile::*;
        ExtReal::Finite(match self {
            PPower { p } => r.powf(p) / p,
            RegularizedPPower { p, eps } => ((r * r + eps * eps).powf(p / 2.0) - eps.powf(p)) / p,
            RegularizedModulus { eps } => r.hypot(eps),
            TruncatedModulus { eps } => {
                if r <= eps {
                    r * r / (2.0 * eps)
                } else {
                    r - eps / 2.0
                }
            }
            Modulus => r,
            UnitBall => {
                return if r <= 1.0 + BALL_TOL {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                };
            }
        })
    }

    /// `ϕ'(r)`, a single-valued selection where ϕ is not differentiable;
    /// `None` outside the domain.
    fn derivative(self, r: f64) -> Option<f64> {
        use Profile::*;
        Some(match self {
            PPower { p } => r.powf(p - 1.0),
            RegularizedPPower { p, eps } => r * (r * r + eps * eps).powf(p / 2.0 - 1.0),
            RegularizedModulus { eps } => r / r.hypot(eps),
            TruncatedModulus { eps } => {
                if r <= eps {
                    r / eps
                } else {
                    1.0
                }
            }
            Modulus => {
                if r > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnitBall => {
                if r <= 1.0 + BALL_TOL {
                    0.0
                } else {
                    return None;
                }
            }
        })
    }

    fn second_derivative(self, r: f64) -> f64 {
        use Profile::*;
        match self {
            PPower { p } => (p - 1.0) * r.powf(p - 2.0),
            RegularizedPPower { p, eps } => {
                let q = r * r + eps * eps;
                q.powf(p / 2.0 - 2.0) * ((p - 1.0) * r * r + eps * eps)
            }
            RegularizedModulus { eps } => eps * eps / (r * r + eps * eps).powf(1.5),
            TruncatedModulus { eps } => {
                if r <= eps {
                    1.0 / eps
                } else {
                    0.0
                }
            }
            Modulus | UnitBall => 0.0,
        }
    }

    /// `ϕ'(r)/r`, extended continuously to `r = 0` where possible.
    fn ratio(self, r: f64) -> f64 {
        use Profile::*;
        match self {
            PPower { p } => r.powf(p - 2.0),
            RegularizedPPower { p, eps } => (r * r + eps * eps).powf(p / 2.0 - 1.0),
            RegularizedModulus { eps } => 1.0 / r.hypot(eps),
            TruncatedModulus { eps } => 1.0 / r.max(eps),
            Modulus => 1.0 / r,
            UnitBall => 0.0,
        }
    }

    /// Radial conjugate `ϕ*(ρ) = sup_r ρ r − ϕ(r)`.
    fn conj_value(self, rho: f64) -> ExtReal {
        use Profile::*;
        match self {
            PPower { p } => {
                let q = p / (p - 1.0);
                ExtReal::Finite(rho.powf(q) / q)
            }
            RegularizedPPower { p, eps } => {
                let r = invert_regularized_p(p, eps, rho);
                self.value(r)
                    .finite()
                    .map_or(ExtReal::PosInf, |v| ExtReal::Finite(rho * r - v))
            }
            RegularizedModulus { eps } => {
                if rho <= 1.0 + BALL_TOL {
                    ExtReal::Finite(-eps * (1.0 - rho.min(1.0) * rho.min(1.0)).sqrt())
                } else {
                    ExtReal::PosInf
                }
            }
            TruncatedModulus { eps } => {
                if rho <= 1.0 + BALL_TOL {
                    ExtReal::Finite(eps * rho * rho / 2.0)
                } else {
                    ExtReal::PosInf
                }
            }
            Modulus => {
                if rho <= 1.0 + BALL_TOL {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            UnitBall => ExtReal::Finite(rho),
        }
    }

    fn conj_derivative(self, rho: f64) -> Option<f64> {
        use Profile::*;
        match self {
            PPower { p } => Some(rho.powf(1.0 / (p - 1.0))),
            RegularizedPPower { p, eps } => Some(invert_regularized_p(p, eps, rho)),
            RegularizedModulus { eps } => {
                if rho < 1.0 {
                    Some(eps * rho / (1.0 - rho * rho).sqrt())
                } else {
                    None
                }
            }
            TruncatedModulus { eps } => (rho <= 1.0 + BALL_TOL).then_some(eps * rho.min(1.0)),
            Modulus => (rho <= 1.0 + BALL_TOL).then_some(0.0),
            UnitBall => Some(if rho > 0.0 { 1.0 } else { 0.0 }),
        }
    }

    /// Radial proximal step: minimizer over `ρ ∈ [0, r0]` of `ϕ(ρ) + τ/2 (ρ − r0)²`.
    fn prox_radius(self, r0: f64, tau: f64) -> f64 {
        use Profile::*;
        match self {
            UnitBall => r0.min(1.0),
            Modulus => (r0 - 1.0 / tau).max(0.0),
            TruncatedModulus { eps } => {
                let inner = r0 / (1.0 + 1.0 / (tau * eps));
                if inner <= eps {
                    inner
                } else {
                    r0 - 1.0 / tau
                }
            }
            _ => {
                let h = |rho: f64| self.derivative(rho).unwrap_or(f64::INFINITY) + tau * (rho - r0);
                let dh = |rho: f64| self.second_derivative(rho) + tau;
                safeguarded_newton(h, dh, 0.0, r0)
            }
        }
    }
}

/// Root of the increasing function `h` on `[lo, hi]` with `h(lo) ≤ 0 ≤ h(hi)`.
fn safeguarded_newton<H: Fn(f64) -> f64, D: Fn(f64) -> f64>(
    h: H,
    dh: D,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    if h(lo) >= 0.0 {
        return lo;
    }
    if h(hi) <= 0.0 {
        return hi;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = h(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dh(x);
        let newton = x - v / d;
        if d.is_finite() && d > 0.0 && (newton - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            return newton.clamp(lo, hi);
        }
        x = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Solves `r (r² + ε²)^{p/2−1} = ρ` for `r ≥ 0`.
fn invert_regularized_p(p: f64, eps: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let prof = Profile::RegularizedPPower { p, eps };
    let h = |r: f64| prof.derivative(r).unwrap_or(f64::INFINITY) - rho;
    let mut hi = rho.max(eps).max(1.0);
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    safeguarded_newton(h, |r| prof.second_derivative(r), 0.0, hi)
}

/// Isotropic convex integrand `φ` (or its conjugate) with the operations
/// the discrete functionals and solvers need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexIntegrand {
    profile: Profile,
    conjugated: bool,
}

impl ConvexIntegrand {
    fn from_profile(profile: Profile) -> Self {
        ConvexIntegrand {
            profile,
            conjugated: false,
        }
    }

    /// `|s|^p / p`, `p > 1`.
    pub fn p_power(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self::from_profile(Profile::PPower { p }))
    }

    /// `((|s|² + ε²)^{p/2} − ε^p)/p`, the p-power with a smoothed origin.
    pub fn regularized_p_power(p: f64, eps: f64) -> Result<Self> {
        check_p(p)?;
        check_eps(eps)?;
        Ok(Self::from_profile(Profile::RegularizedPPower { p, eps }))
    }

    /// `|s|_ε = (|s|² + ε²)^{1/2}`.
    pub fn regularized_modulus(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self::from_profile(Profile::RegularizedModulus { eps }))
    }

    /// Huber-type modulus: quadratic on `|s| ≤ ε`, `|s| − ε/2` beyond.
    pub fn truncated_modulus(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self::from_profile(Profile::TruncatedModulus { eps }))
    }

    /// `|s|`.
    pub fn modulus() -> Self {
        Self::from_profile(Profile::Modulus)
    }

    /// Indicator of the closed unit ball.
    pub fn unit_ball_indicator() -> Self {
        Self::from_profile(Profile::UnitBall)
    }

    /// The convex conjugate as an integrand in its own right.
    pub fn conjugate(self) -> Self {
        ConvexIntegrand {
            profile: self.profile,
            conjugated: !self.conjugated,
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn is_conjugated(&self) -> bool {
        self.conjugated
    }

    /// Radius of the closed ball outside which `φ` is `+∞`, if any.
    pub fn domain_radius(&self) -> Option<f64> {
        let (base_ball, conj_ball) = match self.profile {
            Profile::UnitBall => (true, false),
            Profile::RegularizedModulus { .. }
            | Profile::TruncatedModulus { .. }
            | Profile::Modulus => (false, true),
            _ => (false, false),
        };
        let ball = if self.conjugated {
            conj_ball
        } else {
            base_ball
        };
        ball.then_some(1.0)
    }

    /// Radial profile `ϕ(r)`.
    pub fn profile_value(&self, r: f64) -> ExtReal {
        if self.conjugated {
            self.profile.conj_value(r)
        } else {
            self.profile.value(r)
        }
    }

    /// `ϕ'(r)`.
    pub fn profile_derivative(&self, r: f64) -> Option<f64> {
        if self.conjugated {
            self.profile.conj_derivative(r)
        } else {
            self.profile.derivative(r)
        }
    }

    pub fn phi(&self, s: Point) -> ExtReal {
        self.profile_value(s.norm())
    }

    pub fn phi_star(&self, t: Point) -> ExtReal {
        self.conjugate().phi(t)
    }

    /// `Dφ(s)`; `None` where `s` lies outside the domain or the derivative
    /// is not single-valued there.
    pub fn d_phi(&self, s: Point) -> Option<Point> {
        let r = s.norm();
        let d = self.profile_derivative(r)?;
        Some(if r > 0.0 { s * (d / r) } else { Point::zeros() })
    }

    pub fn d_phi_star(&self, t: Point) -> Option<Point> {
        self.conjugate().d_phi(t)
    }

    /// `ϕ'(r)/r`, the weight of the semi-implicit iterations.
    pub fn radial_ratio(&self, r: f64) -> f64 {
        if !self.conjugated {
            return self.profile.ratio(r);
        }
        match self.profile_derivative(r) {
            Some(d) if r > 0.0 => d / r,
            Some(_) => self.conj_ratio_at_zero(),
            None => f64::INFINITY,
        }
    }

    fn conj_ratio_at_zero(&self) -> f64 {
        match self.profile {
            Profile::PPower { p: 2.0 } => 1.0,
            Profile::PPower { p } if p > 2.0 => f64::INFINITY,
            Profile::PPower { .. } => 0.0,
            Profile::RegularizedPPower { p, eps } => eps.powf(2.0 - p),
            Profile::RegularizedModulus { eps } | Profile::TruncatedModulus { eps } => eps,
            Profile::Modulus => 0.0,
            Profile::UnitBall => f64::INFINITY,
        }
    }

    /// True if `ϕ'(r)/r` is positive, finite, continuous and non-increasing on
    /// `[0, ∞)`, as required by the semi-implicit primal iteration.
    pub fn is_algorithm_eligible(&self) -> bool {
        if self.conjugated {
            return match self.profile {
                // conjugate of a p-power is a q-power with q = p/(p-1) <= 2 iff p >= 2
                Profile::PPower { p } => p == 2.0,
                Profile::UnitBall => false,
                Profile::RegularizedPPower { p, .. } => p == 2.0,
                _ => false,
            };
        }
        match self.profile {
            Profile::PPower { p } => p == 2.0,
            Profile::RegularizedPPower { p, .. } => p <= 2.0,
            Profile::RegularizedModulus { .. } | Profile::TruncatedModulus { .. } => true,
            Profile::Modulus | Profile::UnitBall => false,
        }
    }

    /// `argmin_q φ(q) + τ/2 |q − x|²`.
    pub fn prox(&self, x: Point, tau: f64) -> Point {
        if self.conjugated {
            // Moreau decomposition
            let base = ConvexIntegrand::from_profile(self.profile);
            return x - base.prox(x * tau, 1.0 / tau) / tau;
        }
        let r0 = x.norm();
        if r0 == 0.0 {
            return x;
        }
        x * (self.profile.prox_radius(r0, tau) / r0)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(FemError::Parameter(format!(
            "exponent p must exceed 1, got {p}"
        )))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(FemError::Parameter(format!(
            "regularization must be positive, got {eps}"
        )))
    }
}

/// `φ(s) + φ*(t) − s·t`.
pub fn fenchel_gap(ci: &ConvexIntegrand, s: Point, t: Point) -> ExtReal {
    ci.phi(s) + ci.phi_star(t) + (-s.dot(&t))
}

/// Left side minus right side of
/// `ϕ'(|a|)/|a| b·(b−a) ≥ ϕ(|b|) − ϕ(|a|) + ½ ϕ'(|a|)/|a| |b−a|²`.
pub fn monotonicity_defect(ci: &ConvexIntegrand, a: Point, b: Point) -> f64 {
    let w = ci.radial_ratio(a.norm());
    let lhs = w * b.dot(&(b - a));
    let rhs = ci.profile_value(b.norm()).to_f64() - ci.profile_value(a.norm()).to_f64()
        + 0.5 * w * (b - a).norm_squared();
    lhs - rhs
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PLaplaceQuantities {
    /// `|F(a) − F(b)|²` with `F(a) = |a|^{p/2−1} a`.
    pub f_diff_sq: f64,
    /// `(S(a) − S(b))·(a − b)` with `S(a) = |a|^{p−2} a`.
    pub s_pairing: f64,
}

pub fn p_laplace_f(p: f64, a: Point) -> Point {
    let r = a.norm();
    if r == 0.0 {
        a
    } else {
        a * r.powf(p / 2.0 - 1.0)
    }
}

pub fn p_laplace_s(p: f64, a: Point) -> Point {
    let r = a.norm();
    if r == 0.0 {
        a
    } else {
        a * r.powf(p - 2.0)
    }
}

pub fn p_laplace_quantities(p: f64, a: Point, b: Point) -> Result<PLaplaceQuantities> {
    check_p(p)?;
    Ok(PLaplaceQuantities {
        f_diff_sq: (p_laplace_f(p, a) - p_laplace_f(p, b)).norm_squared(),
        s_pairing: (p_laplace_s(p, a) - p_laplace_s(p, b))
            .dot(&(a - b))
            .max(0.0),
    })
}

/// Elementwise low-order term `ψ_h(x_T, s)`.
#[derive(Clone, Debug, PartialEq)]
pub enum LowOrderTerm {
    /// `−f_h s`.
    Linear { f: P0Function },
    /// `α/2 (s − g_h)²`.
    Quadratic { g: P0Function, alpha: f64 },
    /// `−f_h s + I_{[0,∞)}(s)`.
    Obstacle { f: P0Function },
}

impl LowOrderTerm {
    pub fn linear(f: P0Function) -> Self {
        LowOrderTerm::Linear { f }
    }

    pub fn quadratic(g: P0Function, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(FemError::Parameter(format!(
                "fidelity weight must be positive, got {alpha}"
            )));
        }
        Ok(LowOrderTerm::Quadratic { g, alpha })
    }

    pub fn obstacle(f: P0Function) -> Self {
        LowOrderTerm::Obstacle { f }
    }

    pub fn num_elements(&self) -> usize {
        match self {
            LowOrderTerm::Linear { f } | LowOrderTerm::Obstacle { f } => f.values.len(),
            LowOrderTerm::Quadratic { g, .. } => g.values.len(),
        }
    }

    pub fn value(&self, t: usize, s: f64) -> ExtReal {
        match self {
            LowOrderTerm::Linear { f } => ExtReal::Finite(-f.values[t] * s),
            LowOrderTerm::Quadratic { g, alpha } => {
                ExtReal::Finite(0.5 * alpha * (s - g.values[t]).powi(2))
            }
            LowOrderTerm::Obstacle { f } => {
                if s >= -BALL_TOL {
                    ExtReal::Finite(-f.values[t] * s)
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }

    /// `Dψ_h(x_T, s)`; for the obstacle term the derivative of the linear part.
    pub fn derivative(&self, t: usize, s: f64) -> f64 {
        match self {
            LowOrderTerm::Linear { f } | LowOrderTerm::Obstacle { f } => -f.values[t],
            LowOrderTerm::Quadratic { g, alpha } => alpha * (s - g.values[t]),
        }
    }

    /// `ψ_h*(x_T, r)`; equality constraints are tested with relative slack `tol`.
    pub fn conjugate(&self, t: usize, r: f64, tol: f64) -> ExtReal {
        match self {
            LowOrderTerm::Linear { f } => {
                let f = f.values[t];
                if (r + f).abs() <= tol * (1.0 + f.abs()) {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            LowOrderTerm::Quadratic { g, alpha } => {
                ExtReal::Finite(r * r / (2.0 * alpha) + g.values[t] * r)
            }
            LowOrderTerm::Obstacle { f } => {
                let f = f.values[t];
                if r + f <= tol * (1.0 + f.abs()) {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn ext_real_arithmetic() {
        assert_eq!(ExtReal::Finite(1.0) + ExtReal::PosInf, ExtReal::PosInf);
        assert_eq!(-ExtReal::PosInf, ExtReal::NegInf);
        assert!(ExtReal::NegInf < ExtReal::Finite(-1e300));
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf.scale(0.0), ExtReal::Finite(0.0));
        let s: ExtReal = [1.0, 2.0].into_iter().map(ExtReal::from).sum();
        assert_eq!(s, ExtReal::Finite(3.0));
    }

    #[test]
    fn quadratic_case() {
        let q = ConvexIntegrand::p_power(2.0).unwrap();
        let s = v(0.3, -1.2);
        assert!((q.phi(s).to_f64() - s.norm_squared() / 2.0).abs() < 1e-15);
        assert!((q.phi_star(s).to_f64() - s.norm_squared() / 2.0).abs() < 1e-15);
        assert!((q.d_phi(s).unwrap() - s).norm() < 1e-15);
        assert!(fenchel_gap(&q, s, s).to_f64().abs() < 1e-15);
        assert!((fenchel_gap(&q, v(1.0, 0.0), v(0.0, 1.0)).to_f64() - 1.0).abs() < 1e-15);
        assert!(q.is_algorithm_eligible());
        assert_eq!(q.radial_ratio(0.0), 1.0);
    }

    #[test]
    fn p4_fenchel_equality() {
        let c = ConvexIntegrand::p_power(4.0).unwrap();
        let s = v(1.0, 0.0);
        assert!((c.phi(s).to_f64() - 0.25).abs() < 1e-15);
        let t = c.d_phi(s).unwrap();
        assert!((t - s).norm() < 1e-15);
        assert!((c.phi_star(t).to_f64() - 0.75).abs() < 1e-15);
        assert!(fenchel_gap(&c, s, t).to_f64().abs() < 1e-15);
        assert!(!c.is_algorithm_eligible());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ConvexIntegrand::p_power(1.0),
            Err(FemError::Parameter(_))
        ));
        assert!(ConvexIntegrand::regularized_modulus(0.0).is_err());
        assert!(ConvexIntegrand::truncated_modulus(-1.0).is_err());
        assert!(p_laplace_quantities(0.5, v(0.0, 0.0), v(1.0, 0.0)).is_err());
    }

    #[test]
    fn regularized_modulus_values() {
        let eps = 0.1;
        let c = ConvexIntegrand::regularized_modulus(eps).unwrap();
        assert_eq!(c.phi(v(0.0, 0.0)), ExtReal::Finite(eps));
        assert_eq!(c.d_phi(v(0.0, 0.0)).unwrap(), v(0.0, 0.0));
        assert_eq!(c.radial_ratio(0.0), 1.0 / eps);
        assert_eq!(c.phi_star(v(1.0, 0.5)), ExtReal::PosInf);
        let s = v(0.3, 0.4);
        let t = c.d_phi(s).unwrap();
        assert!(fenchel_gap(&c, s, t).to_f64().abs() < 1e-12);
    }

    #[test]
    fn truncated_modulus_values() {
        let eps = 0.2;
        let c = ConvexIntegrand::truncated_modulus(eps).unwrap();
        let at = |r: f64| c.phi(v(r, 0.0)).to_f64();
        assert!((at(eps) - eps / 2.0).abs() < 1e-15);
        assert!((at(eps * (1.0 + 1e-12)) - eps / 2.0).abs() < 1e-12);
        assert_eq!(c.phi_star(v(0.8, 0.8)), ExtReal::PosInf);
        // conjugate of the Huber profile is ε|t|²/2 on the unit ball
        assert!((c.phi_star(v(0.5, 0.0)).to_f64() - eps / 8.0).abs() < 1e-15);
        assert_eq!(c.radial_ratio(0.0), 1.0 / eps);
        assert_eq!(c.radial_ratio(2.0), 0.5);
    }

    #[test]
    fn unit_ball_indicator_values() {
        let c = ConvexIntegrand::unit_ball_indicator();
        assert_eq!(c.phi(v(1.0, 0.0)), ExtReal::Finite(0.0));
        assert_eq!(c.phi(v(1.01, 0.0)), ExtReal::PosInf);
        assert!((c.phi_star(v(3.0, 4.0)).to_f64() - 5.0).abs() < 1e-15);
        assert_eq!(c.domain_radius(), Some(1.0));
        assert_eq!(c.conjugate().domain_radius(), None);
    }

    #[test]
    fn conjugate_swaps_roles() {
        let c = ConvexIntegrand::regularized_modulus(0.3).unwrap();
        let t = v(0.2, -0.5);
        assert_eq!(c.conjugate().phi(t), c.phi_star(t));
        assert_eq!(c.conjugate().conjugate(), c);
        assert_eq!(c.conjugate().domain_radius(), Some(1.0));
    }

    #[test]
    fn regularized_p_power_inverse() {
        let c = ConvexIntegrand::regularized_p_power(1.5, 1e-3).unwrap();
        for s in [v(0.0, 0.0), v(1e-6, 0.0), v(0.3, -0.7), v(12.0, 5.0)] {
            let t = c.d_phi(s).unwrap();
            assert!((c.d_phi_star(t).unwrap() - s).norm() < 1e-10 * (1.0 + s.norm()));
            assert!(fenchel_gap(&c, s, t).to_f64().abs() < 1e-12 * (1.0 + s.norm_squared()));
        }
    }

    #[test]
    fn prox_matches_closed_forms() {
        let x = v(3.0, 4.0);
        let ball = ConvexIntegrand::unit_ball_indicator();
        assert!((ball.prox(x, 2.0) - v(0.6, 0.8)).norm() < 1e-15);
        let m = ConvexIntegrand::modulus();
        assert!((m.prox(x, 0.5) - v(1.8, 2.4)).norm() < 1e-14);
        let q = ConvexIntegrand::p_power(2.0).unwrap();
        assert!((q.prox(x, 3.0) - x * 0.75).norm() < 1e-12);
        // prox of |·|* (ball indicator) via Moreau equals the projection
        assert!((m.conjugate().prox(x, 2.0) - v(0.6, 0.8)).norm() < 1e-14);
    }

    #[test]
    fn prox_optimality_for_smooth_profiles() {
        let cases = [
            ConvexIntegrand::regularized_modulus(0.1).unwrap(),
            ConvexIntegrand::p_power(1.5).unwrap(),
            ConvexIntegrand::regularized_p_power(1.5, 0.01).unwrap(),
            ConvexIntegrand::truncated_modulus(0.5).unwrap(),
        ];
        for c in cases {
            for tau in [0.3, 1.0, 7.0] {
                let x = v(0.8, -1.1);
                let q = c.prox(x, tau);
                let g = c.d_phi(q).unwrap() + (q - x) * tau;
                assert!(g.norm() < 1e-9, "{c:?} tau={tau}: {g:?}");
            }
        }
    }

    #[test]
    fn p_laplace_quantities_at_p2() {
        let a = v(0.3, 1.0);
        let b = v(-0.2, 0.4);
        let q = p_laplace_quantities(2.0, a, b).unwrap();
        assert!((q.f_diff_sq - (a - b).norm_squared()).abs() < 1e-15);
        assert!((q.s_pairing - (a - b).norm_squared()).abs() < 1e-15);
        let z = p_laplace_quantities(3.0, a, a).unwrap();
        assert_eq!((z.f_diff_sq, z.s_pairing), (0.0, 0.0));
        let origin = p_laplace_quantities(1.5, v(0.0, 0.0), v(0.0, 0.0)).unwrap();
        assert_eq!((origin.f_diff_sq, origin.s_pairing), (0.0, 0.0));
    }

    #[test]
    fn low_order_terms() {
        let f = P0Function::new(vec![2.0]);
        let lin = LowOrderTerm::linear(f.clone());
        assert_eq!(lin.value(0, 3.0), ExtReal::Finite(-6.0));
        assert_eq!(lin.conjugate(0, -2.0, 1e-12), ExtReal::Finite(0.0));
        assert_eq!(lin.conjugate(0, -1.0, 1e-12), ExtReal::PosInf);
        let quad = LowOrderTerm::quadratic(P0Function::new(vec![0.5]), 1.0).unwrap();
        // ½(t+g)² − ½g² at α = 1
        let t: f64 = 0.7;
        assert!(
            (quad.conjugate(0, t, 0.0).to_f64() - (0.5 * (t + 0.5).powi(2) - 0.125)).abs() < 1e-15
        );
        assert_eq!(quad.derivative(0, 1.5), 1.0);
        let obs = LowOrderTerm::obstacle(f);
        assert_eq!(obs.value(0, -1.0), ExtReal::PosInf);
        assert_eq!(obs.conjugate(0, -5.0, 1e-12), ExtReal::Finite(0.0));
        assert_eq!(obs.conjugate(0, -1.0, 1e-12), ExtReal::PosInf);
        assert!(LowOrderTerm::quadratic(P0Function::new(vec![0.0]), 0.0).is_err());
    }
}
