use femdual_core::integrands::{fenchel_gap, monotonicity_defect, p_laplace_quantities};
use femdual_core::{
    unit_square_mesh, ConvexIntegrand, ExtReal, FemError, LowOrderTerm, P0Function, Point,
};
use proptest::prelude::*;

fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn close(a: ExtReal, b: f64, tol: f64) -> bool {
    matches!(a, ExtReal::Finite(v) if (v - b).abs() <= tol)
}

fn vector(r: f64) -> impl Strategy<Value = Point> {
    (-r..r, -r..r).prop_map(|(x, y)| pt(x, y))
}

fn ball_vector() -> impl Strategy<Value = Point> {
    (0.0..0.999f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| pt(r * a.cos(), r * a.sin()))
}

#[test]
fn quadratic_is_self_conjugate() {
    let q = ConvexIntegrand::p_power(2.0).unwrap();
    let s = pt(0.6, -1.3);
    assert!(close(q.phi(s), 0.5 * s.norm_squared(), 1e-15));
    assert!(close(q.phi_star(s), 0.5 * s.norm_squared(), 1e-15));
    assert!((q.d_phi(s).unwrap() - s).norm() < 1e-15);
    assert!(close(fenchel_gap(&q, s, s), 0.0, 1e-15));
    assert!(close(
        fenchel_gap(&q, pt(1.0, 0.0), pt(0.0, 1.0)),
        1.0,
        1e-15
    ));
    assert_eq!(q.radial_ratio(3.0), 1.0);
}

#[test]
fn quartic_fenchel_equality() {
    let q = ConvexIntegrand::p_power(4.0).unwrap();
    let s = pt(1.0, 0.0);
    assert!(close(q.phi(s), 0.25, 1e-15));
    let t = q.d_phi(s).unwrap();
    assert!((t - s).norm() < 1e-15);
    assert!(close(q.phi_star(t), 0.75, 1e-14));
    assert!(close(fenchel_gap(&q, s, t), 0.0, 1e-14));
    assert!((q.radial_ratio(2.0) - 4.0).abs() < 1e-14);
    assert!(!q.is_algorithm_eligible());
    assert!(!ConvexIntegrand::p_power(1.5)
        .unwrap()
        .conjugate()
        .is_algorithm_eligible());
}

#[test]
fn exponent_and_regularization_must_be_valid() {
    assert!(matches!(
        ConvexIntegrand::p_power(1.0),
        Err(FemError::Parameter(_))
    ));
    assert!(matches!(
        ConvexIntegrand::p_power(0.5),
        Err(FemError::Parameter(_))
    ));
    assert!(matches!(
        ConvexIntegrand::regularized_modulus(0.0),
        Err(FemError::Parameter(_))
    ));
    assert!(matches!(
        ConvexIntegrand::truncated_modulus(-1.0),
        Err(FemError::Parameter(_))
    ));
    assert!(matches!(
        ConvexIntegrand::regularized_p_power(1.5, 0.0),
        Err(FemError::Parameter(_))
    ));
    assert!(p_laplace_quantities(1.0, pt(1.0, 0.0), pt(0.0, 0.0)).is_err());
}

#[test]
fn regularized_modulus_examples() {
    let eps = 0.1;
    let m = ConvexIntegrand::regularized_modulus(eps).unwrap();
    assert!(close(m.phi(Point::zeros()), eps, 1e-15));
    assert_eq!(m.d_phi(Point::zeros()), Some(Point::zeros()));
    assert_eq!(m.phi_star(pt(1.0, 0.5)), ExtReal::PosInf);
    assert!((m.radial_ratio(0.0) - 1.0 / eps).abs() < 1e-12);
    assert!(m.is_algorithm_eligible());
    assert_eq!(m.domain_radius(), None);
    assert_eq!(m.conjugate().domain_radius(), Some(1.0));
}

#[test]
fn truncated_modulus_examples() {
    let eps = 0.2;
    let tm = ConvexIntegrand::truncated_modulus(eps).unwrap();
    // both branches meet at |s| = ε
    assert!(close(tm.phi(pt(eps, 0.0)), eps / 2.0, 1e-15));
    assert!(close(
        tm.phi(pt(0.0, eps * (1.0 + 1e-12))),
        eps / 2.0,
        1e-12
    ));
    assert_eq!(tm.phi_star(pt(0.8, 0.8)), ExtReal::PosInf);
    // the conjugate of the Huber profile is ε|t|²/2 on the unit ball
    assert!(close(tm.phi_star(pt(0.5, 0.0)), eps / 8.0, 1e-15));
    assert!(tm.is_algorithm_eligible());
}

#[test]
fn unit_ball_indicator_examples() {
    let ind = ConvexIntegrand::unit_ball_indicator();
    assert!(close(ind.phi(pt(0.6, 0.8)), 0.0, 0.0));
    assert_eq!(ind.phi(pt(1.01, 0.0)), ExtReal::PosInf);
    let t = pt(-3.0, 4.0);
    assert!(close(ind.phi_star(t), 5.0, 1e-14));
    assert!(fenchel_gap(&ind, pt(1.0, 0.0), t).to_f64() >= 0.0);
    assert_eq!(fenchel_gap(&ind, pt(2.0, 0.0), t), ExtReal::PosInf);
    assert!(!ind.is_algorithm_eligible());
    assert!((ind.prox(pt(3.0, 4.0), 1.0) - pt(0.6, 0.8)).norm() < 1e-15);
}

#[test]
fn p_laplace_quantity_examples() {
    let (a, b) = (pt(0.3, -1.1), pt(-0.7, 0.2));
    let q = p_laplace_quantities(2.0, a, b).unwrap();
    let d = (a - b).norm_squared();
    assert!((q.f_diff_sq - d).abs() < 1e-14 && (q.s_pairing - d).abs() < 1e-14);
    let q = p_laplace_quantities(3.0, a, a).unwrap();
    assert_eq!((q.f_diff_sq, q.s_pairing), (0.0, 0.0));
    let q = p_laplace_quantities(1.5, Point::zeros(), Point::zeros()).unwrap();
    assert_eq!((q.f_diff_sq, q.s_pairing), (0.0, 0.0));
}

#[test]
fn p_laplace_quantities_are_equivalent() {
    // tabulated on a log-spaced grid of magnitudes and angles
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..25 {
        for j in 0..25 {
            for k in 0..8 {
                let ra = 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0);
                let rb = 10f64.powf(-3.0 + 6.0 * j as f64 / 24.0);
                let ang = k as f64 * std::f64::consts::PI / 7.0;
                let a = pt(ra, 0.0);
                let b = pt(rb * ang.cos(), rb * ang.sin());
                let q = p_laplace_quantities(4.0, a, b).unwrap();
                if q.f_diff_sq > 0.0 {
                    let r = q.s_pairing / q.f_diff_sq;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
    }
    assert!(lo > 0.1 && hi < 10.0, "ratio range [{lo}, {hi}]");
}

#[test]
fn radial_ratios_are_non_increasing() {
    let eligible = [
        ConvexIntegrand::regularized_modulus(1e-2).unwrap(),
        ConvexIntegrand::regularized_modulus(1.0).unwrap(),
        ConvexIntegrand::truncated_modulus(0.1).unwrap(),
        ConvexIntegrand::regularized_p_power(1.5, 1e-2).unwrap(),
        ConvexIntegrand::regularized_p_power(1.1, 0.5).unwrap(),
        ConvexIntegrand::p_power(2.0).unwrap(),
    ];
    for ci in &eligible {
        assert!(ci.is_algorithm_eligible());
        let mut prev = ci.radial_ratio(0.0);
        assert!(prev.is_finite() && prev > 0.0);
        for i in 0..200 {
            let r = 10f64.powf(-6.0 + 9.0 * i as f64 / 199.0);
            let w = ci.radial_ratio(r);
            assert!(w > 0.0 && w <= prev * (1.0 + 1e-12), "{ci:?} at r={r}");
            prev = w;
        }
    }
}

#[test]
fn biconjugate_of_regularized_modulus() {
    let eps = 0.3;
    let m = ConvexIntegrand::regularized_modulus(eps).unwrap();
    let n = 400;
    for s in [pt(0.0, 0.0), pt(0.5, 0.2), pt(-2.0, 1.0)] {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let t = pt(
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * j as f64 / n as f64,
                );
                if let ExtReal::Finite(v) = m.phi_star(t) {
                    best = best.max(s.dot(&t) - v);
                }
            }
        }
        let exact = m.phi(s).to_f64();
        assert!(
            best <= exact + 1e-12 && exact - best < 2e-2,
            "{s:?}: {best} vs {exact}"
        );
    }
}

#[test]
fn low_order_terms() {
    let mesh = unit_square_mesh(0).unwrap();
    let f = P0Function::new(vec![2.0, -1.0]);
    let lin = LowOrderTerm::linear(f.clone());
    assert!(close(lin.value(0, 3.0), -6.0, 0.0));
    assert_eq!(lin.derivative(1, 7.0), 1.0);
    assert!(close(lin.conjugate(0, -2.0, 1e-12), 0.0, 0.0));
    assert_eq!(lin.conjugate(0, -1.9, 1e-12), ExtReal::PosInf);

    let quad = LowOrderTerm::quadratic(P0Function::new(vec![0.5, 0.0]), 1.0).unwrap();
    assert!(close(quad.value(0, 1.5), 0.5, 1e-15));
    // ψ* = ½(t + g)² − ½ g² for α = 1
    for t in [-1.0, 0.2, 3.0] {
        assert!(close(
            quad.conjugate(0, t, 0.0),
            0.5 * (t + 0.5f64).powi(2) - 0.125,
            1e-14
        ));
    }
    let quad = LowOrderTerm::quadratic(P0Function::constant(&mesh, 0.25), 10.0).unwrap();
    assert!((quad.derivative(0, 1.25) - 10.0).abs() < 1e-14);
    assert!(LowOrderTerm::quadratic(P0Function::constant(&mesh, 0.0), 0.0).is_err());

    let obs = LowOrderTerm::obstacle(f);
    assert_eq!(obs.value(0, -1.0), ExtReal::PosInf);
    assert!(close(obs.value(0, 1.0), -2.0, 0.0));
    assert!(close(obs.conjugate(0, -5.0, 1e-12), 0.0, 0.0));
    assert_eq!(obs.conjugate(0, 0.0, 1e-12), ExtReal::PosInf);
}

#[test]
fn extended_reals() {
    assert_eq!(ExtReal::Finite(1.0) + ExtReal::PosInf, ExtReal::PosInf);
    assert_eq!(-ExtReal::PosInf, ExtReal::NegInf);
    assert_eq!(ExtReal::PosInf.finite(), None);
    assert_eq!(ExtReal::Finite(2.0).scale(3.0), ExtReal::Finite(6.0));
    let total: ExtReal = [1.0, 2.0].into_iter().map(ExtReal::Finite).sum();
    assert_eq!(total, ExtReal::Finite(3.0));
}

fn fenchel_family() -> Vec<ConvexIntegrand> {
    vec![
        ConvexIntegrand::p_power(1.5).unwrap(),
        ConvexIntegrand::p_power(2.0).unwrap(),
        ConvexIntegrand::p_power(3.0).unwrap(),
        ConvexIntegrand::regularized_p_power(1.5, 0.1).unwrap(),
        ConvexIntegrand::regularized_modulus(0.05).unwrap(),
        ConvexIntegrand::truncated_modulus(0.2).unwrap(),
        ConvexIntegrand::modulus(),
        ConvexIntegrand::unit_ball_indicator(),
    ]
}

proptest! {
    #[test]
    fn fenchel_young_inequality(s in vector(3.0), t in ball_vector(), scale in 0.0..3.0f64) {
        for ci in fenchel_family() {
            for ci in [ci, ci.conjugate()] {
                let t = t * scale;
                let s = if ci.domain_radius().is_some() { s / (1.0 + s.norm()) } else { s };
                if let ExtReal::Finite(g) = fenchel_gap(&ci, s, t) {
                    prop_assert!(g >= -1e-12, "{ci:?} s={s:?} t={t:?} gap={g}");
                }
            }
        }
    }

    #[test]
    fn fenchel_equality_at_the_derivative(s in vector(3.0)) {
        for ci in fenchel_family() {
            if let Some(t) = ci.d_phi(s) {
                let g = fenchel_gap(&ci, s, t);
                let scale = 1.0 + s.norm() * t.norm();
                prop_assert!(close(g, 0.0, 1e-10 * scale), "{ci:?} s={s:?} gap={g:?}");
            }
        }
    }

    #[test]
    fn derivative_of_conjugate_inverts_derivative(s in vector(3.0)) {
        prop_assume!(s.norm() > 1e-6);
        let family = [
            ConvexIntegrand::p_power(1.5).unwrap(),
            ConvexIntegrand::p_power(3.0).unwrap(),
            ConvexIntegrand::p_power(2.0).unwrap(),
            ConvexIntegrand::regularized_p_power(1.5, 0.1).unwrap(),
            ConvexIntegrand::regularized_modulus(0.5).unwrap(),
        ];
        for ci in family {
            let t = ci.d_phi(s).unwrap();
            let back = ci.d_phi_star(t).unwrap();
            prop_assert!((back - s).norm() <= 1e-8 * (1.0 + s.norm()), "{ci:?} s={s:?} back={back:?}");
        }
    }

    #[test]
    fn regularized_modulus_is_close_to_modulus(s in vector(10.0), eps in 1e-4..1.0f64) {
        let m = ConvexIntegrand::regularized_modulus(eps).unwrap();
        let d = m.phi(s).to_f64() - s.norm();
        prop_assert!((0.0..=eps + 1e-15).contains(&d));
        let t = m.d_phi(s).unwrap();
        prop_assert!(close(fenchel_gap(&m, s, t), 0.0, 1e-10));
    }

    #[test]
    fn monotonicity_inequality(a in vector(5.0), b in vector(5.0)) {
        let family = [
            ConvexIntegrand::regularized_modulus(1e-3).unwrap(),
            ConvexIntegrand::regularized_modulus(0.5).unwrap(),
            ConvexIntegrand::regularized_p_power(1.5, 0.05).unwrap(),
            ConvexIntegrand::p_power(2.0).unwrap(),
        ];
        for ci in family {
            prop_assert!(monotonicity_defect(&ci, a, b) >= -1e-12 * (1.0 + b.norm_squared()), "{ci:?}");
        }
    }

    #[test]
    fn prox_is_optimal(x in vector(3.0), tau in 0.1..10.0f64) {
        for ci in [ConvexIntegrand::regularized_modulus(0.1).unwrap(), ConvexIntegrand::truncated_modulus(0.3).unwrap(), ConvexIntegrand::modulus()] {
            let q = ci.prox(x, tau);
            let obj = |p: Point| ci.phi(p).to_f64() + 0.5 * tau * (p - x).norm_squared();
            let best = obj(q);
            for d in [pt(1e-4, 0.0), pt(0.0, 1e-4), pt(-1e-4, 0.0), pt(0.0, -1e-4)] {
                prop_assert!(best <= obj(q + d) + 1e-12);
            }
        }
    }
}
