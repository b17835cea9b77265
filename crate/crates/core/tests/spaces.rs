use femdual_core::quadrature::{SideRule, TriangleRule};
use femdual_core::spaces::{
    barycenter_values, cr_dofmap, enrich_cr, interpolate_cr, interpolate_cr_with, interpolate_p1,
    interpolate_rt, project_p0, project_p0_field, rt_dofmap, write_dofs_csv, write_p0_csv,
};
use femdual_core::{
    unit_square_mesh, BoundaryLabel, CrFunction, FemError, Point, RtFunction, Triangulation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn neumann_mesh(level: usize) -> Triangulation {
    unit_square_mesh(level)
        .unwrap()
        .set_boundary_labels(|_| BoundaryLabel::Neumann)
}

fn random_cr(mesh: &Triangulation, rng: &mut ChaCha8Rng) -> CrFunction {
    let mut u = CrFunction::new(
        (0..mesh.num_sides())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    u.apply_dirichlet(mesh);
    u
}

fn l2_error<F: Fn(Point) -> f64, G: Fn(usize, Point) -> f64>(
    mesh: &Triangulation,
    exact: F,
    approx: G,
) -> f64 {
    let rule = TriangleRule::degree5();
    (0..mesh.num_elements())
        .map(|t| {
            rule.integrate(&mesh.vertices(t), mesh.elements()[t].area, |x| {
                (exact(x) - approx(t, x)).powi(2)
            })
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn dof_maps_follow_boundary_labels() {
    let mesh = unit_square_mesh(2).unwrap();
    let boundary = mesh.sides().iter().filter(|s| s.is_boundary()).count();
    assert_eq!(cr_dofmap(&mesh).num_free(), mesh.num_sides() - boundary);
    assert_eq!(rt_dofmap(&mesh).num_free(), mesh.num_sides());
    let neu = neumann_mesh(2);
    assert_eq!(cr_dofmap(&neu).num_free(), neu.num_sides());
    assert_eq!(rt_dofmap(&neu).num_free(), neu.num_sides() - boundary);

    let dofs = cr_dofmap(&mesh);
    let global: Vec<f64> = (0..mesh.num_sides()).map(|s| s as f64 + 1.0).collect();
    let back = dofs.extend(&dofs.restrict(&global));
    for s in 0..mesh.num_sides() {
        assert_eq!(back[s], if mesh.is_dirichlet(s) { 0.0 } else { global[s] });
    }
}

#[test]
fn cr_gradient_examples() {
    let mesh = neumann_mesh(2);
    let one = CrFunction::new(vec![1.0; mesh.num_sides()]);
    assert!(one.grad_h(&mesh).values.iter().all(|g| g.norm() < 1e-13));
    let x1 = interpolate_cr(&mesh, |x| x.x);
    assert!(x1
        .grad_h(&mesh)
        .values
        .iter()
        .all(|g| (g - Point::new(1.0, 0.0)).norm() < 1e-13));
}

#[test]
fn cr_gradient_matches_midpoint_differences() {
    let mesh = neumann_mesh(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = random_cr(&mesh, &mut rng);
    for t in 0..mesh.num_elements() {
        let el = &mesh.elements()[t];
        let m: Vec<Point> = el.sides.iter().map(|&s| mesh.sides()[s].midpoint).collect();
        let v = u.local(&mesh, t);
        // g·(m1 − m0) = v1 − v0, g·(m2 − m0) = v2 − v0
        let a = nalgebra::Matrix2::new(
            m[1].x - m[0].x,
            m[1].y - m[0].y,
            m[2].x - m[0].x,
            m[2].y - m[0].y,
        );
        let g = a
            .lu()
            .solve(&nalgebra::Vector2::new(v[1] - v[0], v[2] - v[0]))
            .unwrap();
        assert!((g - u.grad_on(&mesh, t)).norm() < 1e-12);
        // midpoint continuity: the affine restriction takes the side values
        for i in 0..3 {
            assert!((u.eval(&mesh, t, m[i]) - v[i]).abs() < 1e-13);
        }
    }
}

#[test]
fn cr_constraints_are_zero() {
    let mesh = unit_square_mesh(3).unwrap();
    let u = interpolate_cr(&mesh, |x| 1.0 + x.x * x.y);
    for s in 0..mesh.num_sides() {
        if mesh.is_dirichlet(s) {
            assert_eq!(u.values[s], 0.0);
        }
    }
}

#[test]
fn rt_divergence_examples() {
    let mesh = unit_square_mesh(3).unwrap();
    let c = interpolate_rt(&mesh, |_| Point::new(1.0, 0.0));
    assert!(c.divergence(&mesh).values.iter().all(|d| d.abs() < 1e-12));
    let x = interpolate_rt(&mesh, |x| x);
    assert!(x
        .divergence(&mesh)
        .values
        .iter()
        .all(|d| (d - 2.0).abs() < 1e-12));
    for t in 0..mesh.num_elements() {
        let (_, b) = x.affine_on(&mesh, t);
        assert!((x.divergence_on(&mesh, t) - 2.0 * b).abs() < 1e-12);
    }
}

#[test]
fn rt_basis_field_properties() {
    let mesh = unit_square_mesh(2).unwrap();
    for s in [0, 7, 20] {
        let mut fluxes = vec![0.0; mesh.num_sides()];
        fluxes[s] = 1.0;
        let psi = RtFunction::new(fluxes);
        let side = &mesh.sides()[s];
        for t in std::iter::once(side.minus).chain(side.plus) {
            let el = &mesh.elements()[t];
            let i = el.sides.iter().position(|&x| x == s).unwrap();
            // vanishes at the opposite vertex
            let p = mesh.nodes()[el.nodes[i]];
            assert!(psi.eval(&mesh, t, p).unwrap().norm() < 1e-13);
            // ψ_S·n_S' = δ_SS' on the sides of the element
            for &s2 in &el.sides {
                let other = &mesh.sides()[s2];
                let n = psi
                    .eval(&mesh, t, other.midpoint)
                    .unwrap()
                    .dot(&other.normal);
                assert!((n - if s2 == s { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
            // divergence ±|S|/|T|
            let expected = el.orientation[i] * side.length / el.area;
            assert!((psi.divergence_on(&mesh, t) - expected).abs() < 1e-12);
            // d b_T matches a finite difference divergence
            let h = 1e-6;
            let x0 = el.barycenter;
            let fd = (psi.eval_unchecked(&mesh, t, x0 + Point::new(h, 0.0)).x
                - psi.eval_unchecked(&mesh, t, x0 - Point::new(h, 0.0)).x
                + psi.eval_unchecked(&mesh, t, x0 + Point::new(0.0, h)).y
                - psi.eval_unchecked(&mesh, t, x0 - Point::new(0.0, h)).y)
                / (2.0 * h);
            assert!((fd - expected).abs() < 1e-6 * (1.0 + expected.abs()));
        }
    }
    let zero = RtFunction::zeros(&mesh);
    assert_eq!(
        zero.eval(&mesh, 3, mesh.elements()[3].barycenter).unwrap(),
        Point::zeros()
    );
}

#[test]
fn rt_normal_component_is_continuous() {
    let mesh = unit_square_mesh(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = RtFunction::new(
        (0..mesh.num_sides())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    let nodes = mesh.nodes();
    for (s, side) in mesh.sides().iter().enumerate() {
        let Some(plus) = side.plus else { continue };
        for lam in [0.0, 0.3, 1.0] {
            let x = nodes[side.nodes[0]] * (1.0 - lam) + nodes[side.nodes[1]] * lam;
            let a = z.eval_unchecked(&mesh, side.minus, x).dot(&side.normal);
            let b = z.eval_unchecked(&mesh, plus, x).dot(&side.normal);
            assert!((a - z.fluxes[s]).abs() < 1e-12 && (b - z.fluxes[s]).abs() < 1e-12);
        }
    }
}

#[test]
fn rt_evaluation_outside_element_is_an_error() {
    let mesh = unit_square_mesh(2).unwrap();
    let z = RtFunction::zeros(&mesh);
    let far = mesh.elements()[mesh.num_elements() - 1].barycenter;
    assert!(matches!(z.eval(&mesh, 0, far), Err(FemError::Domain(_))));
    assert!(matches!(
        z.eval(&mesh, mesh.num_elements(), far),
        Err(FemError::Domain(_))
    ));
}

#[test]
fn projection_examples() {
    let mesh = unit_square_mesh(3).unwrap();
    let f = |x: Point| 0.5 + 2.0 * x.x - 3.0 * x.y;
    let p = project_p0(&mesh, f);
    for (t, el) in mesh.elements().iter().enumerate() {
        assert!((p.values[t] - f(el.barycenter)).abs() < 1e-13);
    }
    let z = interpolate_rt(&mesh, |x| Point::new(x.y, x.x * 2.0));
    for (t, a) in z.project_p0(&mesh).values.iter().enumerate() {
        assert!((a - z.eval_unchecked(&mesh, t, mesh.elements()[t].barycenter)).norm() < 1e-14);
    }
    let g = barycenter_values(&mesh, |x| if x.norm() < 0.5 { 1.0 } else { 0.0 });
    for (t, el) in mesh.elements().iter().enumerate() {
        assert_eq!(g.values[t] == 1.0, el.barycenter.norm() < 0.5);
    }
}

#[test]
fn cr_interpolation_reproduces_affine_functions() {
    let mesh = neumann_mesh(3);
    let f = |x: Point| 1.0 - 0.5 * x.x + 2.0 * x.y;
    let u = interpolate_cr(&mesh, f);
    for t in 0..mesh.num_elements() {
        for v in mesh.vertices(t) {
            assert!((u.eval(&mesh, t, v) - f(v)).abs() < 1e-13);
        }
    }
}

#[test]
fn cr_interpolation_commutes_with_gradient() {
    for level in 1..=4 {
        let mesh = neumann_mesh(level);
        let u = interpolate_cr(&mesh, |x| x.x * x.y);
        let g = project_p0_field(&mesh, |x| Point::new(x.y, x.x));
        for t in 0..mesh.num_elements() {
            assert!((u.grad_on(&mesh, t) - g.values[t]).norm() < 1e-12);
        }
    }
}

#[test]
fn cr_interpolation_error_is_second_order() {
    let v = |x: Point| (1.0 - x.x * x.x) * (1.0 - x.y * x.y);
    let errors: Vec<f64> = (3..=6)
        .map(|level| {
            let mesh = unit_square_mesh(level).unwrap();
            let u = interpolate_cr(&mesh, v);
            l2_error(&mesh, v, |t, x| u.eval(&mesh, t, x))
        })
        .collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((1.9..2.1).contains(&rate), "rate {rate}");
    }
}

#[test]
fn rt_interpolation_examples() {
    let mesh = unit_square_mesh(3).unwrap();
    let c = Point::new(0.3, -1.2);
    let z = interpolate_rt(&mesh, |_| c);
    for t in 0..mesh.num_elements() {
        for v in mesh.vertices(t) {
            assert!((z.eval_unchecked(&mesh, t, v) - c).norm() < 1e-13);
        }
    }
    let z = interpolate_rt(&mesh, |x| Point::new(x.x * x.x, 0.0));
    let div = project_p0(&mesh, |x| 2.0 * x.x);
    for t in 0..mesh.num_elements() {
        assert!((z.divergence_on(&mesh, t) - div.values[t]).abs() < 1e-12);
    }
}

#[test]
fn rt_interpolation_error_is_first_order() {
    let grad = |x: Point| {
        Point::new(
            -2.0 * x.x * (1.0 - x.y * x.y),
            -2.0 * x.y * (1.0 - x.x * x.x),
        )
    };
    let rule = TriangleRule::degree5();
    let errors: Vec<f64> = (3..=6)
        .map(|level| {
            let mesh = unit_square_mesh(level).unwrap();
            let z = interpolate_rt(&mesh, grad);
            (0..mesh.num_elements())
                .map(|t| {
                    rule.integrate(&mesh.vertices(t), mesh.elements()[t].area, |x| {
                        (grad(x) - z.eval_unchecked(&mesh, t, x)).norm_squared()
                    })
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((0.9..1.2).contains(&rate), "rate {rate}");
    }
}

#[test]
fn cr_interpolation_is_bounded_in_max_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = neumann_mesh(2);
    for _ in 0..200 {
        let (a, b, c, k) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(1.0..8.0),
        );
        let v = move |x: Point| {
            (k * x.x + a).sin() * (b * x.y).cos() + if x.x > c { 1.0 } else { -1.0 }
        };
        let sup = (0..mesh.num_elements())
            .flat_map(|t| {
                let vs = mesh.vertices(t);
                (0..=10).flat_map(move |i| (0..=10 - i).map(move |j| (vs, i, j)))
            })
            .map(|(vs, i, j)| {
                let (l1, l2) = (i as f64 / 10.0, j as f64 / 10.0);
                v(vs[0] + (vs[1] - vs[0]) * l1 + (vs[2] - vs[0]) * l2).abs()
            })
            .fold(0.0, f64::max);
        let u = interpolate_cr_with(&mesh, v, SideRule::Gauss2);
        let u_sup = (0..mesh.num_elements())
            .flat_map(|t| u.vertex_values(&mesh, t))
            .fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(u_sup <= 3.0 * sup + 1e-12);
    }
}

#[test]
fn enrichment_reproduces_constants_and_conforming_functions() {
    let mesh = neumann_mesh(3);
    let e = enrich_cr(&mesh, &CrFunction::new(vec![2.5; mesh.num_sides()]));
    assert!(e
        .vertex
        .iter()
        .chain(&e.side)
        .all(|v| (v - 2.5).abs() < 1e-13));

    let mesh = unit_square_mesh(3).unwrap();
    let p1 = interpolate_p1(&mesh, |x| (1.0 + x.x) * (2.0 - x.y * x.y));
    let e = enrich_cr(&mesh, &p1.to_cr(&mesh));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..mesh.num_elements() {
        let v = mesh.vertices(t);
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        let (a, b) = if a + b > 1.0 {
            (1.0 - a, 1.0 - b)
        } else {
            (a, b)
        };
        let x = v[0] + (v[1] - v[0]) * a + (v[2] - v[0]) * b;
        assert!((e.eval(&mesh, t, x) - p1.eval(&mesh, t, x)).abs() < 1e-13);
        assert!((e.grad(&mesh, t, x) - p1.grad_on(&mesh, t)).norm() < 1e-12);
    }
}

#[test]
fn enrichment_is_conforming_and_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sups = Vec::new();
    for level in 2..=5 {
        let mesh = unit_square_mesh(level).unwrap();
        let mut sup: f64 = 0.0;
        for _ in 0..20 {
            let v = random_cr(&mesh, &mut rng);
            let e = enrich_cr(&mesh, &v);
            sup = sup.max(e.grad_l2_norm(&mesh) / v.grad_h(&mesh).l2_norm(&mesh));
        }
        // P2 continuity across an interior side: both traces agree at a Gauss point
        let e = enrich_cr(&mesh, &random_cr(&mesh, &mut rng));
        for side in mesh.sides().iter().filter(|s| !s.is_boundary()) {
            let x = mesh.nodes()[side.nodes[0]] * 0.2 + mesh.nodes()[side.nodes[1]] * 0.8;
            let (a, b) = (
                e.eval(&mesh, side.minus, x),
                e.eval(&mesh, side.plus.unwrap(), x),
            );
            assert!((a - b).abs() < 1e-12);
        }
        sups.push(sup);
    }
    assert!(sups.iter().all(|s| s.is_finite() && *s < 10.0), "{sups:?}");
}

#[test]
fn field_dumps() {
    let mesh = unit_square_mesh(1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    write_dofs_csv(&path, &[1.0, -0.5]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text,
        "dof_index,value\n0,1.000000000000000e0\n1,-5.000000000000000e-1\n"
    );

    let path = dir.path().join("p0.csv");
    write_p0_csv(&path, &mesh, &vec![0.0; mesh.num_elements()]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("x_T,y_T,value"));
    assert_eq!(text.lines().count(), 1 + mesh.num_elements());

    let missing = dir.path().join("nope").join("x.csv");
    assert!(matches!(
        write_dofs_csv(&missing, &[]),
        Err(FemError::Io { .. })
    ));
}
