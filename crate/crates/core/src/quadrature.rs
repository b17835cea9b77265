//! Quadrature rules on segments and triangles.

use crate::mesh::Point;

/// Rule on a triangle in barycentric coordinates; weights sum to one and are
/// multiplied by the element area when integrating.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Edge-midpoint rule, exact for quadratics.
    pub fn edge_midpoint() -> Self {
        TriangleRule {
            points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Seven-point rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s = 15f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let b1 = (9.0 + 2.0 * s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let b2 = (9.0 - 2.0 * s) / 21.0;
        let w1 = (155.0 - s) / 1200.0;
        let w2 = (155.0 + s) / 1200.0;
        TriangleRule {
            points: vec![
                [1.0 / 3.0; 3],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Collapsed tensor Gauss rule with `n` points per direction, exact for
    /// total degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (u, wu) in x.iter().zip(&w) {
            for (v, wv) in x.iter().zip(&w) {
                let s = *u;
                let t = v * (1.0 - u);
                points.push([1.0 - s - t, s, t]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights }
    }

    /// Integrates `f` over the triangle with the given vertices and area.
    pub fn integrate<F: FnMut(Point) -> f64>(&self, v: &[Point; 3], area: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (l, w) in self.points.iter().zip(&self.weights) {
            let x = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
            acc += w * f(x);
        }
        acc * area
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one quadrature point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n starting from the Chebyshev guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Side quadrature used by the CR and RT interpolants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SideRule {
    /// Two Gauss points, exact through degree 3.
    #[default]
    Gauss2,
    /// Three Gauss points, exact through degree 5.
    Gauss3,
}

impl SideRule {
    pub fn points(self) -> usize {
        match self {
            SideRule::Gauss2 => 2,
            SideRule::Gauss3 => 3,
        }
    }

    /// Mean value of `f` along the segment `[a, b]`.
    pub fn mean<F: FnMut(Point) -> f64>(self, a: Point, b: Point, mut f: F) -> f64 {
        let (x, w) = gauss_legendre(self.points());
        x.iter().zip(&w).map(|(t, w)| w * f(a + (b - a) * *t)).sum()
    }
}
