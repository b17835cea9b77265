//! Conforming triangulations with side topology and uniform red refinement.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector2;

use crate::error::{FemError, Result};

pub type Point = Vector2<f64>;

/// Highest refinement level accepted by [`unit_square_mesh`].
pub const MAX_LEVEL: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryLabel {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct Side {
    /// Sorted node pair.
    pub nodes: [usize; 2],
    /// Lower-indexed adjacent element.
    pub minus: usize,
    pub plus: Option<usize>,
    /// Unit normal pointing out of `minus`.
    pub normal: Point,
    pub midpoint: Point,
    pub length: f64,
    /// `None` for interior sides.
    pub label: Option<BoundaryLabel>,
}

impl Side {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    /// Counterclockwise vertex indices.
    pub nodes: [usize; 3],
    /// `sides[i]` is the side opposite `nodes[i]`.
    pub sides: [usize; 3],
    /// `+1` where the side normal points out of this element, `-1` otherwise.
    pub orientation: [f64; 3],
    pub barycenter: Point,
    pub area: f64,
    pub diameter: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [Point; 3],
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    nodes: Vec<Point>,
    elements: Vec<Element>,
    sides: Vec<Side>,
    h_max: f64,
    level: usize,
}

impl Triangulation {
    /// Builds a mesh from coordinates and triangles; clockwise triangles are
    /// reoriented. All boundary sides are labeled Dirichlet.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(nodes, triangles, 0, |_, _| BoundaryLabel::Dirichlet)
    }

    fn build<F>(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        level: usize,
        label: F,
    ) -> Result<Self>
    where
        F: Fn([usize; 2], Point) -> BoundaryLabel,
    {
        let mut elements = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(FemError::Domain(format!(
                    "element {t} references a missing node"
                )));
            }
            let mut tri = *tri;
            let (a, b, c) = (nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            let det = (b - a).perp(&(c - a));
            if det == 0.0 {
                return Err(FemError::Domain(format!("element {t} is degenerate")));
            }
            if det < 0.0 {
                tri.swap(1, 2);
            }
            let p = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            let area = 0.5 * det.abs();
            let diameter = (p[1] - p[0])
                .norm()
                .max((p[2] - p[1]).norm())
                .max((p[0] - p[2]).norm());
            let mut grad_lambda = [Point::zeros(); 3];
            for i in 0..3 {
                // rotate the opposite edge clockwise to get the outward normal times |S|
                let e = p[(i + 2) % 3] - p[(i + 1) % 3];
                let outward = Point::new(e.y, -e.x);
                grad_lambda[i] = -outward / (2.0 * area);
            }
            elements.push(Element {
                nodes: tri,
                sides: [0; 3],
                orientation: [1.0; 3],
                barycenter: (p[0] + p[1] + p[2]) / 3.0,
                area,
                diameter,
                grad_lambda,
            });
        }

        let mut keys: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * elements.len());
        for (t, el) in elements.iter().enumerate() {
            for i in 0..3 {
                let a = el.nodes[(i + 1) % 3];
                let b = el.nodes[(i + 2) % 3];
                keys.push(([a.min(b), a.max(b)], t, i));
            }
        }
        keys.sort_unstable();

        let mut sides: Vec<Side> = Vec::with_capacity(keys.len() / 2 + 1);
        let mut k = 0;
        while k < keys.len() {
            let (pair, t, i) = keys[k];
            let mut plus = None;
            if k + 1 < keys.len() && keys[k + 1].0 == pair {
                plus = Some((keys[k + 1].1, keys[k + 1].2));
                if k + 2 < keys.len() && keys[k + 2].0 == pair {
                    return Err(FemError::Domain(format!(
                        "side {pair:?} is shared by more than two elements"
                    )));
                }
                k += 2;
            } else {
                k += 1;
            }
            let s = sides.len();
            // t < plus element by construction of the sort
            let (minus, im) = (t, i);
            elements[minus].sides[im] = s;
            elements[minus].orientation[im] = 1.0;
            if let Some((tp, ip)) = plus {
                elements[tp].sides[ip] = s;
                elements[tp].orientation[ip] = -1.0;
            }
            let el = &elements[minus];
            let a = nodes[el.nodes[(im + 1) % 3]];
            let b = nodes[el.nodes[(im + 2) % 3]];
            let e = b - a;
            let length = e.norm();
            let midpoint = (a + b) / 2.0;
            sides.push(Side {
                nodes: pair,
                minus,
                plus: plus.map(|p| p.0),
                normal: Point::new(e.y, -e.x) / length,
                midpoint,
                length,
                label: if plus.is_none() {
                    Some(label(pair, midpoint))
                } else {
                    None
                },
            });
        }

        let h_max = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(Triangulation {
            nodes,
            elements,
            sides,
            h_max,
            level,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_sides(&self) -> usize {
        self.sides.len()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Number of uniform refinements applied since construction.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Vertex coordinates of element `t`.
    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let n = self.elements[t].nodes;
        [self.nodes[n[0]], self.nodes[n[1]], self.nodes[n[2]]]
    }

    pub fn area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// True if barycentric coordinates of `x` in element `t` are all >= -tol.
    pub fn contains(&self, t: usize, x: Point, tol: f64) -> bool {
        let el = &self.elements[t];
        (0..3).all(|i| 1.0 / 3.0 + el.grad_lambda[i].dot(&(x - el.barycenter)) >= -tol)
    }

    pub fn is_dirichlet(&self, s: usize) -> bool {
        self.sides[s].label == Some(BoundaryLabel::Dirichlet)
    }

    pub fn is_neumann(&self, s: usize) -> bool {
        self.sides[s].label == Some(BoundaryLabel::Neumann)
    }

    pub fn has_dirichlet(&self) -> bool {
        (0..self.sides.len()).any(|s| self.is_dirichlet(s))
    }

    /// Nodes lying on a Dirichlet side.
    pub fn dirichlet_nodes(&self) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        for (s, side) in self.sides.iter().enumerate() {
            if self.is_dirichlet(s) {
                mark[side.nodes[0]] = true;
                mark[side.nodes[1]] = true;
            }
        }
        mark
    }

    /// Red refinement: every triangle is split into four by its side midpoints.
    /// Midpoint nodes are appended in side order and boundary labels are inherited.
    pub fn refine_uniform(&self) -> Result<Self> {
        if self.level + 1 > MAX_LEVEL {
            return Err(FemError::Resource {
                level: self.level + 1,
                limit: MAX_LEVEL,
            });
        }
        let nv = self.nodes.len();
        let mut nodes = self.nodes.clone();
        nodes.extend(self.sides.iter().map(|s| s.midpoint));
        let mut triangles = Vec::with_capacity(4 * self.elements.len());
        for el in &self.elements {
            let [a, b, c] = el.nodes;
            // midpoint of the side opposite each vertex
            let m_bc = nv + el.sides[0];
            let m_ca = nv + el.sides[1];
            let m_ab = nv + el.sides[2];
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_ab, m_bc, m_ca]);
        }
        let parent_label = |pair: [usize; 2], _: Point| {
            let mid = if pair[1] >= nv { pair[1] } else { pair[0] };
            self.sides[mid - nv]
                .label
                .unwrap_or(BoundaryLabel::Dirichlet)
        };
        Self::build(nodes, triangles, self.level + 1, parent_label)
    }

    /// Relabels boundary sides by evaluating `predicate` at their midpoints.
    pub fn set_boundary_labels<F: Fn(Point) -> BoundaryLabel>(&self, predicate: F) -> Self {
        let mut mesh = self.clone();
        for side in &mut mesh.sides {
            if side.plus.is_none() {
                side.label = Some(predicate(side.midpoint));
            }
        }
        mesh
    }

    /// Plain-text dump: `V E M`, node coordinates, sides with label
    /// (0 interior, 1 Dirichlet, 2 Neumann), then elements.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.nodes.len(),
            self.sides.len(),
            self.elements.len()
        );
        for p in &self.nodes {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        for s in &self.sides {
            let label = match s.label {
                None => 0,
                Some(BoundaryLabel::Dirichlet) => 1,
                Some(BoundaryLabel::Neumann) => 2,
            };
            let _ = writeln!(out, "{} {} {}", s.nodes[0], s.nodes[1], label);
        }
        for e in &self.elements {
            let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.nodes[2]);
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let io = |source| FemError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(self.to_text().as_bytes()).map_err(io)
    }

    /// Element containing `x`, by linear search.
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.elements.len()).find(|&t| self.contains(t, x, 1e-12))
    }

    /// Number of elements adjacent to each node.
    pub fn node_valence(&self) -> Vec<usize> {
        let mut n = vec![0; self.nodes.len()];
        for e in &self.elements {
            for &v in &e.nodes {
                n[v] += 1;
            }
        }
        n
    }

    /// Map from sorted node pair to side index.
    pub fn side_lookup(&self) -> HashMap<[usize; 2], usize> {
        self.sides
            .iter()
            .enumerate()
            .map(|(i, s)| (s.nodes, i))
            .collect()
    }
}

/// Two-triangle mesh of (-1,1)^2.
pub fn coarse_square() -> Triangulation {
    let nodes = vec![
        Point::new(-1.0, -1.0),
        Point::new(1.0, -1.0),
        Point::new(1.0, 1.0),
        Point::new(-1.0, 1.0),
    ];
    Triangulation::new(nodes, vec![[0, 1, 2], [0, 2, 3]]).expect("coarse square mesh is valid")
}

/// `level` red refinements of the two-triangle mesh of (-1,1)^2.
pub fn unit_square_mesh(level: usize) -> Result<Triangulation> {
    if level > MAX_LEVEL {
        return Err(FemError::Resource {
            level,
            limit: MAX_LEVEL,
        });
    }
    let mut mesh = coarse_square();
    for _ in 0..level {
        mesh = mesh.refine_uniform()?;
    }
    Ok(mesh)
}

/// Nominal mesh size 2^-level used by the experiment parameter policies.
pub fn nominal_h(level: usize) -> f64 {
    0.5f64.powi(level as i32)
}
