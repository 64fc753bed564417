//! Gauss–Legendre rules on the supported domains.
//!
//! Interior rules are tensor products of the 1D rule over axis-aligned
//! rectangular patches; the L-shape is the union of three unit squares.
//! Boundary rules carry one mapped 1D rule per straight edge together with
//! the constant outward normal of that edge. Boundary nodes are open Gauss
//! points, so corners are never nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { ax: f64, bx: f64, ay: f64, by: f64 },
    /// `(-1,1)^2` with the quadrant `[0,1)^2` removed.
    LShape,
}

/// Axis-aligned rectangle `[x0,x1] x [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Patch {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Straight boundary edge with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub normal: [f64; 2],
}

impl Edge {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn point_at(&self, s: f64) -> [f64; 2] {
        [
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        ]
    }
}

const LSHAPE_PATCHES: [Patch; 3] = [
    Patch { x0: -1.0, x1: 0.0, y0: -1.0, y1: 0.0 },
    Patch { x0: -1.0, x1: 0.0, y0: 0.0, y1: 1.0 },
    Patch { x0: 0.0, x1: 1.0, y0: -1.0, y1: 0.0 },
];

const LSHAPE_EDGES: [Edge; 6] = [
    Edge { start: [-1.0, -1.0], end: [1.0, -1.0], normal: [0.0, -1.0] },
    Edge { start: [1.0, -1.0], end: [1.0, 0.0], normal: [1.0, 0.0] },
    // reentrant corner edges
    Edge { start: [1.0, 0.0], end: [0.0, 0.0], normal: [0.0, 1.0] },
    Edge { start: [0.0, 0.0], end: [0.0, 1.0], normal: [1.0, 0.0] },
    Edge { start: [0.0, 1.0], end: [-1.0, 1.0], normal: [0.0, 1.0] },
    Edge { start: [-1.0, 1.0], end: [-1.0, -1.0], normal: [-1.0, 0.0] },
];

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        let d = Domain::Box { ax, bx, ay, by };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Domain::Box { ax, bx, ay, by } => {
                [ax, bx, ay, by].iter().all(|v| v.is_finite()) && ax < bx && ay < by
            }
            Domain::LShape => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("{self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { ax, bx, ay, by } => (bx - ax) * (by - ay),
            Domain::LShape => 3.0,
        }
    }

    /// Measure of the boundary; two unit-weight points in 1D.
    pub fn boundary_measure(&self) -> f64 {
        match self {
            Domain::Interval { .. } => 2.0,
            _ => self.edges().iter().map(Edge::length).sum(),
        }
    }

    /// Rectangular patches whose union is the (2D) domain.
    pub fn patches(&self) -> Vec<Patch> {
        match *self {
            Domain::Interval { .. } => Vec::new(),
            Domain::Box { ax, bx, ay, by } => vec![Patch { x0: ax, x1: bx, y0: ay, y1: by }],
            Domain::LShape => LSHAPE_PATCHES.to_vec(),
        }
    }

    /// Boundary edges, counter-clockwise, with outward normals.
    pub fn edges(&self) -> Vec<Edge> {
        match *self {
            Domain::Interval { .. } => Vec::new(),
            Domain::Box { ax, bx, ay, by } => vec![
                Edge { start: [ax, ay], end: [bx, ay], normal: [0.0, -1.0] },
                Edge { start: [bx, ay], end: [bx, by], normal: [1.0, 0.0] },
                Edge { start: [bx, by], end: [ax, by], normal: [0.0, 1.0] },
                Edge { start: [ax, by], end: [ax, ay], normal: [-1.0, 0.0] },
            ],
            Domain::LShape => LSHAPE_EDGES.to_vec(),
        }
    }

    /// Closed-domain membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Interval { a, b } => x.len() == 1 && x[0] >= a && x[0] <= b,
            _ => x.len() == 2 && self.patches().iter().any(|p| p.contains(x[0], x[1])),
        }
    }

    /// Axis-aligned bounding box as `(lower, upper)` corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Domain::Interval { a, b } => (vec![a], vec![b]),
            Domain::Box { ax, bx, ay, by } => (vec![ax, ay], vec![bx, by]),
            Domain::LShape => (vec![-1.0, -1.0], vec![1.0, 1.0]),
        }
    }

    /// Short human-readable tag used in file names and manifests.
    pub fn tag(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Box { .. } => "box",
            Domain::LShape => "lshape",
        }
    }
}

/// A set of points in `R^dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet { dim, coords: Vec::new() }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
        }
        Ok(PointSet { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

/// Interior and boundary quadrature on a domain.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub domain: Domain,
    pub order: usize,
    pub interior_nodes: PointSet,
    pub interior_weights: Vec<f64>,
    pub boundary_nodes: PointSet,
    pub boundary_weights: Vec<f64>,
    pub boundary_normals: PointSet,
}

impl QuadratureRule {
    /// Builds interior and boundary parts with `order` Gauss points per axis
    /// (interior, per patch) and per edge (boundary).
    pub fn new(domain: Domain, order: usize) -> Result<Self> {
        let (interior_nodes, interior_weights) = build_interior_rule(&domain, order)?;
        let (boundary_nodes, boundary_weights, boundary_normals) =
            build_boundary_rule(&domain, order)?;
        Ok(QuadratureRule {
            domain,
            order,
            interior_nodes,
            interior_weights,
            boundary_nodes,
            boundary_weights,
            boundary_normals,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_weights.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_weights.len()
    }

    /// `sum_i w_i h(x_i)` over the interior nodes.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, h: F) -> f64 {
        self.interior_nodes
            .iter()
            .zip(&self.interior_weights)
            .map(|(x, w)| w * h(x))
            .sum()
    }

    /// `sum_i w_i h(x_i, n_i)` over the boundary nodes.
    pub fn integrate_boundary<F: Fn(&[f64], &[f64]) -> f64>(&self, h: F) -> f64 {
        self.boundary_nodes
            .iter()
            .zip(self.boundary_normals.iter())
            .zip(&self.boundary_weights)
            .map(|((x, n), w)| w * h(x, n))
            .sum()
    }
}

/// Evaluates `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights on `(-1, 1)`.
pub fn gauss_legendre_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::QuadratureOrder { min: 1, got: 0 });
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Roots come in +/- pairs; solve for the positive half and mirror.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        // Refresh the derivative at the converged root for the weight.
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Gauss–Legendre rule affinely mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre_1d(n)?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok((
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| half * v).collect(),
    ))
}

/// Interior nodes and weights: mapped 1D rule, or tensor rules over patches.
pub fn build_interior_rule(domain: &Domain, order: usize) -> Result<(PointSet, Vec<f64>)> {
    if order < 2 {
        return Err(Error::QuadratureOrder { min: 2, got: order });
    }
    domain.validate()?;
    match *domain {
        Domain::Interval { a, b } => {
            let (x, w) = gauss_legendre_on(order, a, b)?;
            Ok((PointSet::from_flat(1, x)?, w))
        }
        _ => {
            let mut nodes = PointSet::new(2);
            let mut weights = Vec::new();
            for patch in domain.patches() {
                let (xs, wx) = gauss_legendre_on(order, patch.x0, patch.x1)?;
                let (ys, wy) = gauss_legendre_on(order, patch.y0, patch.y1)?;
                for (x, wxi) in xs.iter().zip(&wx) {
                    for (y, wyj) in ys.iter().zip(&wy) {
                        nodes.push(&[*x, *y]);
                        weights.push(wxi * wyj);
                    }
                }
            }
            Ok((nodes, weights))
        }
    }
}

/// Boundary nodes, weights (surface measure) and outward normals.
pub fn build_boundary_rule(
    domain: &Domain,
    order: usize,
) -> Result<(PointSet, Vec<f64>, PointSet)> {
    if order < 2 {
        return Err(Error::QuadratureOrder { min: 2, got: order });
    }
    domain.validate()?;
    match *domain {
        Domain::Interval { a, b } => Ok((
            PointSet::from_flat(1, vec![a, b])?,
            vec![1.0, 1.0],
            PointSet::from_flat(1, vec![-1.0, 1.0])?,
        )),
        _ => {
            let (s, w) = gauss_legendre_on(order, 0.0, 1.0)?;
            let mut nodes = PointSet::new(2);
            let mut normals = PointSet::new(2);
            let mut weights = Vec::new();
            for edge in domain.edges() {
                let len = edge.length();
                for (si, wi) in s.iter().zip(&w) {
                    nodes.push(&edge.point_at(*si));
                    normals.push(&edge.normal);
                    weights.push(wi * len);
                }
            }
            Ok((nodes, weights, normals))
        }
    }
}
