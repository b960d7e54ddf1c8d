use nalgebra::DMatrix;

use crate::error::{check_dim, Result, TksdError};

/// Norm order used by balls and distance functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpNorm {
    L1,
    L2,
}

impl LpNorm {
    pub fn from_order(p: u32) -> Result<Self> {
        match p {
            1 => Ok(LpNorm::L1),
            2 => Ok(LpNorm::L2),
            _ => Err(TksdError::InvalidInput(format!(
                "only l1 and l2 norms are supported, got p = {p}"
            ))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            LpNorm::L1 => 1,
            LpNorm::L2 => 2,
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            LpNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            LpNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpBall {
    norm: LpNorm,
    radius: f64,
    center: Vec<f64>,
}

impl LpBall {
    pub fn new(norm: LpNorm, radius: f64, center: Vec<f64>) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(TksdError::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(TksdError::InvalidInput(
                "ball center must be a non-empty finite vector".into(),
            ));
        }
        Ok(Self {
            norm,
            radius,
            center,
        })
    }

    /// Ball of radius `radius` centred at the origin of `R^dim`.
    pub fn centered(norm: LpNorm, radius: f64, dim: usize) -> Result<Self> {
        Self::new(norm, radius, vec![0.0; dim])
    }

    pub fn norm(&self) -> LpNorm {
        self.norm
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `|x - c|_p`.
    pub fn offset_norm(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.norm.norm(&diff)
    }
}

/// Simple closed polygon in the plane. The last vertex connects to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let k = vertices.len();
        if k < 3 {
            return Err(TksdError::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {k}"
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TksdError::InvalidInput(
                "polygon vertices must be finite".into(),
            ));
        }
        for i in 0..k {
            if vertices[i] == vertices[(i + 1) % k] {
                return Err(TksdError::InvalidInput(format!(
                    "consecutive vertices {i} and {} coincide",
                    (i + 1) % k
                )));
            }
        }
        let poly = Self { vertices };
        if let Some((a, b)) = poly.find_self_intersection() {
            return Err(TksdError::InvalidInput(format!(
                "polygon is not simple: edges {a} and {b} intersect"
            )));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let k = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % k])
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.edge_lengths().iter().sum()
    }

    /// Even-odd ray casting; points on an edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let k = self.vertices.len();
        let mut inside = false;
        for i in 0..k {
            let (a, b) = self.edge(i);
            if on_segment(a, b, p) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        (0..self.num_edges())
            .map(|i| {
                let (a, b) = self.edge(i);
                segment_distance(a, b, p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let k = self.vertices.len();
        for i in 0..k {
            let (a, b) = self.edge(i);
            for j in (i + 1)..k {
                let (c, d) = self.edge(j);
                let adjacent = j == i + 1 || (i == 0 && j == k - 1);
                if adjacent {
                    // Shared vertex only; collinear backtracking is an overlap.
                    let shared = if j == i + 1 { b } else { a };
                    let (other_i, other_j) = if j == i + 1 { (a, d) } else { (b, c) };
                    if cross(shared, other_i, other_j) == 0.0
                        && (on_segment(shared, other_i, other_j)
                            || on_segment(shared, other_j, other_i))
                    {
                        return Some((i, j));
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    cross(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

pub(crate) fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let t = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
    let (qx, qy) = (a[0] + t * ex, a[1] + t * ey);
    (p[0] - qx).hypot(p[1] - qy)
}

/// Truncation region `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    LpBall(LpBall),
    Polygon(Polygon2D),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::LpBall(b) => b.dim(),
            Domain::Polygon(_) => 2,
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            Domain::LpBall(b) => b.offset_norm(x) <= b.radius,
            Domain::Polygon(p) => p.contains([x[0], x[1]]),
        })
    }

    /// Distance from `x` to the boundary set: `| |x-c|_p - r |` for balls,
    /// Euclidean distance to the polyline for polygons.
    pub fn boundary_gap(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            Domain::LpBall(b) => (b.offset_norm(x) - b.radius).abs(),
            Domain::Polygon(p) => p.distance_to_boundary([x[0], x[1]]),
        })
    }

    fn scale(&self) -> f64 {
        match self {
            Domain::LpBall(b) => b.radius,
            Domain::Polygon(p) => p
                .vertices
                .iter()
                .flatten()
                .fold(0.0f64, |acc, v| acc.max(v.abs())),
        }
    }
}

impl From<LpBall> for Domain {
    fn from(b: LpBall) -> Self {
        Domain::LpBall(b)
    }
}

impl From<Polygon2D> for Domain {
    fn from(p: Polygon2D) -> Self {
        Domain::Polygon(p)
    }
}

/// Finite point set standing in for the boundary of `V`.
#[derive(Debug, Clone)]
pub struct BoundarySample {
    points: DMatrix<f64>,
    source: Option<Domain>,
}

impl BoundarySample {
    /// Wrap `points` (one per row). When `source` is given every row must lie
    /// on its boundary within `1e-9 * (1 + scale)`.
    pub fn new(points: DMatrix<f64>, source: Option<Domain>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(TksdError::InvalidInput(
                "boundary sample must contain at least one point".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(TksdError::InvalidInput(
                "boundary points must be finite".into(),
            ));
        }
        if let Some(dom) = &source {
            check_dim(dom.dim(), points.ncols())?;
            let tol = 1e-9 * (1.0 + dom.scale());
            for i in 0..points.nrows() {
                let row: Vec<f64> = points.row(i).iter().copied().collect();
                let gap = dom.boundary_gap(&row)?;
                if gap > tol {
                    return Err(TksdError::InvalidInput(format!(
                        "boundary point {i} is {gap:e} away from the domain boundary"
                    )));
                }
            }
        }
        Ok(Self { points, source })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn source(&self) -> Option<&Domain> {
        self.source.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        self.points.row(j).iter().copied().collect()
    }
}
