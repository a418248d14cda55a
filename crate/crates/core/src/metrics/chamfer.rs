use serde::{Deserialize, Serialize};

use super::surface::SurfaceIndex;
use crate::error::{Error, Result};
use crate::mesh::{Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChamferMode {
    #[default]
    VertexToVertex,
    VertexToSurface,
}

impl std::str::FromStr for ChamferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertex" | "vertex-to-vertex" => Ok(ChamferMode::VertexToVertex),
            "surface" | "vertex-to-surface" => Ok(ChamferMode::VertexToSurface),
            other => Err(Error::argument(format!("unknown chamfer mode `{other}`"))),
        }
    }
}

#[inline]
fn squared_distance(a: Point3, b: Point3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
struct KdNode {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// k-d tree over a point set for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<Point3>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

impl PointIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut index = Self { points: points.to_vec(), nodes: Vec::with_capacity(points.len()), root: None };
        let mut ids: Vec<usize> = (0..points.len()).collect();
        index.root = index.build(&mut ids);
        index
    }

    fn build(&mut self, ids: &mut [usize]) -> Option<usize> {
        if ids.is_empty() {
            return None;
        }
        let spread = |k: usize| {
            let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(self.points[i][k]), hi.max(self.points[i][k]))
            });
            hi - lo
        };
        let axis = (0..3).max_by(|&a, &b| spread(a).total_cmp(&spread(b))).unwrap();
        let mid = ids.len() / 2;
        let pts = &self.points;
        ids.select_nth_unstable_by(mid, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b)));
        let id = self.nodes.len();
        self.nodes.push(KdNode { point: ids[mid], axis, left: None, right: None });
        let (lo, rest) = ids.split_at_mut(mid);
        let left = self.build(lo);
        let right = self.build(&mut rest[1..]);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of and distance to the nearest point, `None` for an empty set.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        let root = self.root?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(root, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, id: usize, q: Point3, best: &mut (usize, f64)) {
        let node = &self.nodes[id];
        let p = self.points[node.point];
        let d = squared_distance(q, p);
        if d < best.1 || (d == best.1 && node.point < best.0) {
            *best = (node.point, d);
        }
        let delta = q[node.axis] - p[node.axis];
        let (near, far) = if delta < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        if let Some(n) = near {
            self.search(n, q, best);
        }
        if let Some(f) = far {
            if delta * delta <= best.1 {
                self.search(f, q, best);
            }
        }
    }
}

fn mean_nearest(from: &[Point3], to: &PointIndex) -> f64 {
    let sum: f64 = from.iter().map(|&p| to.nearest(p).map_or(0.0, |(_, d)| d)).sum();
    sum / from.len() as f64
}

fn mean_surface(from: &[Point3], to: &SurfaceIndex) -> f64 {
    let sum: f64 = from.iter().map(|&p| to.closest_point(p).distance).sum();
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: the average of both directed mean nearest
/// distances, in mesh units.
pub fn chamfer_distance(a: &TriangleMesh, b: &TriangleMesh, mode: ChamferMode) -> Result<f64> {
    if a.vertex_count() == 0 || b.vertex_count() == 0 {
        return Err(Error::argument("chamfer distance needs non-empty vertex sets"));
    }
    let (ab, ba) = match mode {
        ChamferMode::VertexToVertex => {
            let (ia, ib) = (PointIndex::new(a.vertices()), PointIndex::new(b.vertices()));
            (mean_nearest(a.vertices(), &ib), mean_nearest(b.vertices(), &ia))
        }
        ChamferMode::VertexToSurface => {
            let (ia, ib) = (SurfaceIndex::new(a)?, SurfaceIndex::new(b)?);
            (mean_surface(a.vertices(), &ib), mean_surface(b.vertices(), &ia))
        }
    };
    Ok((ab + ba) / 2.0)
}
