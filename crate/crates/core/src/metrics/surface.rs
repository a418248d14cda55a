use crate::error::{Error, Result};
use crate::mesh::{Point3, TriangleMesh};

#[inline]
fn sub3(a: Point3, b: Point3) -> Point3 {
    crate::util::sub3(&a, &b)
}

#[inline]
fn dot3(a: Point3, b: Point3) -> f64 {
    crate::util::dot3(&a, &b)
}

fn add_scaled(a: Point3, b: Point3, s: f64) -> Point3 {
    [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s]
}

fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub3(a, b);
    dot3(d, d)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ap = sub3(p, a);
    let d1 = dot3(ab, ap);
    let d2 = dot3(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub3(p, b);
    let d3 = dot3(ab, bp);
    let d4 = dot3(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add_scaled(a, ab, d1 / (d1 - d3));
    }
    let cp = sub3(p, c);
    let d5 = dot3(ab, cp);
    let d6 = dot3(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add_scaled(a, ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add_scaled(b, sub3(c, b), w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add_scaled(add_scaled(a, ab, v), ac, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Point3,
    pub distance: f64,
    pub face: usize,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3,
    max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] }
    }

    fn grow(&mut self, p: Point3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    fn dist2(&self, p: Point3) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.min[k] - p[k]).max(p[k] - self.max[k]).max(0.0);
                d * d
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over the faces of a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    triangles: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.face_count() == 0 {
            return Err(Error::argument("surface queries need a mesh with at least one face"));
        }
        let v = mesh.vertices();
        let triangles: Vec<[Point3; 3]> = mesh.faces().iter().map(|f| [v[f[0]], v[f[1]], v[f[2]]]).collect();
        let centroids: Vec<Point3> = triangles
            .iter()
            .map(|t| std::array::from_fn(|k| (t[0][k] + t[1][k] + t[2][k]) / 3.0))
            .collect();
        let mut index = Self { order: (0..triangles.len()).collect(), triangles, nodes: Vec::new() };
        let n = index.order.len();
        index.build(&centroids, 0, n);
        Ok(index)
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    fn build(&mut self, centroids: &[Point3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &f in &self.order[start..end] {
            for p in self.triangles[f] {
                bounds.grow(p);
            }
            cbounds.grow(centroids[f]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| {
                (cbounds.max[a] - cbounds.min[a]).total_cmp(&(cbounds.max[b] - cbounds.min[b]))
            })
            .unwrap();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Nearest point on any face. Ties go to the lowest face index.
    pub fn closest_point(&self, p: Point3) -> SurfaceHit {
        let mut best = (f64::INFINITY, usize::MAX, p);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().dist2(p) > best.0 {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[start..end] {
                        let [a, b, c] = self.triangles[f];
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d = dist2(p, q);
                        if d < best.0 || (d == best.0 && f < best.1) {
                            best = (d, f, q);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().dist2(p);
                    let dr = self.nodes[right].bounds().dist2(p);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        SurfaceHit { point: best.2, distance: best.0.sqrt(), face: best.1 }
    }
}

pub fn closest_point_on_surface(point: Point3, index: &SurfaceIndex) -> SurfaceHit {
    index.closest_point(point)
}

/// Moves every template vertex to its closest point on `target`, keeping the
/// template connectivity.
pub fn snap_to_surface(template: &TriangleMesh, target: &TriangleMesh) -> Result<TriangleMesh> {
    let index = SurfaceIndex::new(target)?;
    let snapped = template.vertices().iter().map(|&p| index.closest_point(p).point).collect();
    template.with_vertices(snapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm3(v: Point3) -> f64 {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    fn exhaustive(mesh: &TriangleMesh, p: Point3) -> f64 {
        let v = mesh.vertices();
        mesh.faces()
            .iter()
            .map(|f| norm3(sub3(p, closest_point_on_triangle(p, v[f[0]], v[f[1]], v[f[2]]))))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn triangle_regions() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]);
        assert_eq!(closest_point_on_triangle([0.5, 0.5, 3.0], a, b, c), [0.5, 0.5, 0.0]);
        assert_eq!(closest_point_on_triangle([-1.0, -1.0, 0.0], a, b, c), a);
        assert_eq!(closest_point_on_triangle([3.0, -1.0, 0.0], a, b, c), b);
        assert_eq!(closest_point_on_triangle([1.0, -1.0, 1.0], a, b, c), [1.0, 0.0, 0.0]);
        let q = closest_point_on_triangle([2.0, 2.0, 0.0], a, b, c);
        assert!((q[0] - 1.0).abs() < 1e-15 && (q[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vertex_and_projection_queries() {
        let m = make_icosphere(2, 10.0).unwrap();
        let idx = SurfaceIndex::new(&m).unwrap();
        let p = m.vertices()[17];
        let hit = idx.closest_point(p);
        assert_eq!(hit.distance, 0.0);
        assert_eq!(hit.point, p);
        // Above a face centroid along its normal.
        let f = m.faces()[33];
        let v = m.vertices();
        let cen: Point3 = std::array::from_fn(|k| (v[f[0]][k] + v[f[1]][k] + v[f[2]][k]) / 3.0);
        let n = {
            let (e1, e2) = (sub3(v[f[1]], v[f[0]]), sub3(v[f[2]], v[f[0]]));
            let c = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
            let len = norm3(c);
            [c[0] / len, c[1] / len, c[2] / len]
        };
        let out = add_scaled(cen, n, 0.1);
        let hit = idx.closest_point(out);
        assert_eq!(hit.face, 33);
        assert!(norm3(sub3(hit.point, cen)) < 1e-9);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let m = make_icosphere(3, 5.0).unwrap();
        let idx = SurfaceIndex::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p: Point3 = std::array::from_fn(|_| rng.random_range(-8.0..8.0));
            let hit = idx.closest_point(p);
            assert!((hit.distance - exhaustive(&m, p)).abs() < 1e-9);
            let min_vertex = m.vertices().iter().map(|&v| norm3(sub3(p, v))).fold(f64::INFINITY, f64::min);
            assert!(hit.distance <= min_vertex + 1e-12);
        }
    }

    #[test]
    fn snapping_examples() {
        let fine = make_icosphere(4, 10.0).unwrap();
        assert_eq!(snap_to_surface(&fine, &fine).unwrap(), fine);

        let coarse = make_icosphere(1, 10.0).unwrap();
        let snapped = snap_to_surface(&coarse, &fine).unwrap();
        assert_eq!(snapped.faces(), coarse.faces());
        // Coarse vertices sit on the sphere; the nearest facet lies at most one
        // sagitta inside. Edge length of a level-4 icosphere is below 0.7.
        let max_edge: f64 = fine
            .faces()
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| norm3(sub3(fine.vertices()[a], fine.vertices()[b])))
            .fold(0.0, f64::max);
        let sagitta = 10.0 - (100.0 - max_edge * max_edge / 3.0).sqrt();
        for p in snapped.vertices() {
            assert!((norm3(*p) - 10.0).abs() <= sagitta + 1e-12);
        }
        let idx = SurfaceIndex::new(&fine).unwrap();
        for p in snapped.vertices() {
            assert!(idx.closest_point(*p).distance < 1e-9);
        }
    }

    #[test]
    fn faceless_mesh_rejected() {
        let pts = TriangleMesh::from_points(vec![[0.0; 3]]);
        assert!(SurfaceIndex::new(&pts).is_err());
    }
}
