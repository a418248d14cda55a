//! Deterministic fixture meshes.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::graph::edge_key;
use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};
use crate::util::{splitmix64, unit_from_hash};

pub const MAX_ICOSPHERE_LEVEL: usize = 5;

/// Geodesic sphere: icosahedron split `level` times (1 -> 4), projected to `radius`.
pub fn make_icosphere(level: usize, radius: f64) -> Result<TriangleMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::Resource(format!(
            "icosphere level {level} exceeds the maximum of {MAX_ICOSPHERE_LEVEL}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::argument(format!("radius must be positive, got {radius}")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for p in &mut verts {
        *p = project(*p, 1.0);
    }
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                mid[k] = *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                    let (pa, pb) = (verts[a], verts[b]);
                    verts.push(project(
                        [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0],
                        1.0,
                    ));
                    verts.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    for p in &mut verts {
        *p = project(*p, radius);
    }
    TriangleMesh::new(verts, faces)
}

fn project(p: Point3, radius: f64) -> Point3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let s = radius / n;
    [p[0] * s, p[1] * s, p[2] * s]
}

/// Cap radius of the disc fixture before anisotropic scaling, mm.
const DISC_RADIUS: f64 = 40.0;
/// Axis scales that turn the spherical cap into an elongated, flattened bag.
const DISC_SCALE: [f64; 3] = [1.0, 0.5, 1.8];
/// Half-width of the deterministic radial surface detail, mm.
const DISC_DETAIL: f64 = 0.45;

/// Disc-topology triangulation with exactly the requested vertex, face and
/// boundary-edge counts.
///
/// The surface is a closed bag with a single opening: rings of vertices at
/// increasing polar angle on a sphere, an apex vertex at the top and the
/// boundary loop as the last ring. Adjacent rings are stitched by an
/// angle-ordered strip, which yields `a + b` triangles between rings of `a`
/// and `b` vertices. A disc triangulation always has `F = 2V - B - 2`, so
/// that is the feasibility condition.
pub fn make_disc_fixture(
    target_vertices: usize,
    target_faces: usize,
    target_boundary: usize,
) -> Result<TriangleMesh> {
    let (v, f, b) = (target_vertices, target_faces, target_boundary);
    if b < 3 || v < b {
        return Err(Error::argument(format!(
            "need at least 3 boundary vertices and V >= B (got V={v}, B={b})"
        )));
    }
    if 2 * v < b + 2 || f != 2 * v - b - 2 {
        return Err(Error::argument(format!(
            "counts V={v}, F={f}, B={b} do not describe a disc (need F = 2V - B - 2 = {})",
            (2 * v).saturating_sub(b + 2)
        )));
    }

    let interior = v - b;
    let rings = ring_sizes(v, b, interior);
    let mut vertices = Vec::with_capacity(v);
    let mut faces = Vec::with_capacity(f);

    if interior == 0 {
        // Flat polygon, fan from the first vertex.
        for j in 0..b {
            let phi = 2.0 * PI * j as f64 / b as f64;
            vertices.push([DISC_RADIUS * phi.cos(), DISC_RADIUS * phi.sin(), 0.0]);
        }
        for k in 1..b - 1 {
            faces.push([0, k, k + 1]);
        }
        return TriangleMesh::new(vertices, faces);
    }

    let sizes: Vec<usize> = rings.iter().map(|r| r.0).collect();
    let ring_count = sizes.len();
    let theta_max = opening_angle(v, b);
    let mut starts = Vec::with_capacity(ring_count);
    let mut angles: Vec<Vec<f64>> = Vec::with_capacity(ring_count);
    for (k, &(n, offset)) in rings.iter().enumerate() {
        starts.push(vertices.len());
        let theta = if n == 1 {
            0.0
        } else {
            // Ring 0 sits at a small polar angle when there is no apex vertex.
            let first = if sizes[0] == 1 { 0.0 } else { 0.5 };
            theta_max * (k as f64 + first) / (ring_count as f64 - 1.0 + first)
        };
        let mut ring_angles = Vec::with_capacity(n);
        for j in 0..n {
            let phi = 2.0 * PI * (j as f64 + offset) / n as f64;
            ring_angles.push(phi);
            let id = vertices.len() as u64;
            let detail = if k + 1 == ring_count {
                0.0
            } else {
                DISC_DETAIL * (2.0 * unit_from_hash(splitmix64(id ^ 0x5EED)) - 1.0)
            };
            let r = DISC_RADIUS + detail;
            let unit = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            vertices.push([
                DISC_SCALE[0] * r * unit[0],
                DISC_SCALE[1] * r * unit[1],
                DISC_SCALE[2] * r * unit[2],
            ]);
        }
        angles.push(ring_angles);
    }

    match sizes[0] {
        1 => {
            let (apex, r1, n1) = (starts[0], starts[1], sizes[1]);
            for j in 0..n1 {
                faces.push([apex, r1 + j, r1 + (j + 1) % n1]);
            }
        }
        2 => {}
        n0 => {
            for k in 1..n0 - 1 {
                faces.push([starts[0], starts[0] + k, starts[0] + k + 1]);
            }
        }
    }
    let first_strip = usize::from(sizes[0] == 1);
    for k in first_strip..ring_count - 1 {
        stitch_rings(
            (starts[k], &angles[k]),
            (starts[k + 1], &angles[k + 1]),
            &mut faces,
        );
    }
    debug_assert_eq!(vertices.len(), v);
    debug_assert_eq!(faces.len(), f);
    TriangleMesh::new(vertices, faces)
}

/// Polar angle of the opening so that the boundary ring spacing roughly
/// matches the interior spacing.
fn opening_angle(v: usize, b: usize) -> f64 {
    let spacing = (4.0 * PI / v as f64).sqrt();
    let s = (b as f64 * spacing / (2.0 * PI)).min(1.0);
    PI - s.asin()
}

/// Ring sizes (with angular offsets in units of the ring's own spacing), innermost first,
/// boundary last.
fn ring_sizes(v: usize, b: usize, interior: usize) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = match interior {
        0 => Vec::new(),
        1..=3 => vec![interior],
        _ => {
            let spacing = (4.0 * PI / v as f64).sqrt();
            let theta_max = opening_angle(v, b);
            let wanted = ((theta_max / spacing).round() as usize).saturating_sub(1).max(1);
            let middle = wanted.min((interior - 1) / 3);
            let weights: Vec<f64> = (1..=middle)
                .map(|k| (theta_max * k as f64 / (middle as f64 + 1.0)).sin())
                .collect();
            let mut sizes = vec![1];
            sizes.extend(apportion(interior - 1, &weights, 3));
            sizes
        }
    };
    sizes.push(b);
    sizes
        .into_iter()
        .enumerate()
        .map(|(k, n)| (n, if k % 2 == 0 { 0.0 } else { 0.5 }))
        .collect()
}

/// Largest-remainder apportionment of `total` over `weights`, each share at least `min`.
fn apportion(total: usize, weights: &[f64], min: usize) -> Vec<usize> {
    let extra = total - min * weights.len();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| extra as f64 * w / sum).collect();
    let mut shares: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = extra - shares.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        shares[i] += 1;
        left -= 1;
    }
    shares.into_iter().map(|s| s + min).collect()
}

/// Triangulates the band between an inner and an outer ring by merging the
/// two angle sequences. Emits `inner.len() + outer.len()` triangles.
fn stitch_rings(inner: (usize, &[f64]), outer: (usize, &[f64]), faces: &mut Vec<[usize; 3]>) {
    let (ia, a_angles) = inner;
    let (ib, b_angles) = outer;
    let (a, b) = (a_angles.len(), b_angles.len());
    let next_angle = |angles: &[f64], i: usize| {
        let n = angles.len();
        angles[(i + 1) % n] + if i + 1 >= n { 2.0 * PI } else { 0.0 }
    };
    let (mut i, mut j) = (0, 0);
    while i < a || j < b {
        let advance_inner = if j == b {
            true
        } else if i == a {
            false
        } else {
            next_angle(a_angles, i) < next_angle(b_angles, j)
        };
        let ai = ia + i % a;
        let bj = ib + j % b;
        if advance_inner {
            faces.push([ai, bj, ia + (i + 1) % a]);
            i += 1;
        } else {
            faces.push([ai, bj, ib + (j + 1) % b]);
            j += 1;
        }
    }
}
