use crate::error::{Error, Result};
use crate::mesh::{build_graph, Point3, TriangleMesh};

/// Laplacian smoothing restricted to masked vertices. Each iteration moves every
/// masked vertex by `factor · (neighbour average − position)` using the
/// positions from the previous iteration.
pub fn masked_smooth(mesh: &TriangleMesh, mask: &[bool], iterations: usize, factor: f64) -> Result<TriangleMesh> {
    if mask.len() != mesh.vertex_count() {
        return Err(Error::argument(format!(
            "mask has {} entries for {} vertices",
            mask.len(),
            mesh.vertex_count()
        )));
    }
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::argument(format!("smoothing factor {factor} must lie in (0, 1]")));
    }
    let adjacency = build_graph(mesh).adjacency();
    let mut current: Vec<Point3> = mesh.vertices().to_vec();
    for _ in 0..iterations {
        let prev = current.clone();
        for (i, nbrs) in adjacency.iter().enumerate() {
            if !mask[i] || nbrs.is_empty() {
                continue;
            }
            let inv = 1.0 / nbrs.len() as f64;
            for k in 0..3 {
                let avg = nbrs.iter().map(|&j| prev[j][k]).sum::<f64>() * inv;
                current[i][k] = prev[i][k] + factor * (avg - prev[i][k]);
            }
        }
    }
    mesh.with_vertices(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;

    fn grid() -> TriangleMesh {
        let mut v = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                v.push([x as f64 * 1.5, y as f64 * 0.7 + (x * x) as f64 * 0.1, 2.0]);
            }
        }
        let mut f = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                let i = y * 4 + x;
                f.push([i, i + 1, i + 5]);
                f.push([i, i + 5, i + 4]);
            }
        }
        TriangleMesh::new(v, f).unwrap()
    }

    #[test]
    fn empty_mask_is_identity() {
        let m = make_icosphere(1, 2.0).unwrap();
        let out = masked_smooth(&m, &vec![false; m.vertex_count()], 5, 0.5).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn planar_vertices_stay_planar() {
        let m = grid();
        let mut mask = vec![false; 16];
        mask[5] = true;
        mask[6] = true;
        let out = masked_smooth(&m, &mask, 3, 0.7).unwrap();
        for (i, (p, q)) in out.vertices().iter().zip(m.vertices()).enumerate() {
            assert_eq!(p[2], 2.0);
            if !mask[i] {
                assert_eq!(p, q);
            }
        }
        assert_eq!(out.faces(), m.faces());
    }

    #[test]
    fn full_step_reaches_centroid() {
        let m = make_icosphere(1, 2.0).unwrap();
        let mut mask = vec![false; m.vertex_count()];
        mask[3] = true;
        let out = masked_smooth(&m, &mask, 1, 1.0).unwrap();
        let nbrs = &build_graph(&m).adjacency()[3];
        for k in 0..3 {
            let c = nbrs.iter().map(|&j| m.vertices()[j][k]).sum::<f64>() / nbrs.len() as f64;
            assert!((out.vertices()[3][k] - c).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_arguments() {
        let m = grid();
        assert!(masked_smooth(&m, &[true; 3], 1, 0.5).is_err());
        assert!(masked_smooth(&m, &[true; 16], 1, 0.0).is_err());
        assert!(masked_smooth(&m, &[true; 16], 1, 1.5).is_err());
    }
}
