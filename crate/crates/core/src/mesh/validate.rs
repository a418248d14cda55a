use serde::{Deserialize, Serialize};

use super::graph::edge_faces;
use super::TriangleMesh;

/// Topological summary of a mesh. Non-manifold edges are reported, not rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub euler_characteristic: i64,
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
    pub connected_component_count: usize,
}

impl ValidationReport {
    pub fn is_manifold(&self) -> bool {
        self.non_manifold_edge_count == 0
    }
}

pub fn validate(mesh: &TriangleMesh) -> ValidationReport {
    let incidence = edge_faces(mesh);
    let mut boundary = 0;
    let mut non_manifold = 0;
    for faces in incidence.values() {
        match faces.len() {
            1 => boundary += 1,
            2 => {}
            _ => non_manifold += 1,
        }
    }

    let n = mesh.vertex_count();
    let mut dsu = DisjointSet::new(n);
    for &(a, b) in incidence.keys() {
        dsu.union(a, b);
    }
    let components = (0..n).filter(|&i| dsu.find(i) == i).count();

    let euler = n as i64 - incidence.len() as i64 + mesh.face_count() as i64;
    if non_manifold > 0 {
        log::warn!("mesh has {non_manifold} non-manifold edges");
    }
    ValidationReport {
        euler_characteristic: euler,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
        connected_component_count: components,
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so the representative set is deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_disc_fixture, make_icosphere};

    #[test]
    fn single_triangle() {
        let m = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]])
            .unwrap();
        let r = validate(&m);
        assert_eq!(r.euler_characteristic, 1);
        assert_eq!(r.boundary_edge_count, 3);
        assert_eq!(r.connected_component_count, 1);
    }

    #[test]
    fn icosahedron_is_closed_sphere() {
        let r = validate(&make_icosphere(0, 1.0).unwrap());
        assert_eq!(r.euler_characteristic, 2);
        assert_eq!(r.boundary_edge_count, 0);
        assert_eq!(r.non_manifold_edge_count, 0);
    }

    #[test]
    fn mano_topology_counts() {
        let r = validate(&make_disc_fixture(778, 1538, 16).unwrap());
        assert_eq!(r.euler_characteristic, 1);
        assert_eq!(r.boundary_edge_count, 16);
        assert_eq!(r.non_manifold_edge_count, 0);
        assert_eq!(r.connected_component_count, 1);
    }

    #[test]
    fn non_manifold_fan_is_reported() {
        // Three triangles sharing edge (0,1).
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        let r = validate(&m);
        assert_eq!(r.non_manifold_edge_count, 1);
        assert!(!r.is_manifold());
    }

    #[test]
    fn isolated_vertices_are_components() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(validate(&m).connected_component_count, 2);
    }

    #[test]
    fn report_json_field_names() {
        let r = validate(&make_icosphere(0, 1.0).unwrap());
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        for key in [
            "euler_characteristic",
            "boundary_edge_count",
            "non_manifold_edge_count",
            "connected_component_count",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
