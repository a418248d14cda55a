use std::collections::BTreeMap;

use super::TriangleMesh;

/// Unordered vertex pair stored as `(min, max)`.
pub type EdgeKey = (usize, usize);

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Undirected vertex graph of a mesh. Edges are deduplicated and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshGraph {
    vertex_count: usize,
    edges: Vec<EdgeKey>,
}

impl MeshGraph {
    /// Builds a graph from an arbitrary edge list; duplicates and orientation are normalized.
    /// Self loops and out-of-range endpoints are dropped.
    pub fn from_edges(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<EdgeKey> = edges
            .into_iter()
            .filter(|&(a, b)| a != b && a < vertex_count && b < vertex_count)
            .map(|(a, b)| edge_key(a, b))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Self {
            vertex_count,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

pub fn build_graph(mesh: &TriangleMesh) -> MeshGraph {
    let edges = mesh
        .faces()
        .iter()
        .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]);
    MeshGraph::from_edges(mesh.vertex_count(), edges)
}

/// Maps every undirected edge to the faces that contain it, in face order.
pub(crate) fn edge_faces(mesh: &TriangleMesh) -> BTreeMap<EdgeKey, Vec<usize>> {
    let mut map: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            map.entry(edge_key(f[k], f[(k + 1) % 3])).or_default().push(fi);
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_disc_fixture;

    fn quad() -> TriangleMesh {
        TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn triangle_and_shared_edge_counts() {
        let tri = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]])
            .unwrap();
        assert_eq!(build_graph(&tri).edge_count(), 3);
        assert_eq!(build_graph(&quad()).edge_count(), 5);
    }

    #[test]
    fn mano_topology_edge_count() {
        let m = make_disc_fixture(778, 1538, 16).unwrap();
        let g = build_graph(&m);
        // Independent count: Euler-free enumeration of face edges through a set.
        let mut set = std::collections::HashSet::new();
        for f in m.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(set.len(), 2315);
        assert_eq!(g.edge_count(), 2315);
    }

    #[test]
    fn face_order_invariance() {
        let m = make_disc_fixture(60, 100, 18).unwrap();
        let mut faces = m.faces().to_vec();
        faces.reverse();
        faces.rotate_left(7);
        let shuffled = TriangleMesh::new(m.vertices().to_vec(), faces).unwrap();
        assert_eq!(build_graph(&m), build_graph(&shuffled));
    }
}
