use sha2::{Digest, Sha256};

use crate::mesh::MeshGraph;
use crate::sparse::CsrMatrix;

/// Combinatorial Laplacian `L = D - A` with unit edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    matrix: CsrMatrix,
}

pub fn build_laplacian(graph: &MeshGraph) -> LaplacianMatrix {
    let n = graph.vertex_count();
    let degrees = graph.degrees();
    let mut triplets = Vec::with_capacity(n + 2 * graph.edge_count());
    for (i, &d) in degrees.iter().enumerate() {
        triplets.push((i, i, d as f64));
    }
    for &(a, b) in graph.edges() {
        triplets.push((a, b, -1.0));
        triplets.push((b, a, -1.0));
    }
    let matrix = CsrMatrix::from_triplets(n, n, triplets).expect("graph indices are in range");
    LaplacianMatrix { matrix }
}

impl LaplacianMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Largest diagonal entry (maximum vertex degree).
    pub fn max_degree(&self) -> f64 {
        (0..self.dimension())
            .map(|i| self.matrix.get(i, i))
            .fold(0.0, f64::max)
    }

    /// Gershgorin bound on the largest eigenvalue.
    pub fn spectral_bound(&self) -> f64 {
        2.0 * self.max_degree()
    }

    /// Lowercase hex SHA-256 over dimension, sparsity pattern and values.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"meshspectra-laplacian-v1");
        h.update((self.dimension() as u64).to_le_bytes());
        for &p in self.matrix.indptr() {
            h.update((p as u64).to_le_bytes());
        }
        for &c in self.matrix.indices() {
            h.update((c as u64).to_le_bytes());
        }
        for &v in self.matrix.values() {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        self.matrix.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graph, make_icosphere};

    fn path3() -> MeshGraph {
        MeshGraph::from_edges(3, [(0, 1), (1, 2)])
    }

    #[test]
    fn triangle_laplacian() {
        let l = build_laplacian(&MeshGraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.entry(i, j), if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn path_laplacian_rows() {
        let d = build_laplacian(&path3()).to_dense();
        let expected = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, j)], expected[i][j]);
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        let l = build_laplacian(&build_graph(&make_icosphere(2, 1.0).unwrap()));
        for i in 0..l.dimension() {
            assert_eq!(l.matrix().row_sum(i), 0.0);
            for (j, v) in l.matrix().row(i) {
                assert_eq!(v, l.entry(j, i));
                if i != j {
                    assert_eq!(v, -1.0);
                }
            }
        }
    }

    #[test]
    fn hash_depends_on_structure() {
        let a = build_laplacian(&path3());
        let b = build_laplacian(&MeshGraph::from_edges(3, [(0, 1), (0, 2)]));
        assert_eq!(a.content_hash(), build_laplacian(&path3()).content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
