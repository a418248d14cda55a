use nalgebra::SymmetricEigen;

use super::{canonicalize, BasisMode, LaplacianMatrix, SpectralBasis};
use crate::error::{Error, Result};

pub const DEFAULT_DENSE_CEILING: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseOptions {
    /// Largest dimension decomposed without `allow_large`.
    pub ceiling: usize,
    pub allow_large: bool,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self {
            ceiling: DEFAULT_DENSE_CEILING,
            allow_large: false,
        }
    }
}

/// Working-set estimate: the dense input, the eigenvector output and a copy
/// held during sorting.
pub(crate) fn estimated_bytes(n: usize) -> u64 {
    3 * (n as u64) * (n as u64) * 8
}

/// Full symmetric eigendecomposition of the Laplacian.
pub fn eigendecompose_dense(laplacian: &LaplacianMatrix, options: DenseOptions) -> Result<SpectralBasis> {
    let n = laplacian.dimension();
    if n > options.ceiling {
        let gib = estimated_bytes(n) as f64 / (1u64 << 30) as f64;
        if !options.allow_large {
            return Err(Error::Resource(format!(
                "dense decomposition of {n} vertices exceeds the ceiling of {} \
                 (estimated {gib:.2} GiB); pass the large-problem override to proceed",
                options.ceiling
            )));
        }
        log::warn!("dense decomposition of {n} vertices, estimated {gib:.2} GiB");
    }
    let dense = laplacian.to_dense();
    let eig = SymmetricEigen::new(dense);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let (values, vectors) = canonicalize(values, eig.eigenvectors);
    Ok(SpectralBasis::from_solver(
        values,
        vectors,
        BasisMode::Full,
        laplacian.content_hash(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graph, make_icosphere, MeshGraph};
    use crate::spectral::build_laplacian;

    #[test]
    fn complete_graph_spectrum() {
        let l = build_laplacian(&MeshGraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]));
        let b = eigendecompose_dense(&l, DenseOptions::default()).unwrap();
        let ev = b.eigenvalues();
        assert!(ev[0].abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn path_graph_spectrum_and_vectors() {
        let l = build_laplacian(&MeshGraph::from_edges(3, [(0, 1), (1, 2)]));
        let b = eigendecompose_dense(&l, DenseOptions::default()).unwrap();
        let ev = b.eigenvalues();
        for (got, want) in ev.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let u = b.eigenvectors();
        let s3 = 1.0 / 3f64.sqrt();
        let s2 = 1.0 / 2f64.sqrt();
        let s6 = 1.0 / 6f64.sqrt();
        // Largest-magnitude entry positive; (1,0,-1) ties between rows 0 and 2, row 0 wins.
        let want = [[s3, s3, s3], [s2, 0.0, -s2], [-s6, 2.0 * s6, -s6]];
        for (f, col) in want.iter().enumerate() {
            for i in 0..3 {
                assert!((u[(i, f)] - col[i]).abs() < 1e-12, "freq {f} row {i}");
            }
        }
    }

    #[test]
    fn icosphere_level1_invariants() {
        let l = build_laplacian(&build_graph(&make_icosphere(1, 1.0).unwrap()));
        let b = eigendecompose_dense(&l, DenseOptions::default()).unwrap();
        let ev = b.eigenvalues();
        assert!(ev[0].abs() < 1e-10);
        assert!(ev[1] > 0.0);
        assert!((ev[1] - ev[3]).abs() < 1e-8);
        assert!(ev[4] - ev[3] > 1e-3);
        assert!(b.orthonormality_error() < 1e-8);
        assert!(b.max_residual(&l) < 1e-8);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ceiling_enforced() {
        let l = build_laplacian(&build_graph(&make_icosphere(1, 1.0).unwrap()));
        let opts = DenseOptions {
            ceiling: 10,
            allow_large: false,
        };
        assert!(matches!(eigendecompose_dense(&l, opts), Err(Error::Resource(_))));
        let opts = DenseOptions {
            ceiling: 10,
            allow_large: true,
        };
        assert!(eigendecompose_dense(&l, opts).is_ok());
    }
}
