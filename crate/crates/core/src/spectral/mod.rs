//! Graph Laplacian, eigendecomposition and the graph Fourier transform.
//!
//! Eigenvectors are stored as the columns of `U`, so `L = U Λ Uᵀ`, the
//! forward transform is `Uᵀ x` and the inverse is `U c`. Frequency `f` is
//! column `f` in ascending eigenvalue order.

mod cache;
mod dense;
mod krylov;
mod laplacian;
mod transform;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_basis, write_basis, BasisCache, CACHE_FORMAT_VERSION};
pub use dense::{eigendecompose_dense, DenseOptions, DEFAULT_DENSE_CEILING};
pub use krylov::{eigendecompose_partial, PartialOptions};
pub use laplacian::{build_laplacian, LaplacianMatrix};
pub use transform::{
    band_component, cumulative_reconstruction, gft, igft, spectrum_profile, write_spectrum_csv,
    SpectrumRow,
};

/// Whether a basis spans every frequency or only the lowest `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisMode {
    Full,
    Partial(usize),
}

/// Ascending Laplacian eigenvalues with column-orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    mode: BasisMode,
    laplacian_hash: String,
}

impl SpectralBasis {
    pub(crate) fn from_solver(
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        mode: BasisMode,
        laplacian_hash: String,
    ) -> Self {
        debug_assert_eq!(eigenvalues.len(), eigenvectors.ncols());
        Self {
            eigenvalues,
            eigenvectors,
            mode,
            laplacian_hash,
        }
    }

    /// Reassembles a basis from stored parts, checking shapes and ordering.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        mode: BasisMode,
        laplacian_hash: String,
    ) -> Result<Self> {
        let (n, k) = eigenvectors.shape();
        if eigenvalues.len() != k {
            return Err(Error::Format(format!(
                "{} eigenvalues for {k} eigenvectors",
                eigenvalues.len()
            )));
        }
        let expected = match mode {
            BasisMode::Full => n,
            BasisMode::Partial(p) => p,
        };
        if k != expected {
            return Err(Error::Format(format!(
                "mode {mode:?} expects {expected} eigenvectors, found {k}"
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("eigenvalues are not ascending".into()));
        }
        Ok(Self::from_solver(eigenvalues, eigenvectors, mode, laplacian_hash))
    }

    /// Number of graph vertices.
    pub fn dimension(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of retained frequencies.
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn is_full(&self) -> bool {
        self.mode == BasisMode::Full
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `N × k` matrix whose column `f` is the frequency-`f` eigenvector.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Hex SHA-256 of the Laplacian the basis was computed from.
    pub fn laplacian_hash(&self) -> &str {
        &self.laplacian_hash
    }

    /// `max |UᵀU - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.eigenvectors.tr_mul(&self.eigenvectors);
        let mut worst: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Largest `‖L u_i - λ_i u_i‖` over all pairs.
    pub fn max_residual(&self, laplacian: &LaplacianMatrix) -> f64 {
        let n = self.dimension();
        let mut lu = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let u = self.eigenvectors.column(i);
            laplacian.matrix().mul_vec(u.as_slice(), &mut lu);
            let r = lu
                .iter()
                .zip(u.iter())
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    pub(crate) fn require_full(&self, what: &str) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "{what} needs a full basis, got {:?}",
                self.mode
            )))
        }
    }

    pub(crate) fn check_signal(&self, signal: &DMatrix<f64>) -> Result<()> {
        if signal.nrows() != self.dimension() {
            return Err(Error::argument(format!(
                "signal has {} rows, basis dimension is {}",
                signal.nrows(),
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Per-frequency coefficients: row `f` is `U_fᵀ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub coefficients: DMatrix<f64>,
}

impl SpectralCoefficients {
    pub fn size(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Euclidean norm of coefficient row `f`.
    pub fn amplitude(&self, f: usize) -> f64 {
        self.coefficients.row(f).norm()
    }
}

/// Inclusive frequency index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub lo: usize,
    pub hi: usize,
}

impl Band {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::argument(format!("band [{lo},{hi}] has lo > hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, f: usize) -> bool {
        (self.lo..=self.hi).contains(&f)
    }

    pub fn check_within(&self, size: usize) -> Result<()> {
        if self.lo > self.hi || self.hi >= size {
            return Err(Error::argument(format!(
                "band [{},{}] does not fit a basis of {size} frequencies",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Flips each column so its largest-magnitude entry is positive (first index
/// wins ties) and orders pairs by ascending eigenvalue with a stable sort.
pub(crate) fn canonicalize(values: Vec<f64>, vectors: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let n = vectors.nrows();
    let mut out = DMatrix::zeros(n, order.len());
    let mut sorted = Vec::with_capacity(order.len());
    for (dst, &src) in order.iter().enumerate() {
        sorted.push(values[src]);
        let col = vectors.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[(i, dst)] = sign * col[i];
        }
    }
    (sorted, out)
}
