//! Partial spectrum of the Laplacian by restarted block Krylov iteration.
//!
//! The search space is grown with a shift-and-invert operator
//! `(L + σI)⁻¹`, applied approximately by conjugate gradients, so the
//! smallest eigenvalues of `L` become the dominant ones. Every new block is
//! reorthogonalized against the full basis and all locked vectors (two
//! Gram-Schmidt passes). Ritz pairs are always extracted with the exact `L`
//! (Rayleigh-Ritz on `QᵀLQ`), so the inexact inner solves only affect the
//! quality of the subspace, never the accuracy of the reported pairs.
//! Converged pairs are locked in ascending order and the next cycle restarts
//! from the leading unconverged Ritz vectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonicalize, BasisMode, LaplacianMatrix, SpectralBasis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialOptions {
    /// Vectors per Krylov block. Must exceed the largest eigenvalue multiplicity of interest.
    pub block_size: usize,
    /// Convergence threshold on `‖Lu - λu‖`, relative to `max(1, ‖L‖)`.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Shift of the inverted operator.
    pub shift: f64,
}

impl Default for PartialOptions {
    fn default() -> Self {
        Self {
            block_size: 8,
            tolerance: 1e-10,
            max_restarts: 60,
            shift: 1e-2,
        }
    }
}

/// The `k` algebraically smallest eigenpairs.
pub fn eigendecompose_partial(
    laplacian: &LaplacianMatrix,
    k: usize,
    seed: u64,
    options: PartialOptions,
) -> Result<SpectralBasis> {
    let n = laplacian.dimension();
    if k == 0 || k >= n {
        return Err(Error::argument(format!(
            "partial decomposition needs 1 <= k < {n}, got k = {k}"
        )));
    }
    if options.block_size == 0 || options.shift <= 0.0 {
        return Err(Error::argument("block size and shift must be positive"));
    }
    let norm = laplacian.spectral_bound().max(1.0);
    let tol = options.tolerance * norm;
    let b = options.block_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = Operator {
        laplacian,
        shift: options.shift,
    };

    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_values: Vec<f64> = Vec::new();
    let mut start: Vec<Vec<f64>> = (0..b).map(|_| random_vector(n, &mut rng)).collect();
    let mut last_residual = f64::INFINITY;

    for _ in 0..options.max_restarts {
        let available = n - locked.len();
        let need = k - locked.len();
        let max_dim = available.min((3 * need).max(need + 4 * b).max(32));

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
        let mut block = extend_basis(&mut basis, &locked, start, max_dim, n, &mut rng);
        while basis.len() < max_dim && !block.is_empty() {
            let images: Vec<Vec<f64>> = block.iter().map(|v| op.solve(v)).collect();
            block = extend_basis(&mut basis, &locked, images, max_dim, n, &mut rng);
        }

        let m = basis.len();
        let mut lq: Vec<Vec<f64>> = Vec::with_capacity(m);
        for q in &basis {
            let mut y = vec![0.0; n];
            laplacian.matrix().mul_vec(q, &mut y);
            lq.push(y);
        }
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let a = dot(&basis[i], &lq[j]);
                let c = dot(&basis[j], &lq[i]);
                let v = 0.5 * (a + c);
                t[(i, j)] = v;
                t[(j, i)] = v;
            }
        }
        let (theta, s) = jacobi_eigen(t);

        let mut ritz_vectors = Vec::with_capacity(m);
        let mut residuals = Vec::with_capacity(m);
        for col in 0..m {
            let mut y = vec![0.0; n];
            let mut ly = vec![0.0; n];
            for j in 0..m {
                let w = s[(j, col)];
                axpy(w, &basis[j], &mut y);
                axpy(w, &lq[j], &mut ly);
            }
            let r = ly
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - theta[col] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            ritz_vectors.push(y);
            residuals.push(r);
        }

        let mut next = 0;
        while next < m && locked.len() < k && residuals[next] <= tol {
            locked.push(ritz_vectors[next].clone());
            locked_values.push(theta[next]);
            next += 1;
        }
        if locked.len() >= k {
            break;
        }
        last_residual = residuals.get(next).copied().unwrap_or(f64::INFINITY);
        log::debug!(
            "krylov restart: {} locked, dimension {m}, leading residual {last_residual:e}",
            locked.len()
        );
        start = ritz_vectors.into_iter().skip(next).take(b).collect();
    }

    if locked.len() < k {
        return Err(Error::Numerical {
            message: format!(
                "partial eigensolver converged {} of {k} pairs within {} restarts",
                locked.len(),
                options.max_restarts
            ),
            residual: last_residual,
        });
    }

    let mut vectors = DMatrix::zeros(n, k);
    for (c, v) in locked.iter().take(k).enumerate() {
        vectors.column_mut(c).copy_from_slice(v);
    }
    let (values, vectors) = canonicalize(locked_values[..k].to_vec(), vectors);
    Ok(SpectralBasis::from_solver(
        values,
        vectors,
        BasisMode::Partial(k),
        laplacian.content_hash(),
    ))
}

struct Operator<'a> {
    laplacian: &'a LaplacianMatrix,
    shift: f64,
}

impl Operator<'_> {
    /// Approximately solves `(L + σI) x = rhs` with conjugate gradients.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let target = 1e-24 * rr;
        let max_iter = (4 * n).clamp(50, 5000);
        for _ in 0..max_iter {
            if rr <= target {
                break;
            }
            self.laplacian.matrix().mul_vec(&p, &mut ap);
            axpy(self.shift, &p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        x
    }
}

/// Orthonormalizes `candidates` against `locked` and `basis`, appends the
/// survivors and returns them as the next block. Candidates that collapse
/// are replaced by fresh random directions so the space keeps growing.
fn extend_basis(
    basis: &mut Vec<Vec<f64>>,
    locked: &[Vec<f64>],
    candidates: Vec<Vec<f64>>,
    max_dim: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut added = Vec::new();
    for mut v in candidates {
        if basis.len() >= max_dim {
            break;
        }
        let mut accepted = false;
        for _attempt in 0..3 {
            let before = norm(&v);
            if before == 0.0 {
                v = random_vector(n, rng);
                continue;
            }
            for _pass in 0..2 {
                for q in locked.iter().chain(basis.iter()) {
                    let c = dot(q, &v);
                    axpy(-c, q, &mut v);
                }
            }
            let after = norm(&v);
            if after > 1e-10 * before {
                for x in &mut v {
                    *x /= after;
                }
                accepted = true;
                break;
            }
            v = random_vector(n, rng);
        }
        if accepted {
            basis.push(v.clone());
            added.push(v);
        }
    }
    added
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cyclic Jacobi eigensolver for the small projected matrix. Returns
/// eigenvalues in ascending order with matching eigenvector columns.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = a.nrows();
    let mut v = DMatrix::<f64>::identity(m, m);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..m {
            for q in p + 1..m {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..m {
                    let (arp, arq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..m {
                    let (apr, aqr) = (a[(p, r)], a[(q, r)]);
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                for r in 0..m {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    (values, vectors)
}
