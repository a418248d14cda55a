use std::fmt::Write as _;

use nalgebra::{DMatrix, RowVector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::LogBase;
use crate::error::{Error, Result};
use crate::mesh::{build_graph, make_disc_fixture};
use crate::spectral::{build_laplacian, eigendecompose_dense, DenseOptions, SpectralBasis};

/// Stabilizer in the frequency loss and MSNR denominators.
pub const SPECTRAL_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyLossOptions {
    pub log_base: LogBase,
    pub epsilon: f64,
}

impl Default for FrequencyLossOptions {
    fn default() -> Self {
        Self { log_base: LogBase::Natural, epsilon: SPECTRAL_EPSILON }
    }
}

fn coefficient_pair(
    basis: &SpectralBasis,
    pred: &DMatrix<f64>,
    gt: &DMatrix<f64>,
    what: &str,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    basis.require_full(what)?;
    basis.check_signal(pred)?;
    basis.check_signal(gt)?;
    let u = basis.eigenvectors();
    Ok((u.tr_mul(pred), u.tr_mul(gt)))
}

fn row(m: &DMatrix<f64>, f: usize) -> RowVector3<f64> {
    RowVector3::new(m[(f, 0)], m[(f, 1)], m[(f, 2)])
}

/// Per-frequency ratio `‖p−g‖² / (‖p‖‖g‖ + ε)`.
fn ratio(p: &RowVector3<f64>, g: &RowVector3<f64>, epsilon: f64) -> f64 {
    (p - g).norm_squared() / (p.norm() * g.norm() + epsilon)
}

pub fn frequency_loss(basis: &SpectralBasis, pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<f64> {
    frequency_loss_with(basis, pred, gt, &FrequencyLossOptions::default())
}

/// Mean over all frequencies of `log(‖p_f−g_f‖² / (‖p_f‖‖g_f‖ + ε) + 1)`.
pub fn frequency_loss_with(
    basis: &SpectralBasis,
    pred: &DMatrix<f64>,
    gt: &DMatrix<f64>,
    options: &FrequencyLossOptions,
) -> Result<f64> {
    let (cp, cg) = coefficient_pair(basis, pred, gt, "frequency loss")?;
    let f_count = cp.nrows();
    let sum: f64 = (0..f_count)
        .map(|f| options.log_base.log(ratio(&row(&cp, f), &row(&cg, f), options.epsilon) + 1.0))
        .sum();
    Ok(sum / f_count as f64)
}

pub fn frequency_loss_gradient(
    basis: &SpectralBasis,
    pred: &DMatrix<f64>,
    gt: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    frequency_loss_gradient_with(basis, pred, gt, &FrequencyLossOptions::default())
}

/// Gradient of [`frequency_loss_with`] with respect to `pred`. Where a predicted
/// component is exactly zero the subgradient of its norm is taken as zero.
pub fn frequency_loss_gradient_with(
    basis: &SpectralBasis,
    pred: &DMatrix<f64>,
    gt: &DMatrix<f64>,
    options: &FrequencyLossOptions,
) -> Result<DMatrix<f64>> {
    let (cp, cg) = coefficient_pair(basis, pred, gt, "frequency loss")?;
    let f_count = cp.nrows();
    let scale = options.log_base.derivative_scale() / f_count as f64;
    let mut grad = DMatrix::zeros(f_count, 3);
    for f in 0..f_count {
        let (p, g) = (row(&cp, f), row(&cg, f));
        let (pn, gn) = (p.norm(), g.norm());
        let d = pn * gn + options.epsilon;
        let diff = p - g;
        let e2 = diff.norm_squared();
        let r = e2 / d;
        let mut dr = diff * (2.0 / d);
        if pn > 0.0 {
            dr -= p * (e2 * gn / (pn * d * d));
        }
        let gf = dr * (scale / (r + 1.0));
        grad.row_mut(f).copy_from(&gf);
    }
    Ok(basis.eigenvectors() * grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsnrOptions {
    pub log_base: LogBase,
    pub epsilon: f64,
    /// `S_f` is clamped to `[-cap, cap]`.
    pub cap: f64,
}

impl Default for MsnrOptions {
    fn default() -> Self {
        Self { log_base: LogBase::Ten, epsilon: SPECTRAL_EPSILON, cap: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsnrReport {
    pub mean: f64,
    pub per_frequency: Vec<f64>,
    pub clamp_count: usize,
}

pub fn msnr(basis: &SpectralBasis, pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<MsnrReport> {
    msnr_with(basis, pred, gt, &MsnrOptions::default())
}

pub fn msnr_with(
    basis: &SpectralBasis,
    pred: &DMatrix<f64>,
    gt: &DMatrix<f64>,
    options: &MsnrOptions,
) -> Result<MsnrReport> {
    let (cp, cg) = coefficient_pair(basis, pred, gt, "MSNR")?;
    msnr_from_coefficients(&cp, &cg, options)
}

/// MSNR from precomputed coefficient rows (`F × 3`).
///
/// A component with exactly zero error scores `cap`; a component with zero
/// predicted signal but nonzero error scores `-cap`.
pub fn msnr_from_coefficients(
    pred_coeffs: &DMatrix<f64>,
    gt_coeffs: &DMatrix<f64>,
    options: &MsnrOptions,
) -> Result<MsnrReport> {
    if pred_coeffs.shape() != gt_coeffs.shape() || pred_coeffs.ncols() != 3 || pred_coeffs.nrows() == 0 {
        return Err(Error::argument(format!(
            "MSNR coefficient shapes {:?} and {:?} must match, be non-empty and have 3 columns",
            pred_coeffs.shape(),
            gt_coeffs.shape()
        )));
    }
    let cap = options.cap;
    let per_frequency: Vec<f64> = (0..pred_coeffs.nrows())
        .map(|f| {
            let (p, g) = (row(pred_coeffs, f), row(gt_coeffs, f));
            let err = (p - g).norm();
            let signal = p.norm();
            if err == 0.0 {
                cap
            } else if signal == 0.0 {
                -cap
            } else {
                options.log_base.log(signal / (err + options.epsilon)).clamp(-cap, cap)
            }
        })
        .collect();
    let clamp_count = per_frequency.iter().filter(|&&s| s >= cap).count();
    let mean = per_frequency.iter().sum::<f64>() / per_frequency.len() as f64;
    Ok(MsnrReport { mean, per_frequency, clamp_count })
}

/// CSV with header `freq_index,s_f`.
pub fn write_msnr_csv(report: &MsnrReport) -> String {
    let mut out = String::from("freq_index,s_f\n");
    for (f, s) in report.per_frequency.iter().enumerate() {
        let _ = writeln!(out, "{f},{s:e}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub size: usize,
    pub step_mm: f64,
    pub loss: f64,
    pub analytic_norm: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const GRADCHECK_MAX_SIZE: usize = 200;

/// Compares the analytic gradient against central differences on a seeded
/// random instance. `corrupt` perturbs the analytic side as a negative control.
pub fn gradient_check(seed: u64, size: usize, corrupt: bool) -> Result<GradCheckReport> {
    if !(4..=GRADCHECK_MAX_SIZE).contains(&size) {
        return Err(Error::argument(format!(
            "gradcheck size must be in 4..={GRADCHECK_MAX_SIZE}, got {size}"
        )));
    }
    let boundary = (size / 3).clamp(3, size);
    let mesh = make_disc_fixture(size, 2 * size - boundary - 2, boundary)?;
    let basis = eigendecompose_dense(&build_laplacian(&build_graph(&mesh)), DenseOptions::default())?;
    let gt = mesh.vertex_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pred = gt.map(|v| v + rng.random_range(-0.5..0.5));
    let opts = FrequencyLossOptions::default();

    let mut analytic = frequency_loss_gradient_with(&basis, &pred, &gt, &opts)?;
    if corrupt {
        analytic *= 1.01;
        analytic[(0, 0)] += 1e-3;
    }
    let step = 1e-5;
    let mut numeric = DMatrix::zeros(size, 3);
    let mut probe = pred.clone();
    for i in 0..size {
        for c in 0..3 {
            let x = pred[(i, c)];
            probe[(i, c)] = x + step;
            let up = frequency_loss_with(&basis, &probe, &gt, &opts)?;
            probe[(i, c)] = x - step;
            let down = frequency_loss_with(&basis, &probe, &gt, &opts)?;
            probe[(i, c)] = x;
            numeric[(i, c)] = (up - down) / (2.0 * step);
        }
    }
    let relative_error = (&analytic - &numeric).norm() / numeric.norm().max(f64::MIN_POSITIVE);
    let tolerance = 1e-5;
    Ok(GradCheckReport {
        seed,
        size,
        step_mm: step,
        loss: frequency_loss_with(&basis, &pred, &gt, &opts)?,
        analytic_norm: analytic.norm(),
        relative_error,
        tolerance,
        passed: relative_error <= tolerance,
    })
}
