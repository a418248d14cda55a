//! Spatial and spectral error measures, surface queries and post-processing.

mod chamfer;
mod smooth;
mod spectral_loss;
mod surface;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

pub use chamfer::{chamfer_distance, ChamferMode, PointIndex};
pub use smooth::masked_smooth;
pub use spectral_loss::{
    frequency_loss, frequency_loss_gradient, frequency_loss_gradient_with, frequency_loss_with,
    gradient_check, msnr, msnr_from_coefficients, msnr_with, write_msnr_csv, FrequencyLossOptions,
    GradCheckReport, MsnrOptions, MsnrReport, GRADCHECK_MAX_SIZE, SPECTRAL_EPSILON,
};
pub use surface::{
    closest_point_on_surface, closest_point_on_triangle, snap_to_surface, SurfaceHit, SurfaceIndex,
};

/// Logarithm used by a spectral measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }

    /// `d/dx log(x) = scale / x`.
    #[inline]
    pub(crate) fn derivative_scale(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Ten => std::f64::consts::LOG10_E,
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "10" | "log10" => Ok(LogBase::Ten),
            other => Err(Error::argument(format!("unknown log base `{other}` (use e or 10)"))),
        }
    }
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() || a.ncols() != 3 {
        return Err(Error::argument(format!(
            "{what}: shapes {:?} and {:?} must match and have 3 columns",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn mean_row_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let total: f64 = (0..a.nrows())
        .map(|r| {
            let d = [a[(r, 0)] - b[(r, 0)], a[(r, 1)] - b[(r, 1)], a[(r, 2)] - b[(r, 2)]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .sum();
    total / a.nrows() as f64
}

/// Mean Euclidean distance between corresponding vertices (MPVE), mm.
pub fn per_vertex_error(pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(pred, gt, "per-vertex error")?;
    Ok(mean_row_distance(pred, gt))
}

/// Mean per-joint position error, mm.
pub fn mpjpe(pred_joints: &DMatrix<f64>, gt_joints: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(pred_joints, gt_joints, "joint error")?;
    Ok(mean_row_distance(pred_joints, gt_joints))
}

/// Weights of the multi-level training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(rename = "lambda_J")]
    pub lambda_j: f64,
    pub lambda_v: [f64; 3],
    #[serde(rename = "lambda_F")]
    pub lambda_f: [f64; 3],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_j: 1.0,
            lambda_v: [1.0, 1.0, 1.0],
            lambda_f: [60.0, 60.0, 100.0],
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = std::iter::once(self.lambda_j)
            .chain(self.lambda_v)
            .chain(self.lambda_f);
        for w in all {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::argument(format!("loss weight {w} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Predictions, targets and basis for one resolution level.
#[derive(Debug, Clone, Copy)]
pub struct LevelInput<'a> {
    pub pred: &'a DMatrix<f64>,
    pub gt: &'a DMatrix<f64>,
    pub basis: &'a SpectralBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelTerms {
    pub vertex_loss: f64,
    pub frequency_loss: f64,
    pub weighted_vertex: f64,
    pub weighted_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub weights: LossWeights,
    pub joint_loss: f64,
    pub weighted_joint: f64,
    pub levels: Vec<LevelTerms>,
    pub total: f64,
}

/// `λ_J L_J + Σ_l (λ_v[l] L_v[l] + λ_F[l] L_F[l])` over exactly three levels.
pub fn total_loss(
    levels: &[LevelInput<'_>],
    pred_joints: &DMatrix<f64>,
    gt_joints: &DMatrix<f64>,
    weights: &LossWeights,
    log_base: LogBase,
) -> Result<LossBreakdown> {
    let options = FrequencyLossOptions { log_base, ..Default::default() };
    weights.validate()?;
    if levels.len() != 3 {
        return Err(Error::argument(format!(
            "total loss needs 3 levels, got {}",
            levels.len()
        )));
    }
    let joint_loss = mpjpe(pred_joints, gt_joints)?;
    let weighted_joint = weights.lambda_j * joint_loss;
    let mut total = weighted_joint;
    let mut terms = Vec::with_capacity(3);
    for (l, level) in levels.iter().enumerate() {
        let vertex_loss = per_vertex_error(level.pred, level.gt)?;
        let freq = frequency_loss_with(level.basis, level.pred, level.gt, &options)?;
        let t = LevelTerms {
            vertex_loss,
            frequency_loss: freq,
            weighted_vertex: weights.lambda_v[l] * vertex_loss,
            weighted_frequency: weights.lambda_f[l] * freq,
        };
        total += t.weighted_vertex + t.weighted_frequency;
        terms.push(t);
    }
    Ok(LossBreakdown {
        weights: *weights,
        joint_loss,
        weighted_joint,
        levels: terms,
        total,
    })
}
