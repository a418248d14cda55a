//! Octave bands, band-limited noise, the metric-sensitivity sweep and
//! spectrum/reconstruction exports.

mod export;
mod noise;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Band;

pub use export::{
    export_cumulative_series, export_spectrum, write_provenance, CutResult, Provenance,
    PROVENANCE_FILE, RESIDUAL_CSV,
};
pub use noise::{
    band_noise_coefficients, inject_band_noise, perturb_coefficients, run_noise_sweep,
    write_sweep_csv, NoiseModel, NoiseSpec, NoiseSweepConfig, NoiseSweepReport, SweepRow,
};

/// Basis size at which the reference band set applies unscaled.
pub const CANONICAL_SIZE: usize = 12337;
const CANONICAL_BASE: usize = 60;
pub const BAND_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OctaveBands {
    pub bands: Vec<Band>,
    /// False when the edges were scaled down for a smaller basis.
    pub canonical: bool,
}

/// Eight doubling bands `[60·2^k, 60·2^(k+1) − 1]`, the last one closed at
/// 12336. Smaller bases get the same edges scaled by `size / 12337`, rounded
/// and forced strictly increasing, with the last band ending at `size − 1`.
pub fn make_octave_bands(size: usize) -> Result<OctaveBands> {
    if size < 2 * CANONICAL_BASE {
        return Err(Error::argument(format!(
            "octave bands need at least {} frequencies, got {size}",
            2 * CANONICAL_BASE
        )));
    }
    let canonical = size >= CANONICAL_SIZE;
    let scale = if canonical { 1.0 } else { size as f64 / CANONICAL_SIZE as f64 };
    let mut edges = Vec::with_capacity(BAND_COUNT);
    for k in 0..BAND_COUNT {
        let raw = ((CANONICAL_BASE << k) as f64 * scale).round() as usize;
        let floor = edges.last().map_or(1, |&e: &usize| e + 1);
        edges.push(raw.max(floor));
    }
    let top = if canonical { CANONICAL_SIZE - 1 } else { size - 1 };
    let bands = (0..BAND_COUNT)
        .map(|k| {
            let hi = if k + 1 < BAND_COUNT { edges[k + 1] - 1 } else { top };
            Band::new(edges[k], hi)
        })
        .collect::<Result<Vec<_>>>()?;
    if !canonical {
        log::info!("basis of {size} frequencies: using scaled, non-canonical octave bands");
    }
    Ok(OctaveBands { bands, canonical })
}

/// `count` evenly spaced values from 0 to `max` inclusive.
pub fn linear_amplitudes(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..count).map(|i| max * i as f64 / (count - 1) as f64).collect(),
    }
}
