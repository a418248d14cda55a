use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{Band, SpectralBasis, SpectralCoefficients};
use crate::error::{Error, Result};

/// Forward transform `Uᵀ x`. With a partial basis this is the projection onto
/// the retained frequencies.
pub fn gft(basis: &SpectralBasis, signal: &DMatrix<f64>) -> Result<SpectralCoefficients> {
    basis.check_signal(signal)?;
    Ok(SpectralCoefficients {
        coefficients: basis.eigenvectors().tr_mul(signal),
    })
}

/// Inverse transform `U c`.
pub fn igft(basis: &SpectralBasis, coeffs: &SpectralCoefficients) -> Result<DMatrix<f64>> {
    if coeffs.size() != basis.size() {
        return Err(Error::argument(format!(
            "{} coefficient rows for a basis of {} frequencies",
            coeffs.size(),
            basis.size()
        )));
    }
    Ok(basis.eigenvectors() * &coeffs.coefficients)
}

/// `Σ_{f ∈ band} U_f U_fᵀ x`.
pub fn band_component(basis: &SpectralBasis, signal: &DMatrix<f64>, band: Band) -> Result<DMatrix<f64>> {
    basis.check_signal(signal)?;
    band.check_within(basis.size())?;
    let u = basis.eigenvectors().columns(band.lo, band.len());
    let c = u.tr_mul(signal);
    Ok(u * c)
}

/// Low-pass reconstructions over `[0, cuts[j]]` for each cut.
pub fn cumulative_reconstruction(
    basis: &SpectralBasis,
    signal: &DMatrix<f64>,
    cuts: &[usize],
) -> Result<Vec<DMatrix<f64>>> {
    basis.require_full("cumulative reconstruction")?;
    basis.check_signal(signal)?;
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument(format!("cuts must be strictly ascending: {cuts:?}")));
    }
    if let Some(&last) = cuts.last() {
        if last >= basis.size() {
            return Err(Error::argument(format!(
                "cut {last} exceeds the highest frequency {}",
                basis.size() - 1
            )));
        }
    }
    let coeffs = basis.eigenvectors().tr_mul(signal);
    let mut out = Vec::with_capacity(cuts.len());
    let mut acc = DMatrix::zeros(signal.nrows(), signal.ncols());
    let mut done = 0;
    for &cut in cuts {
        let width = cut + 1 - done;
        let u = basis.eigenvectors().columns(done, width);
        acc += u * coeffs.rows(done, width);
        done = cut + 1;
        out.push(acc.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub freq_index: usize,
    pub eigenvalue: f64,
    pub amplitude_mm: f64,
    pub log10_amplitude: f64,
}

/// Floor added before taking log10 of an amplitude.
const LOG_FLOOR: f64 = 1e-12;

pub fn spectrum_profile(basis: &SpectralBasis, signal: &DMatrix<f64>) -> Result<Vec<SpectrumRow>> {
    let coeffs = gft(basis, signal)?;
    Ok((0..basis.size())
        .map(|f| {
            let amplitude = coeffs.amplitude(f);
            SpectrumRow {
                freq_index: f,
                eigenvalue: basis.eigenvalues()[f],
                amplitude_mm: amplitude,
                log10_amplitude: (amplitude + LOG_FLOOR).log10(),
            }
        })
        .collect())
}

/// CSV with header `freq_index,eigenvalue,amplitude_mm,log10_amplitude`.
pub fn write_spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from("freq_index,eigenvalue,amplitude_mm,log10_amplitude\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.freq_index, r.eigenvalue, r.amplitude_mm, r.log10_amplitude
        );
    }
    out
}
