use std::fmt::Write as _;
use std::thread;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::metrics::{msnr_from_coefficients, per_vertex_error, MsnrOptions};
use crate::spectral::{Band, SpectralBasis, SpectralCoefficients};
use crate::util::derive_seed;

/// How band-limited noise is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Uniform `[−a, a]` draw per in-band coefficient and axis.
    #[default]
    Spectral,
    /// Uniform `[−a, a]` draw per vertex and axis, then projected onto the band.
    SpatialFiltered,
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(NoiseModel::Spectral),
            "spatial-filtered" | "spatial" => Ok(NoiseModel::SpatialFiltered),
            other => Err(Error::argument(format!("unknown noise model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub band: Band,
    pub max_amplitude: f64,
    pub seed: u64,
    #[serde(default)]
    pub model: NoiseModel,
}

impl NoiseSpec {
    fn check(&self, basis: &SpectralBasis) -> Result<()> {
        if !(self.max_amplitude >= 0.0 && self.max_amplitude.is_finite()) {
            return Err(Error::argument(format!(
                "noise amplitude {} must be finite and >= 0",
                self.max_amplitude
            )));
        }
        basis.require_full("band noise")?;
        self.band.check_within(basis.size())
    }
}

/// In-band coefficient perturbation (`band.len() × 3`) for `spec`.
pub fn band_noise_coefficients(basis: &SpectralBasis, spec: &NoiseSpec) -> Result<DMatrix<f64>> {
    spec.check(basis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.max_amplitude;
    let mut draw = || a * rng.random_range(-1.0..=1.0);
    Ok(match spec.model {
        NoiseModel::Spectral => DMatrix::from_fn(spec.band.len(), 3, |_, _| draw()),
        NoiseModel::SpatialFiltered => {
            let n = basis.dimension();
            // Row-major draw order, vertex by vertex.
            let w = DMatrix::from_row_iterator(n, 3, (0..3 * n).map(|_| draw()));
            basis.eigenvectors().columns(spec.band.lo, spec.band.len()).tr_mul(&w)
        }
    })
}

/// Adds `delta` to the rows of `band`; every other row is copied unchanged.
pub fn perturb_coefficients(
    coeffs: &SpectralCoefficients,
    band: Band,
    delta: &DMatrix<f64>,
) -> Result<SpectralCoefficients> {
    band.check_within(coeffs.size())?;
    if delta.nrows() != band.len() || delta.ncols() != coeffs.coefficients.ncols() {
        return Err(Error::argument(format!(
            "perturbation is {:?}, band {band} needs {}x{}",
            delta.shape(),
            band.len(),
            coeffs.coefficients.ncols()
        )));
    }
    let mut out = coeffs.coefficients.clone();
    let mut rows = out.rows_mut(band.lo, band.len());
    rows += delta;
    Ok(SpectralCoefficients { coefficients: out })
}

fn spatial_noise(basis: &SpectralBasis, band: Band, delta: &DMatrix<f64>) -> DMatrix<f64> {
    basis.eigenvectors().columns(band.lo, band.len()) * delta
}

/// Mesh displaced by band-limited noise, `x + U_band δ`. Equal to inverting the
/// perturbed coefficients and exact at zero amplitude.
pub fn inject_band_noise(basis: &SpectralBasis, mesh: &TriangleMesh, spec: &NoiseSpec) -> Result<TriangleMesh> {
    let x = mesh.vertex_matrix();
    basis.check_signal(&x)?;
    let delta = band_noise_coefficients(basis, spec)?;
    mesh.with_vertex_matrix(&(x + spatial_noise(basis, spec.band, &delta)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepConfig {
    pub bands: Vec<Band>,
    pub amplitudes: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub model: NoiseModel,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            bands: Vec::new(),
            amplitudes: super::linear_amplitudes(0.6, 10),
            trials: 20,
            seed: 0,
            model: NoiseModel::Spectral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub band_lo: usize,
    pub band_hi: usize,
    pub max_amplitude_mm: f64,
    pub trials: usize,
    pub mean_mpve_mm: f64,
    pub mean_msnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepReport {
    pub mesh_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub model: NoiseModel,
    pub rows: Vec<SweepRow>,
}

impl NoiseSweepReport {
    /// Rows of one band in amplitude order.
    pub fn band_rows(&self, band: Band) -> Vec<SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.band_lo == band.lo && r.band_hi == band.hi)
            .copied()
            .collect()
    }
}

/// MPVE and MSNR averaged over seeded trials for every (band, amplitude) cell.
/// MSNR is evaluated on the perturbed coefficients, so frequencies outside the
/// band contribute exactly the cap.
pub fn run_noise_sweep(
    mesh: &TriangleMesh,
    basis: &SpectralBasis,
    config: &NoiseSweepConfig,
) -> Result<NoiseSweepReport> {
    basis.require_full("noise sweep")?;
    let x = mesh.vertex_matrix();
    basis.check_signal(&x)?;
    if config.trials == 0 {
        return Err(Error::argument("noise sweep needs at least one trial"));
    }
    if config.bands.is_empty() || config.amplitudes.is_empty() {
        return Err(Error::argument("noise sweep needs at least one band and one amplitude"));
    }
    for band in &config.bands {
        band.check_within(basis.size())?;
    }
    let gt = basis.eigenvectors().tr_mul(&x);
    let options = MsnrOptions::default();

    let cell = |bi: usize, ai: usize| -> Result<SweepRow> {
        let band = config.bands[bi];
        let amplitude = config.amplitudes[ai];
        let (mut mpve, mut msnr) = (0.0, 0.0);
        for t in 0..config.trials {
            let spec = NoiseSpec {
                band,
                max_amplitude: amplitude,
                seed: derive_seed(config.seed, &[bi as u64, ai as u64, t as u64]),
                model: config.model,
            };
            let delta = band_noise_coefficients(basis, &spec)?;
            let mut pred = gt.clone();
            let mut rows = pred.rows_mut(band.lo, band.len());
            rows += &delta;
            msnr += msnr_from_coefficients(&pred, &gt, &options)?.mean;
            let noisy = &x + spatial_noise(basis, band, &delta);
            mpve += per_vertex_error(&noisy, &x)?;
        }
        let n = config.trials as f64;
        Ok(SweepRow {
            band_lo: band.lo,
            band_hi: band.hi,
            max_amplitude_mm: amplitude,
            trials: config.trials,
            mean_mpve_mm: mpve / n,
            mean_msnr: msnr / n,
        })
    };

    let per_band: Vec<Result<Vec<SweepRow>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..config.bands.len())
            .map(|bi| {
                let cell = &cell;
                s.spawn(move || (0..config.amplitudes.len()).map(|ai| cell(bi, ai)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut rows = Vec::with_capacity(config.bands.len() * config.amplitudes.len());
    for band_rows in per_band {
        rows.extend(band_rows?);
    }
    Ok(NoiseSweepReport {
        mesh_hash: mesh.content_hash(),
        seed: config.seed,
        trials: config.trials,
        model: config.model,
        rows,
    })
}

/// CSV with header `band_lo,band_hi,max_amplitude_mm,trials,mean_mpve_mm,mean_msnr`.
pub fn write_sweep_csv(report: &NoiseSweepReport) -> String {
    let mut out = String::from("band_lo,band_hi,max_amplitude_mm,trials,mean_mpve_mm,mean_msnr\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.band_lo, r.band_hi, r.max_amplitude_mm, r.trials, r.mean_mpve_mm, r.mean_msnr
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graph, make_disc_fixture};
    use crate::spectral::{build_laplacian, eigendecompose_dense, gft, DenseOptions};

    fn setup() -> (TriangleMesh, SpectralBasis) {
        let m = make_disc_fixture(150, 286, 12).unwrap();
        let b = eigendecompose_dense(&build_laplacian(&build_graph(&m)), DenseOptions::default()).unwrap();
        (m, b)
    }

    fn spec(band: Band, a: f64, seed: u64) -> NoiseSpec {
        NoiseSpec { band, max_amplitude: a, seed, model: NoiseModel::Spectral }
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let (m, b) = setup();
        for model in [NoiseModel::Spectral, NoiseModel::SpatialFiltered] {
            let s = NoiseSpec { model, ..spec(Band::new(10, 40).unwrap(), 0.0, 3) };
            assert_eq!(inject_band_noise(&b, &m, &s).unwrap(), m);
        }
    }

    #[test]
    fn dc_band_translates() {
        let (m, b) = setup();
        let noisy = inject_band_noise(&b, &m, &spec(Band::new(0, 0).unwrap(), 0.5, 8)).unwrap();
        let shift: Vec<f64> = (0..3).map(|k| noisy.vertices()[0][k] - m.vertices()[0][k]).collect();
        assert!(shift.iter().any(|s| s.abs() > 1e-6));
        for (p, q) in noisy.vertices().iter().zip(m.vertices()) {
            for k in 0..3 {
                assert!((p[k] - q[k] - shift[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let (m, b) = setup();
        let s = spec(Band::new(20, 60).unwrap(), 0.4, 99);
        let a1 = inject_band_noise(&b, &m, &s).unwrap();
        let a2 = inject_band_noise(&b, &m, &s).unwrap();
        assert_eq!(a1, a2);
        let other = inject_band_noise(&b, &m, &NoiseSpec { seed: 100, ..s }).unwrap();
        assert_ne!(a1, other);
    }

    #[test]
    fn coefficients_outside_band_untouched() {
        let (m, b) = setup();
        let band = Band::new(30, 70).unwrap();
        let c = gft(&b, &m.vertex_matrix()).unwrap();
        let delta = band_noise_coefficients(&b, &spec(band, 0.6, 1)).unwrap();
        assert!(delta.amax() <= 0.6 && delta.amax() > 0.0);
        let p = perturb_coefficients(&c, band, &delta).unwrap();
        for f in 0..c.size() {
            let same = (0..3).all(|k| p.coefficients[(f, k)].to_bits() == c.coefficients[(f, k)].to_bits());
            assert_eq!(same, !band.contains(f), "frequency {f}");
        }
        // Re-analysing the noisy mesh recovers the perturbation.
        let noisy = inject_band_noise(&b, &m, &spec(band, 0.6, 1)).unwrap();
        let back = gft(&b, &noisy.vertex_matrix()).unwrap();
        assert!((back.coefficients - p.coefficients).amax() < 1e-9);
    }

    #[test]
    fn noise_energy_matches_coefficients() {
        let (_, b) = setup();
        for model in [NoiseModel::Spectral, NoiseModel::SpatialFiltered] {
            let band = Band::new(5, 90).unwrap();
            let delta = band_noise_coefficients(&b, &NoiseSpec { model, ..spec(band, 0.3, 4) }).unwrap();
            let spatial = spatial_noise(&b, band, &delta);
            assert!((spatial.norm() - delta.norm()).abs() < 1e-9 * delta.norm());
        }
    }

    #[test]
    fn bad_specs_rejected() {
        let (m, b) = setup();
        assert!(inject_band_noise(&b, &m, &spec(Band::new(100, 150).unwrap(), 0.1, 0)).is_err());
        assert!(inject_band_noise(&b, &m, &spec(Band::new(1, 5).unwrap(), -0.1, 0)).is_err());
    }

    #[test]
    fn small_sweep_properties() {
        let (m, b) = setup();
        let config = NoiseSweepConfig {
            bands: crate::experiments::make_octave_bands(150).unwrap().bands,
            amplitudes: vec![0.0, 0.2, 0.6],
            trials: 4,
            seed: 5,
            model: NoiseModel::Spectral,
        };
        let r = run_noise_sweep(&m, &b, &config).unwrap();
        assert_eq!(r.rows.len(), 24);
        for row in r.rows.iter().filter(|r| r.max_amplitude_mm == 0.0) {
            assert_eq!(row.mean_mpve_mm, 0.0);
            assert_eq!(row.mean_msnr, 8.0);
        }
        assert_eq!(write_sweep_csv(&r), write_sweep_csv(&run_noise_sweep(&m, &b, &config).unwrap()));
        assert!(write_sweep_csv(&r).starts_with("band_lo,band_hi,max_amplitude_mm,trials,mean_mpve_mm,mean_msnr\n"));
        assert_eq!(r.band_rows(config.bands[2]).len(), 3);
    }
}
