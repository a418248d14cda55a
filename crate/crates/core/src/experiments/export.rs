use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{write_obj_file, TriangleMesh};
use crate::spectral::{cumulative_reconstruction, gft, spectrum_profile, write_spectrum_csv, SpectralBasis};
use crate::TOOL_VERSION;

pub const PROVENANCE_FILE: &str = "provenance.json";
pub const RESIDUAL_CSV: &str = "residuals.csv";

/// Sidecar describing how an artifact was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mesh_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub command: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
}

impl Provenance {
    pub fn new(mesh: &TriangleMesh, seed: Option<u64>, command: &str, parameters: serde_json::Value) -> Self {
        Self {
            mesh_hash: mesh.content_hash(),
            seed,
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            parameters,
        }
    }
}

pub fn write_provenance(dir: &Path, provenance: &Provenance) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(PROVENANCE_FILE);
    let text = serde_json::to_string_pretty(provenance).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Writes the spectrum profile CSV and returns the row count.
pub fn export_spectrum(mesh: &TriangleMesh, basis: &SpectralBasis, path: &Path) -> Result<usize> {
    let rows = spectrum_profile(basis, &mesh.vertex_matrix())?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, write_spectrum_csv(&rows))?;
    Ok(rows.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub cut: usize,
    pub residual_frobenius_mm: f64,
    pub path: PathBuf,
}

/// One low-pass OBJ per cut plus `residuals.csv` (`cut,residual_frobenius_mm`).
/// Residuals are the energy of the discarded coefficients, accumulated from the
/// top frequency down, so the column cannot increase.
pub fn export_cumulative_series(
    mesh: &TriangleMesh,
    basis: &SpectralBasis,
    cuts: &[usize],
    out_dir: &Path,
) -> Result<Vec<CutResult>> {
    let x = mesh.vertex_matrix();
    let series = cumulative_reconstruction(basis, &x, cuts)?;
    let coeffs = gft(basis, &x)?;
    let mut tail = vec![0.0; coeffs.size() + 1];
    for f in (0..coeffs.size()).rev() {
        tail[f] = tail[f + 1] + coeffs.coefficients.row(f).norm_squared();
    }
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("cut,residual_frobenius_mm\n");
    let mut out = Vec::with_capacity(cuts.len());
    for (&cut, positions) in cuts.iter().zip(&series) {
        let path = out_dir.join(format!("cut_{cut:05}.obj"));
        write_obj_file(&mesh.with_vertex_matrix(positions)?, &path)?;
        let residual = tail[cut + 1].sqrt();
        let _ = writeln!(csv, "{cut},{residual:e}");
        out.push(CutResult { cut, residual_frobenius_mm: residual, path });
    }
    fs::write(out_dir.join(RESIDUAL_CSV), csv)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graph, make_icosphere, read_obj};
    use crate::spectral::{build_laplacian, eigendecompose_dense, DenseOptions};

    fn setup() -> (TriangleMesh, SpectralBasis) {
        let m = make_icosphere(2, 10.0).unwrap();
        let b = eigendecompose_dense(&build_laplacian(&build_graph(&m)), DenseOptions::default()).unwrap();
        (m, b)
    }

    #[test]
    fn spectrum_export() {
        let (m, b) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        assert_eq!(export_spectrum(&m, &b, &p).unwrap(), 162);
        let first = fs::read(&p).unwrap();
        export_spectrum(&m, &b, &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
        assert_eq!(String::from_utf8(first).unwrap().lines().count(), 163);
        let rows = spectrum_profile(&b, &m.vertex_matrix()).unwrap();
        let decile = rows.len() / 10;
        let mean = |r: &[crate::spectral::SpectrumRow]| r.iter().map(|x| x.log10_amplitude).sum::<f64>() / r.len() as f64;
        assert!(mean(&rows[..decile]) > mean(&rows[rows.len() - decile..]));
    }

    #[test]
    fn cumulative_export() {
        let (m, b) = setup();
        let dir = tempfile::tempdir().unwrap();
        let cuts = [0, 3, 15, 60, 161];
        let res = export_cumulative_series(&m, &b, &cuts, dir.path()).unwrap();
        assert_eq!(res.len(), 5);
        assert!(res.windows(2).all(|w| w[1].residual_frobenius_mm <= w[0].residual_frobenius_mm));
        assert_eq!(res[4].residual_frobenius_mm, 0.0);
        let last = read_obj(&res[4].path).unwrap();
        for (p, q) in last.vertices().iter().zip(m.vertices()) {
            assert!((0..3).all(|k| (p[k] - q[k]).abs() < 1e-6));
        }
        assert_eq!(last.faces(), m.faces());
        // Cut 0 collapses every vertex onto the centroid.
        let c0 = read_obj(&res[0].path).unwrap();
        let v0 = c0.vertices()[0];
        assert!(c0.vertices().iter().all(|p| (0..3).all(|k| (p[k] - v0[k]).abs() < 1e-9)));
        let csv = fs::read_to_string(dir.path().join(RESIDUAL_CSV)).unwrap();
        assert!(csv.starts_with("cut,residual_frobenius_mm\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn provenance_sidecar() {
        let (m, _) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = Provenance::new(&m, Some(7), "noise-sweep", serde_json::json!({"trials": 20}));
        let path = write_provenance(dir.path(), &p).unwrap();
        let back: Provenance = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.mesh_hash.len(), 64);
        assert!(back.tool_version.starts_with("meshspectra "));
    }
}
