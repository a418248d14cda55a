//! Binary basis dump and a directory cache keyed by Laplacian hash.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes  "MSBASIS\0"
//! version    u32
//! mode       u8       0 = full, 1 = partial
//! dimension  u64
//! size       u64      number of eigenpairs
//! hash       64 bytes lowercase hex SHA-256 of the source Laplacian
//! values     size × f64
//! vectors    dimension × size × f64, column-major
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{BasisMode, LaplacianMatrix, SpectralBasis};
use crate::error::{Error, Result};

pub const CACHE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MSBASIS\0";

pub fn write_basis(basis: &SpectralBasis) -> Vec<u8> {
    let (n, k) = basis.eigenvectors().shape();
    let mut out = Vec::with_capacity(8 + 4 + 1 + 16 + 64 + 8 * k * (n + 1) + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.push(match basis.mode() {
        BasisMode::Full => 0,
        BasisMode::Partial(_) => 1,
    });
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    let mut hash = [b'0'; 64];
    let h = basis.laplacian_hash().as_bytes();
    hash[..h.len().min(64)].copy_from_slice(&h[..h.len().min(64)]);
    out.extend_from_slice(&hash);
    for v in basis.eigenvalues() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    for v in basis.eigenvectors().as_slice() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn read_basis(bytes: &[u8]) -> Result<SpectralBasis> {
    let bad = |msg: &str| Error::Format(format!("basis file: {msg}"));
    if bytes.len() < 8 + 4 + 1 + 16 + 64 + 32 {
        return Err(bad("truncated header"));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(bad("checksum mismatch"));
    }
    if &body[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut cursor = 8;
    let mut take = |len: usize| {
        let s = &body[cursor..cursor + len];
        cursor += len;
        s
    };
    let version = u32::from_le_bytes(take(4).try_into().unwrap());
    if version != CACHE_FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mode_tag = take(1)[0];
    let n = u64::from_le_bytes(take(8).try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(take(8).try_into().unwrap()) as usize;
    let hash = String::from_utf8(take(64).to_vec()).map_err(|_| bad("hash is not ASCII"))?;
    let expected = 8 + 4 + 1 + 16 + 64 + 8 * (k + n * k);
    if body.len() != expected {
        return Err(bad(&format!("expected {expected} payload bytes, found {}", body.len())));
    }
    let floats = |s: &[u8]| -> Vec<f64> {
        s.chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect()
    };
    let values = floats(take(8 * k));
    let vectors = DMatrix::from_vec(n, k, floats(take(8 * n * k)));
    let mode = match mode_tag {
        0 => BasisMode::Full,
        1 => BasisMode::Partial(k),
        t => return Err(bad(&format!("unknown mode tag {t}"))),
    };
    SpectralBasis::from_parts(values, vectors, mode, hash)
}

/// Directory of basis files named by Laplacian hash and mode.
#[derive(Debug, Clone)]
pub struct BasisCache {
    dir: PathBuf,
}

impl BasisCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, laplacian_hash: &str, mode: BasisMode) -> PathBuf {
        let tag = match mode {
            BasisMode::Full => "full".to_string(),
            BasisMode::Partial(k) => format!("k{k}"),
        };
        self.dir.join(format!("{laplacian_hash}-{tag}.basis"))
    }

    /// Returns the cached basis for `laplacian`, computing and storing it on a miss.
    /// A lock file serializes writers of the same entry.
    pub fn load_or_compute(
        &self,
        laplacian: &LaplacianMatrix,
        mode: BasisMode,
        compute: impl FnOnce() -> Result<SpectralBasis>,
    ) -> Result<SpectralBasis> {
        fs::create_dir_all(&self.dir)?;
        let hash = laplacian.content_hash();
        let path = self.path_for(&hash, mode);
        let _lock = LockGuard::acquire(path.with_extension("lock"))?;
        if path.exists() {
            match read_basis(&fs::read(&path)?) {
                Ok(basis) if basis.laplacian_hash() == hash && basis.mode() == mode => {
                    log::info!("basis cache hit: {}", path.display());
                    return Ok(basis);
                }
                Ok(_) => log::warn!("stale basis cache entry {}, recomputing", path.display()),
                Err(e) => log::warn!("unreadable basis cache entry {}: {e}", path.display()),
            }
        }
        let basis = compute()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, write_basis(&basis))?;
        fs::rename(&tmp, &path)?;
        Ok(basis)
    }
}

struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(path: PathBuf) -> Result<Self> {
        for _ in 0..1200 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(Self { path }),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    thread::sleep(Duration::from_millis(100))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Io(std::io::Error::new(
            ErrorKind::TimedOut,
            format!("timed out waiting for cache lock {}", path.display()),
        )))
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
