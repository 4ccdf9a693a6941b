//! Bit-exact bundle format for full-wave operator data.
//!
//! A bundle is a directory holding `manifest.json` and a single `data.bin`.
//! The manifest lists one record per matrix with its shape, dtype, byte
//! range inside `data.bin` and CRC-32 checksum. All values are IEEE-754
//! doubles, little-endian, row-major; complex matrices interleave
//! (real, imaginary) pairs. Unknown major format versions are a hard
//! error, minor versions are forward-compatible.

use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mom::{BasisFunction, FarField, FullWaveSystem, StoredRow};
use crate::{CMatrix, CVector, RMatrix, C64};

/// Format version written by this crate.
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;

const MANIFEST_NAME: &str = "manifest.json";
const DATA_NAME: &str = "data.bin";
const REQUIRED: [&str; 4] = ["R_rad", "R_loss", "X", "xi"];

/// Symmetry tolerance applied on read in strict mode.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unsupported bundle format version {0}.{1} (reader supports major {FORMAT_MAJOR})")]
    UnsupportedVersion(u32, u32),
    #[error("checksum mismatch in blob '{0}'")]
    ChecksumMismatch(String),
    #[error("required matrix '{0}' missing from manifest")]
    MissingMatrix(String),
    #[error("matrix '{name}' has shape {rows}x{cols}, expected {expect}")]
    ShapeMismatch {
        name: String,
        rows: usize,
        cols: usize,
        expect: String,
    },
    #[error("matrix '{0}' is not symmetric (asymmetry {1})")]
    NotSymmetric(String, f64),
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    Json(#[from] serde_json::Error),
}

/// How hard to validate on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Symmetry violations are hard errors.
    Strict,
    /// Symmetry violations are reported on stderr and symmetrized.
    Lenient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRecord {
    name: String,
    rows: usize,
    cols: usize,
    /// "f64" or "c64".
    dtype: String,
    offset: u64,
    length: u64,
    checksum: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DirectionRecord {
    label: String,
    e_hat: [f64; 3],
    r_hat: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_major: u32,
    format_minor: u32,
    n: usize,
    frequency: f64,
    wavenumber: f64,
    matrices: Vec<MatrixRecord>,
    /// Stored far-field directions (one `farfield/<label>` blob each).
    #[serde(default)]
    directions: Vec<DirectionRecord>,
    /// Analytic basis geometry, present when the source system computes
    /// far fields on the fly.
    #[serde(default)]
    basis: Option<Vec<BasisFunction>>,
    /// Free-form labels (geometry names, candidate-port indices, ...).
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

fn real_bytes(m: &RMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * 8);
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn complex_bytes(v: &CVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * 16);
    for z in v.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn crc(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(bytes);
    h.finalize()
}

/// Write a system as a bundle directory at `path` (created if missing).
pub fn write_bundle(system: &FullWaveSystem, path: &Path) -> Result<(), BundleError> {
    std::fs::create_dir_all(path)?;
    let mut data: Vec<u8> = Vec::new();
    let mut matrices = Vec::new();
    let mut push = |name: String, rows: usize, cols: usize, dtype: &str, bytes: Vec<u8>| {
        let rec = MatrixRecord {
            name,
            rows,
            cols,
            dtype: dtype.into(),
            offset: data.len() as u64,
            length: bytes.len() as u64,
            checksum: crc(&bytes),
        };
        data.extend_from_slice(&bytes);
        matrices.push(rec);
    };
    let n = system.n;
    push("R_rad".into(), n, n, "f64", real_bytes(&system.r_rad));
    push("R_loss".into(), n, n, "f64", real_bytes(&system.r_loss));
    push("X".into(), n, n, "f64", real_bytes(&system.x));
    let xi = RMatrix::from_shape_fn((n, 1), |(i, _)| system.xi[i]);
    push("xi".into(), n, 1, "f64", real_bytes(&xi));
    let mut directions = Vec::new();
    let mut basis = None;
    match &system.farfield {
        FarField::Table(rows) => {
            for row in rows {
                push(
                    format!("farfield/{}", row.label),
                    1,
                    n,
                    "c64",
                    complex_bytes(&row.row),
                );
                directions.push(DirectionRecord {
                    label: row.label.clone(),
                    e_hat: row.e_hat,
                    r_hat: row.r_hat,
                });
            }
        }
        FarField::Dipoles(b) => basis = Some(b.clone()),
    }
    let manifest = Manifest {
        format_major: FORMAT_MAJOR,
        format_minor: FORMAT_MINOR,
        n,
        frequency: system.frequency,
        wavenumber: system.k,
        matrices,
        directions,
        basis,
        metadata: BTreeMap::new(),
    };
    let mut f = std::fs::File::create(path.join(DATA_NAME))?;
    f.write_all(&data)?;
    f.sync_all()?;
    let mut m = std::fs::File::create(path.join(MANIFEST_NAME))?;
    m.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    m.sync_all()?;
    Ok(())
}

fn blob<'a>(data: &'a [u8], rec: &MatrixRecord) -> Result<&'a [u8], BundleError> {
    let start = rec.offset as usize;
    let end = start + rec.length as usize;
    if end > data.len() {
        return Err(BundleError::Malformed(format!(
            "blob '{}' extends past end of data file",
            rec.name
        )));
    }
    let bytes = &data[start..end];
    if crc(bytes) != rec.checksum {
        return Err(BundleError::ChecksumMismatch(rec.name.clone()));
    }
    Ok(bytes)
}

fn read_real(bytes: &[u8], rec: &MatrixRecord) -> Result<RMatrix, BundleError> {
    if bytes.len() != rec.rows * rec.cols * 8 {
        return Err(BundleError::Malformed(format!(
            "blob '{}' has {} bytes for a {}x{} f64 matrix",
            rec.name,
            bytes.len(),
            rec.rows,
            rec.cols
        )));
    }
    Ok(RMatrix::from_shape_fn((rec.rows, rec.cols), |(i, j)| {
        let o = (i * rec.cols + j) * 8;
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    }))
}

fn read_complex(bytes: &[u8], rec: &MatrixRecord) -> Result<CMatrix, BundleError> {
    if bytes.len() != rec.rows * rec.cols * 16 {
        return Err(BundleError::Malformed(format!(
            "blob '{}' has {} bytes for a {}x{} c64 matrix",
            rec.name,
            bytes.len(),
            rec.rows,
            rec.cols
        )));
    }
    Ok(CMatrix::from_shape_fn((rec.rows, rec.cols), |(i, j)| {
        let o = (i * rec.cols + j) * 16;
        C64::new(
            f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()),
            f64::from_le_bytes(bytes[o + 8..o + 16].try_into().unwrap()),
        )
    }))
}

fn asymmetry(m: &RMatrix) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
            scale = scale.max(m[[i, j]].abs());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        0.0
    }
}

fn check_symmetric(
    name: &str,
    m: &mut RMatrix,
    strictness: Strictness,
) -> Result<(), BundleError> {
    let a = asymmetry(m);
    if a > SYMMETRY_TOL {
        match strictness {
            Strictness::Strict => return Err(BundleError::NotSymmetric(name.into(), a)),
            Strictness::Lenient => {
                eprintln!("warning: '{name}' asymmetry {a:.3e}, symmetrizing");
                let t = m.t().to_owned();
                *m = 0.5 * (&*m + &t);
            }
        }
    }
    Ok(())
}

/// Read a bundle in strict mode.
pub fn read_bundle(path: &Path) -> Result<FullWaveSystem, BundleError> {
    read_bundle_with(path, Strictness::Strict)
}

/// Read a bundle with an explicit strictness policy.
pub fn read_bundle_with(
    path: &Path,
    strictness: Strictness,
) -> Result<FullWaveSystem, BundleError> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(path.join(MANIFEST_NAME))?)?;
    if manifest.format_major != FORMAT_MAJOR {
        return Err(BundleError::UnsupportedVersion(
            manifest.format_major,
            manifest.format_minor,
        ));
    }
    let mut data = Vec::new();
    std::fs::File::open(path.join(DATA_NAME))?.read_to_end(&mut data)?;
    let find = |name: &str| -> Result<&MatrixRecord, BundleError> {
        manifest
            .matrices
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| BundleError::MissingMatrix(name.into()))
    };
    for name in REQUIRED {
        find(name)?;
    }
    let n = manifest.n;
    let square = |rec: &MatrixRecord| -> Result<RMatrix, BundleError> {
        if rec.rows != n || rec.cols != n {
            return Err(BundleError::ShapeMismatch {
                name: rec.name.clone(),
                rows: rec.rows,
                cols: rec.cols,
                expect: format!("{n}x{n}"),
            });
        }
        read_real(blob(&data, rec)?, rec)
    };
    let mut r_rad = square(find("R_rad")?)?;
    let mut r_loss = square(find("R_loss")?)?;
    let mut x = square(find("X")?)?;
    check_symmetric("R_rad", &mut r_rad, strictness)?;
    check_symmetric("R_loss", &mut r_loss, strictness)?;
    check_symmetric("X", &mut x, strictness)?;
    let xi_rec = find("xi")?;
    if xi_rec.rows != n || xi_rec.cols != 1 {
        return Err(BundleError::ShapeMismatch {
            name: "xi".into(),
            rows: xi_rec.rows,
            cols: xi_rec.cols,
            expect: format!("{n}x1"),
        });
    }
    let xi_m = read_real(blob(&data, xi_rec)?, xi_rec)?;
    let xi = Array1::from_shape_fn(n, |i| xi_m[[i, 0]]);
    let farfield = if let Some(basis) = manifest.basis.clone() {
        FarField::Dipoles(basis)
    } else {
        let mut rows = Vec::new();
        for d in &manifest.directions {
            let rec = find(&format!("farfield/{}", d.label))?;
            if rec.rows != 1 || rec.cols != n {
                return Err(BundleError::ShapeMismatch {
                    name: rec.name.clone(),
                    rows: rec.rows,
                    cols: rec.cols,
                    expect: format!("1x{n}"),
                });
            }
            let m = read_complex(blob(&data, rec)?, rec)?;
            rows.push(StoredRow {
                label: d.label.clone(),
                e_hat: d.e_hat,
                r_hat: d.r_hat,
                row: m.row(0).to_owned(),
            });
        }
        FarField::Table(rows)
    };
    Ok(FullWaveSystem {
        n,
        frequency: manifest.frequency,
        k: manifest.wavenumber,
        z0: crate::consts::Z0,
        r_rad,
        r_loss,
        x,
        xi,
        farfield,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn roundtrip_system() -> FullWaveSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut sys = crate::synthetic::random_system(&mut rng, 3);
        // Exact symmetry so the strict reader accepts it bit-for-bit.
        sys.r_rad = 0.5 * (&sys.r_rad + &sys.r_rad.t().to_owned());
        sys.r_loss = 0.5 * (&sys.r_loss + &sys.r_loss.t().to_owned());
        sys.x = 0.5 * (&sys.x + &sys.x.t().to_owned());
        sys
    }

    #[test]
    fn roundtrip_is_bitexact() {
        let sys = roundtrip_system();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(back.n, sys.n);
        assert_eq!(back.frequency, sys.frequency);
        assert!(back.r_rad.iter().zip(sys.r_rad.iter()).all(|(a, b)| a == b));
        assert!(back.r_loss.iter().zip(sys.r_loss.iter()).all(|(a, b)| a == b));
        assert!(back.x.iter().zip(sys.x.iter()).all(|(a, b)| a == b));
        assert!(back.xi.iter().zip(sys.xi.iter()).all(|(a, b)| a == b));
        match (&back.farfield, &sys.farfield) {
            (FarField::Table(a), FarField::Table(b)) => {
                assert_eq!(a.len(), b.len());
                for (ra, rb) in a.iter().zip(b.iter()) {
                    assert_eq!(ra.label, rb.label);
                    assert!(ra.row.iter().zip(rb.row.iter()).all(|(x, y)| x == y));
                }
            }
            _ => panic!("far-field variant changed in round trip"),
        }
    }

    #[test]
    fn manifest_size_arithmetic() {
        let sys = roundtrip_system();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let manifest: Manifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap(),
        )
        .unwrap();
        let rad = manifest
            .matrices
            .iter()
            .find(|r| r.name == "R_rad")
            .unwrap();
        assert_eq!((rad.rows, rad.cols), (3, 3));
        assert_eq!(rad.length, 72, "3x3 f64 blob is 72 bytes");
    }

    #[test]
    fn corruption_is_detected_and_named() {
        let sys = roundtrip_system();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let data_path = dir.path().join(DATA_NAME);
        let mut bytes = std::fs::read(&data_path).unwrap();
        // Flip one byte inside the R_loss blob (second 72-byte region).
        bytes[80] ^= 0x01;
        std::fs::write(&data_path, &bytes).unwrap();
        match read_bundle(dir.path()) {
            Err(BundleError::ChecksumMismatch(name)) => assert_eq!(name, "R_loss"),
            other => panic!("expected checksum mismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_matrix_reported() {
        let sys = roundtrip_system();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let mpath = dir.path().join(MANIFEST_NAME);
        let mut manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
        manifest.matrices.retain(|r| r.name != "X");
        std::fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            read_bundle(dir.path()),
            Err(BundleError::MissingMatrix(name)) if name == "X"
        ));
    }

    #[test]
    fn future_major_version_rejected() {
        let sys = roundtrip_system();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let mpath = dir.path().join(MANIFEST_NAME);
        let mut manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
        manifest.format_major = FORMAT_MAJOR + 1;
        std::fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            read_bundle(dir.path()),
            Err(BundleError::UnsupportedVersion(..))
        ));
    }

    #[test]
    fn asymmetric_matrix_strictness() {
        let mut sys = roundtrip_system();
        sys.x[[0, 1]] += 1.0;
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        assert!(matches!(
            read_bundle(dir.path()),
            Err(BundleError::NotSymmetric(name, _)) if name == "X"
        ));
        let lenient = read_bundle_with(dir.path(), Strictness::Lenient).unwrap();
        assert!((lenient.x[[0, 1]] - lenient.x[[1, 0]]).abs() < 1e-15);
    }

    #[test]
    fn analytic_farfield_survives_roundtrip() {
        let spec = crate::mom::DipoleArraySpec {
            dipoles: vec![crate::mom::DipoleElement {
                length: 0.15,
                radius: 0.0005,
                center: [0.0; 3],
                axis: [0.0, 0.0, 1.0],
            }],
            segments_per_dipole: 5,
            frequency: 1e9,
            conductivity: f64::INFINITY,
        };
        let sys = crate::mom::build_dipole_array(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&sys, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        let e = [0.0, 0.0, 1.0];
        let r = [1.0, 0.0, 0.0];
        let a = sys.farfield_row(e, r).unwrap();
        let b = back.farfield_row(e, r).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
    }
}
