//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! u64 N | f64 L | u64 n | f64 time
//! A0, A1, A2, phi: for each grid point (row-major, x1 fastest within a
//!     row of fixed x2) and each matrix entry (row-major), f64 re, f64 im
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::MonopoleConfig;
use crate::spectral::{GridSpec, MatrixField};

/// Writes one snapshot. `dt` is not part of the format.
pub fn write_snapshot(w: &mut impl Write, cfg: &MonopoleConfig, time: f64) -> Result<()> {
    let n = cfg.dim();
    w.write_all(&(cfg.grid.n as u64).to_le_bytes())?;
    w.write_all(&cfg.grid.length.to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for f in cfg.fields() {
        for p in 0..f.npts() {
            for i in 0..n {
                for j in 0..n {
                    let z = f.entry(i, j)[p];
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a snapshot; the returned grid carries `dt` as given.
pub fn read_snapshot(r: &mut impl Read, dt: f64) -> Result<(MonopoleConfig, f64)> {
    let big_n = read_u64(r)? as usize;
    let length = read_f64(r)?;
    let n = read_u64(r)? as usize;
    let time = read_f64(r)?;
    if n == 0 || n > 64 {
        return Err(Error::InvalidArgument(format!(
            "implausible matrix size {n}"
        )));
    }
    let grid = GridSpec::new(big_n, length, dt)?;
    let np = grid.points();
    let mut fields = Vec::with_capacity(4);
    for _ in 0..4 {
        let mut f = MatrixField::zeros(n, np);
        for p in 0..np {
            for i in 0..n {
                for j in 0..n {
                    let re = read_f64(r)?;
                    let im = read_f64(r)?;
                    f.entry_mut(i, j)[p] = Complex64::new(re, im);
                }
            }
        }
        fields.push(f);
    }
    let phi = fields.pop().unwrap();
    let a2 = fields.pop().unwrap();
    let a1 = fields.pop().unwrap();
    let a0 = fields.pop().unwrap();
    Ok((MonopoleConfig::new(grid, a0, a1, a2, phi)?, time))
}

pub fn save(path: &Path, cfg: &MonopoleConfig, time: f64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_snapshot(&mut w, cfg, time)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path, dt: f64) -> Result<(MonopoleConfig, f64)> {
    read_snapshot(&mut BufReader::new(fs::File::open(path)?), dt)
}

/// Writes `snap_00000.bin, ...` plus `manifest.txt` with one `key = value`
/// line per parameter followed by one `index time file` line per snapshot.
pub fn export_series<'a>(
    dir: &Path,
    snapshots: impl IntoIterator<Item = (f64, &'a MonopoleConfig)>,
    params: &[(String, String)],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (k, v) in params {
        manifest.push_str(&format!("{k} = {v}\n"));
    }
    manifest.push_str("# index time file\n");
    let mut paths = Vec::new();
    for (k, (t, cfg)) in snapshots.into_iter().enumerate() {
        let name = format!("snap_{k:05}.bin");
        let path = dir.join(&name);
        save(&path, cfg, t)?;
        manifest.push_str(&format!("{k} {t:.17e} {name}\n"));
        paths.push(path);
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Spectral;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let sp = Spectral::new(GridSpec::new(8, 3.0, 0.01).unwrap());
        let cfg = MonopoleConfig::random(&sp, 2, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &cfg, 0.25).unwrap();
        assert_eq!(buf.len(), 32 + 4 * 64 * 4 * 16);
        let (back, t) = read_snapshot(&mut buf.as_slice(), 0.01).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(back, cfg);
    }

    #[test]
    fn header_layout() {
        let cfg = MonopoleConfig::zeros(GridSpec::new(16, 2.0, 0.1).unwrap(), 3);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &cfg, 1.5).unwrap();
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 2.0);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 1.5);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let cfg = MonopoleConfig::zeros(GridSpec::new(8, 2.0, 0.1).unwrap(), 2);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &cfg, 0.0).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_snapshot(&mut buf.as_slice(), 0.1),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn series_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = MonopoleConfig::zeros(GridSpec::new(8, 2.0, 0.1).unwrap(), 2);
        let params = vec![("N".to_string(), "8".to_string())];
        let paths = export_series(dir.path(), [(0.0, &cfg), (0.1, &cfg)], &params).unwrap();
        assert_eq!(paths.len(), 2);
        let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(m.starts_with("N = 8\n"));
        assert!(m.contains("snap_00001.bin"));
        let (c, t) = load(&paths[1], 0.1).unwrap();
        assert_eq!(c, cfg);
        assert_eq!(t, 0.1);
    }
}
