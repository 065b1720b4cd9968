//! Field cache file format (all integers and floats little-endian):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 4     | magic `YMBF`                    |
//! | 4     | format version (`u32`, = 1)     |
//! | 16    | grid hash (ASCII hex)           |
//! | 8     | component count (`u64`)         |
//! | 8     | payload length in f64 (`u64`)   |
//! | 8·n   | payload (`f64`)                 |
//!
//! Solved fields are stored as polynomial coefficients, so the grid hash
//! identifies the monomial basis they refer to.

use crate::error::{Result, YmbError};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"YMBF";
pub const VERSION: u32 = 1;
pub const CACHE_ENV: &str = "YMB_CACHE_DIR";

#[derive(Clone, Debug, PartialEq)]
pub struct CachedField {
    pub grid_hash: String,
    pub components: u64,
    pub payload: Vec<f64>,
}

impl CachedField {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut gh = [b'0'; 16];
        let bytes = self.grid_hash.as_bytes();
        if bytes.len() > 16 {
            return Err(YmbError::Cache("grid hash longer than 16 bytes".into()));
        }
        gh[..bytes.len()].copy_from_slice(bytes);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&gh)?;
        w.write_all(&self.components.to_le_bytes())?;
        w.write_all(&(self.payload.len() as u64).to_le_bytes())?;
        for v in &self.payload {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(YmbError::Cache("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(YmbError::Cache(format!("unsupported version {version}")));
        }
        let mut gh = [0u8; 16];
        r.read_exact(&mut gh)?;
        let grid_hash = String::from_utf8(gh.to_vec()).map_err(|e| YmbError::Cache(e.to_string()))?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let components = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut payload = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            payload.push(f64::from_le_bytes(b8));
        }
        Ok(CachedField {
            grid_hash,
            components,
            payload,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// File name for a cache entry keyed by arbitrary strings.
pub fn cache_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    format!("{:x}.ymbf", h.finalize())
}

/// The cache directory from `YMB_CACHE_DIR`, if set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = CachedField {
            grid_hash: "0123456789abcdef".into(),
            components: 3,
            payload: vec![1.0, -2.5, f64::MIN_POSITIVE, 1e300],
        };
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        assert_eq!(buf.len(), 4 + 4 + 16 + 8 + 8 + 8 * 4);
        assert_eq!(CachedField::read_from(&buf[..]).unwrap(), f);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOPE\x01\x00\x00\x00".to_vec();
        assert!(CachedField::read_from(&buf[..]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(cache_key(&["a", "b"]));
        let f = CachedField {
            grid_hash: "abc".into(),
            components: 1,
            payload: vec![0.5],
        };
        f.save(&path).unwrap();
        let g = CachedField::load(&path).unwrap();
        assert_eq!(g.payload, f.payload);
        assert!(g.grid_hash.starts_with("abc"));
    }
}
