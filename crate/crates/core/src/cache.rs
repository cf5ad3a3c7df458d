//! On-disk cache for kernel tables.
//!
//! File layout (little endian): magic `LGK1`, `N: u32`, `a: f64`,
//! `policy: u8`, then N² G values and N² D values as `f64`, row-major.
//! A file that fails to parse or does not match the requested grid is
//! treated as absent and rewritten.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::spectral::{KernelTable, ZeroModePolicy};

pub const MAGIC: &[u8; 4] = b"LGK1";
const HEADER_LEN: usize = 4 + 4 + 8 + 1;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "LATGAUGE_CACHE";

pub fn encode(table: &KernelTable) -> Vec<u8> {
    let grid = table.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * grid.n_sites());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.a().to_le_bytes());
    out.push(table.policy().code());
    for v in table.g_values().iter().chain(table.d_values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<KernelTable> {
    let bad = |msg: &str| Error::Parse(format!("kernel cache: {msg}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing LGK1 header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let a = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let policy = ZeroModePolicy::from_code(bytes[16]).ok_or_else(|| bad("unknown policy"))?;
    let grid = GridSpec::new(n, a)?;
    let count = grid.n_sites();
    if bytes.len() != HEADER_LEN + 16 * count {
        return Err(bad("truncated or oversized payload"));
    }
    let floats: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if floats.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite kernel value"));
    }
    let (g, d) = floats.split_at(count);
    KernelTable::from_parts(grid, g.to_vec(), d.to_vec(), policy)
}

#[derive(Debug, Clone)]
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$LATGAUGE_CACHE`, else `$XDG_CACHE_HOME/latgauge`, else
    /// `$HOME/.cache/latgauge`, else the system temp dir.
    pub fn default_location() -> Self {
        if let Some(dir) = std::env::var_os(CACHE_ENV) {
            return Self::new(dir);
        }
        if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
            return Self::new(PathBuf::from(dir).join("latgauge"));
        }
        if let Some(home) = std::env::var_os("HOME") {
            return Self::new(PathBuf::from(home).join(".cache").join("latgauge"));
        }
        Self::new(std::env::temp_dir().join("latgauge"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, grid: &GridSpec, policy: ZeroModePolicy) -> PathBuf {
        self.dir.join(format!(
            "kernels_n{}_a{:016x}_p{}.lgk",
            grid.n(),
            grid.a().to_bits(),
            policy.code()
        ))
    }

    fn try_load(&self, path: &Path, grid: &GridSpec) -> Option<KernelTable> {
        let bytes = fs::read(path).ok()?;
        let table = decode(&bytes).ok()?;
        (table.grid() == grid && table.policy() == ZeroModePolicy::Exclude).then_some(table)
    }

    /// Loads the table for `grid`, rebuilding (and rewriting) it when the
    /// file is missing or unusable. Write failures are not fatal.
    pub fn load_or_build(&self, grid: GridSpec) -> Result<Arc<KernelTable>> {
        let path = self.path_for(&grid, ZeroModePolicy::Exclude);
        if let Some(table) = self.try_load(&path, &grid) {
            return Ok(Arc::new(table));
        }
        let table = KernelTable::build(grid)?;
        let _ = self.store(&path, &table);
        Ok(Arc::new(table))
    }

    fn store(&self, path: &Path, table: &KernelTable) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&encode(table))?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_is_bit_exact() {
        let grid = GridSpec::new(6, 0.75).unwrap();
        let table = KernelTable::build(grid).unwrap();
        let bytes = encode(&table);
        assert_eq!(&bytes[..4], b"LGK1");
        assert_eq!(bytes.len(), 17 + 16 * 36);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn corrupted_cache_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path());
        let grid = GridSpec::new(5, 1.0).unwrap();
        let fresh = cache.load_or_build(grid).unwrap();
        let path = cache.path_for(&grid, ZeroModePolicy::Exclude);
        assert!(path.exists());

        fs::write(&path, b"LGK1 garbage").unwrap();
        let rebuilt = cache.load_or_build(grid).unwrap();
        assert_eq!(*rebuilt, *fresh);
        assert_eq!(fs::read(&path).unwrap(), encode(&fresh));
    }

    #[test]
    fn decode_rejects_wrong_magic_and_length() {
        let grid = GridSpec::new(3, 1.0).unwrap();
        let mut bytes = encode(&KernelTable::build(grid).unwrap());
        bytes.pop();
        assert!(decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }
}
