//! On-disk cache of estimated bounds.
//!
//! One JSON file per key in the cache directory. The key covers the model
//! bytes, the input box bit patterns, the seed and every sampling/optimizer
//! setting, but not the output constraints of a specification, so several
//! properties over the same input region share one entry. Floats are written
//! in shortest round-trip form and read back exactly.
//!
//! Writes go to a temporary file in the same directory and are renamed into
//! place, so readers never observe a partial entry.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EstimateConfig, OutputBound};
use crate::onnx_runtime::Network;
use crate::optimizer::OptConfig;
use crate::sampler::InputBox;

pub const FORMAT_VERSION: u32 = 1;

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub model_sha256: String,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub seed: u64,
    pub samples_per_input: usize,
    pub optimizer: OptConfig,
}

impl CacheKey {
    pub fn new(net: &Network, bounds: &InputBox, seed: u64, cfg: &EstimateConfig) -> Self {
        CacheKey {
            model_sha256: to_hex(net.source_digest()),
            box_lo: bounds.lo().to_vec(),
            box_hi: bounds.hi().to_vec(),
            seed,
            samples_per_input: cfg.samples_per_input,
            optimizer: cfg.optimizer,
        }
    }

    /// Hex SHA-256 over every key field; used as the file name.
    pub fn file_stem(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"boxverify-bounds\0");
        h.update(FORMAT_VERSION.to_le_bytes());
        h.update(self.model_sha256.as_bytes());
        h.update((self.box_lo.len() as u64).to_le_bytes());
        for v in self.box_lo.iter().chain(&self.box_hi) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.seed.to_le_bytes());
        h.update((self.samples_per_input as u64).to_le_bytes());
        let o = &self.optimizer;
        h.update((o.memory as u64).to_le_bytes());
        h.update((o.max_iterations as u64).to_le_bytes());
        for v in [o.grad_tolerance, o.f_tolerance, o.fd_step] {
            h.update(v.to_bits().to_le_bytes());
        }
        to_hex(&h.finalize())
    }

    /// Field-by-field equality with float fields compared by bit pattern.
    fn same_as(&self, other: &CacheKey) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let obits = |o: &OptConfig| {
            (
                o.memory,
                o.max_iterations,
                o.grad_tolerance.to_bits(),
                o.f_tolerance.to_bits(),
                o.fd_step.to_bits(),
            )
        };
        self.model_sha256 == other.model_sha256
            && bits(&self.box_lo) == bits(&other.box_lo)
            && bits(&self.box_hi) == bits(&other.box_hi)
            && self.seed == other.seed
            && self.samples_per_input == other.samples_per_input
            && obits(&self.optimizer) == obits(&other.optimizer)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredBound {
    lo: f64,
    hi: f64,
    lo_witness: Vec<f64>,
    hi_witness: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    format_version: u32,
    key: CacheKey,
    outputs: Vec<StoredBound>,
    created_unix: u64,
}

#[derive(Debug, Clone)]
pub struct BoundsCache {
    dir: PathBuf,
}

impl BoundsCache {
    /// Opens (creating if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(BoundsCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.file_stem()))
    }

    /// `Ok(None)` on a miss; `Err` when an entry exists but cannot be used.
    pub fn load(&self, key: &CacheKey) -> io::Result<Option<Vec<OutputBound>>> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let invalid = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let entry: Entry = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if entry.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "{}: format version {} (expected {FORMAT_VERSION})",
                path.display(),
                entry.format_version
            )));
        }
        if !entry.key.same_as(key) {
            return Err(invalid(format!("{}: key fields do not match", path.display())));
        }
        let dim = key.box_lo.len();
        let mut outputs = Vec::with_capacity(entry.outputs.len());
        for b in entry.outputs {
            let ok = b.lo <= b.hi
                && b.lo.is_finite()
                && b.hi.is_finite()
                && b.lo_witness.len() == dim
                && b.hi_witness.len() == dim;
            if !ok {
                return Err(invalid(format!("{}: inconsistent bound record", path.display())));
            }
            outputs.push(OutputBound {
                lo: b.lo,
                hi: b.hi,
                lo_witness: b.lo_witness,
                hi_witness: b.hi_witness,
            });
        }
        Ok(Some(outputs))
    }

    pub fn store(&self, key: &CacheKey, outputs: &[OutputBound]) -> io::Result<()> {
        let entry = Entry {
            format_version: FORMAT_VERSION,
            key: key.clone(),
            outputs: outputs
                .iter()
                .map(|b| StoredBound {
                    lo: b.lo,
                    hi: b.hi,
                    lo_witness: b.lo_witness.clone(),
                    hi_witness: b.hi_witness.clone(),
                })
                .collect(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let json = serde_json::to_string_pretty(&entry).map_err(io::Error::other)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(json.as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_for(key)).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onnx_runtime::LayerOp;

    fn key() -> CacheKey {
        let net = Network::from_layers(2, vec![LayerOp::dense(vec![vec![1.0], vec![1.0]])]).unwrap();
        let b = InputBox::new(vec![-0.0, 0.1], vec![1.0, 0.3]).unwrap();
        CacheKey::new(&net, &b, 42, &EstimateConfig::default())
    }

    fn bound() -> OutputBound {
        OutputBound {
            lo: 0.1 + 0.2,
            hi: std::f64::consts::PI,
            lo_witness: vec![-0.0, 1.0 / 3.0],
            hi_witness: vec![1.0, 5e-324],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BoundsCache::open(dir.path()).unwrap();
        let k = key();
        assert_eq!(cache.load(&k).unwrap(), None);
        cache.store(&k, &[bound()]).unwrap();
        let loaded = cache.load(&k).unwrap().unwrap();
        assert_eq!(loaded.len(), 1);
        let (a, b) = (&loaded[0], bound());
        assert_eq!(a.lo.to_bits(), b.lo.to_bits());
        assert_eq!(a.hi.to_bits(), b.hi.to_bits());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.lo_witness), bits(&b.lo_witness));
        assert_eq!(bits(&a.hi_witness), bits(&b.hi_witness));
    }

    #[test]
    fn key_depends_on_every_field() {
        let base = key();
        let mut other = base.clone();
        other.seed += 1;
        assert_ne!(base.file_stem(), other.file_stem());
        let mut other = base.clone();
        other.box_lo[0] = 0.0; // +0.0 vs -0.0
        assert_ne!(base.file_stem(), other.file_stem());
        let mut other = base.clone();
        other.optimizer.fd_step *= 2.0;
        assert_ne!(base.file_stem(), other.file_stem());
    }

    #[test]
    fn corrupt_entry_is_an_error_not_a_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BoundsCache::open(dir.path()).unwrap();
        let k = key();
        fs::write(cache.path_for(&k), "{ not json").unwrap();
        assert!(cache.load(&k).is_err());
    }
}
