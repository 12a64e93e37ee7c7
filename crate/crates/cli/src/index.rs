use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.80, val: 0.05, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CliError> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 || self.train < 0.0 || self.val < 0.0 || self.test < 0.0 {
            return Err(CliError::BadArgument(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub motion_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_path: Option<PathBuf>,
    pub text: String,
    pub num_frames: usize,
    pub fps: f64,
    pub split: Split,
    pub source: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetIndex {
    pub records: Vec<IndexRecord>,
}

/// Split assignment is a pure function of (id, seed, ratios): stable across
/// runs, machines, and file order.
pub fn assign_split(id: &str, seed: u64, ratios: &SplitRatios) -> Split {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for &b in id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    // Finalizer (splitmix64): FNV alone mixes sequential ids poorly.
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58476d1ce4e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d049bb133111eb);
    h ^= h >> 31;
    // Map to [0, 1) with 53 bits of entropy.
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    if u < ratios.train {
        Split::Train
    } else if u < ratios.train + ratios.val {
        Split::Val
    } else {
        Split::Test
    }
}

impl DatasetIndex {
    /// Loads a JSONL index. In strict mode a missing referenced file is an
    /// error; in lenient mode missing paths are returned alongside the index.
    pub fn load(path: &Path, lenient: bool) -> Result<(DatasetIndex, Vec<String>), CliError> {
        let f = std::fs::File::open(path)?;
        let mut records = Vec::new();
        let mut ids = HashSet::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: IndexRecord = serde_json::from_str(&line).map_err(|e| {
                CliError::BadIndex(format!("line {}: {e}", lineno + 1))
            })?;
            if !ids.insert(rec.id.clone()) {
                return Err(CliError::BadIndex(format!("duplicate id {:?}", rec.id)));
            }
            records.push(rec);
        }
        let root = path.parent().unwrap_or(Path::new("."));
        let mut missing = Vec::new();
        for rec in &records {
            let mut check = |p: &Path| {
                let full = if p.is_absolute() { p.to_path_buf() } else { root.join(p) };
                if !full.exists() {
                    missing.push(full.display().to_string());
                }
            };
            check(&rec.motion_path);
            if let Some(tp) = &rec.token_path {
                check(tp);
            }
        }
        missing.sort();
        if !missing.is_empty() && !lenient {
            return Err(CliError::MissingFiles(missing));
        }
        Ok((DatasetIndex { records }, missing))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut f = std::fs::File::create(path)?;
        for rec in &self.records {
            writeln!(f, "{}", serde_json::to_string(rec)?)?;
        }
        Ok(())
    }

    /// Reassigns every record's split from its id hash.
    pub fn assign_splits(&mut self, seed: u64, ratios: &SplitRatios) -> Result<(), CliError> {
        ratios.validate()?;
        for rec in &mut self.records {
            rec.split = assign_split(&rec.id, seed, ratios);
        }
        Ok(())
    }
}
