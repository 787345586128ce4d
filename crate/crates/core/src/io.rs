//! On-disk artifacts: model snapshots, run manifests and run summaries.
//!
//! Snapshot layout (all integers and floats little-endian):
//!
//! ```text
//! b"ALFG"  u32 version  u64 input_dim  u64 hidden_dim  u64 classes  u32 activation
//! w1 (hidden*input f64)  b1 (hidden f64)  w2 (classes*hidden f64)  b2 (classes f64)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::al::TrialsResult;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, ModelParams};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"ALFG";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const HEADER_LEN: usize = 4 + 4 + 8 * 3 + 4;

pub fn encode_model(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.num_params());
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    for d in [params.input_dim(), params.hidden_dim(), params.classes()] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let act: u32 = match params.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    };
    out.extend_from_slice(&act.to_le_bytes());
    for v in params.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |m: String| Error::Snapshot(m);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..4] != SNAPSHOT_MAGIC {
        return Err(bad("missing ALFG magic bytes".to_string()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let dims: Vec<usize> = (0..3)
        .map(|i| {
            usize::try_from(u64_at(8 + 8 * i))
                .map_err(|_| bad("dimension overflows usize".to_string()))
        })
        .collect::<Result<_>>()?;
    let activation = match u32_at(32) {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        a => return Err(bad(format!("unknown activation code {a}"))),
    };
    let (d, h, j) = (dims[0], dims[1], dims[2]);
    if d == 0 || h == 0 || j == 0 {
        return Err(bad(format!("zero dimension in {d}x{h}x{j}")));
    }
    let count = h
        .checked_mul(d)
        .and_then(|a| a.checked_add(h))
        .and_then(|a| j.checked_mul(h).and_then(|b| a.checked_add(b)))
        .and_then(|a| a.checked_add(j))
        .ok_or_else(|| bad("parameter count overflows".to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != count.checked_mul(8) {
        return Err(bad(format!(
            "expected {count} parameters, found {} bytes",
            body.len()
        )));
    }
    let mut params = ModelParams::zeros(d, h, j, activation);
    for (slot, chunk) in params.iter_mut().zip(body.chunks_exact(8)) {
        *slot = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(params))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_model(&std::fs::read(path)?)
}

/// Everything needed to reproduce a run: the resolved configuration, the
/// artifact version, the seed, content hashes of the data and the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub outdir: PathBuf,
    pub config: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &ExperimentConfig,
        train_fp: String,
        test_fp: String,
        outdir: &Path,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed: config.al.seed,
            train_fingerprint: train_fp,
            test_fingerprint: test_fp,
            outdir: outdir.to_path_buf(),
            config: config.entries().into_iter().collect(),
        }
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        let pairs: Vec<(&String, &String)> = self.config.iter().collect();
        c.apply(&pairs)?;
        Ok(c)
    }

    /// Fails when the data rebuilt from the manifest no longer hashes the same.
    pub fn check_fingerprints(&self, train_fp: &str, test_fp: &str) -> Result<()> {
        if self.train_fingerprint != train_fp || self.test_fingerprint != test_fp {
            return Err(Error::invalid(format!(
                "dataset fingerprint mismatch: manifest has {}/{}, rebuilt data hashes to {train_fp}/{test_fp}",
                self.train_fingerprint, self.test_fingerprint
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Per-cycle mean and standard deviation across trials, plus the seeds used.
pub fn summary_json(strategy: &str, trials: &TrialsResult) -> serde_json::Value {
    let cycles: Vec<serde_json::Value> = trials
        .summary
        .iter()
        .map(|c| serde_json::to_value(c).expect("plain data"))
        .collect();
    serde_json::json!({
        "strategy": strategy,
        "seeds": trials.seeds,
        "truncated": trials.runs.iter().any(|r| r.truncated),
        "cycles": cycles,
    })
}
