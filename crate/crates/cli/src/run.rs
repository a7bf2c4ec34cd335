//! Resolved per-command configs, written next to every output.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cvent_core::cnn::TrainOptions;
use cvent_core::dataset::DatasetConfig;
use cvent_core::qda::AugmentationPlan;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenRun {
    pub dataset: DatasetConfig,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitRun {
    pub input: PathBuf,
    pub fraction: f64,
    pub seed: u64,
    pub first: PathBuf,
    pub second: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AugmentRun {
    pub input: PathBuf,
    pub out: PathBuf,
    pub plan: AugmentationPlan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainRun {
    pub data: Option<PathBuf>,
    pub train_fraction: f64,
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub val_fraction: f64,
    pub seed: u64,
    pub weight_sharing: bool,
    pub standardize: bool,
    pub options: TrainOptions,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRun {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InspectRun {
    pub data: PathBuf,
    pub index: usize,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    GenDataset(GenRun),
    Split(SplitRun),
    Augment(AugmentRun),
    Train(TrainRun),
    Eval(EvalRun),
    Inspect(InspectRun),
}

impl RunConfig {
    pub fn canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("run configs serialize")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical_json());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Write `<path>.run.json`.
    pub fn write_next_to(&self, path: &Path) -> Result<()> {
        let mut p = path.as_os_str().to_owned();
        p.push(".run.json");
        let p = PathBuf::from(p);
        std::fs::write(&p, serde_json::to_vec_pretty(self)?).with_context(|| format!("writing {}", p.display()))
    }
}
