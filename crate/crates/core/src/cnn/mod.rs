//! Multi-branch convolutional classifier.
//!
//! Every group of four grids (one singled-out mode) goes through its own
//! sub-network `conv 3×3 → ReLU → maxpool 2 → conv 3×3 → ReLU → maxpool 2 →
//! dense → ReLU`; the sub-network outputs are concatenated and classified by
//! a fully connected head ending in a softmax.

mod net;
mod train;

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::GRIDS_PER_GROUP;
use crate::rng::{self, tags};

pub use net::{features, forward_batch, gradient_check, loss_and_gradient, GradCheck, Real};
pub use train::{confusion_from_predictions, evaluate, predict, train, Adam, EpochRecord, EvalReport, TrainOptions, TrainReport};

pub const MODEL_MAGIC: &[u8; 4] = b"CVPM";
pub const MODEL_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloatWidth {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub train: FloatWidth,
    pub gradcheck: FloatWidth,
}

impl Default for Precision {
    fn default() -> Self {
        Precision { train: FloatWidth::F32, gradcheck: FloatWidth::F64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub parties: usize,
    pub in_channels: usize,
    pub grid_size: usize,
    pub convs: Vec<ConvSpec>,
    /// Width of each sub-network's output layer.
    pub sub_dense: usize,
    /// Hidden widths of the head; the class layer is appended.
    pub head: Vec<usize>,
    pub weight_sharing: bool,
    pub standardize: bool,
    pub precision: Precision,
    pub rng_seed: u64,
}

impl ModelConfig {
    pub fn new(parties: usize, rng_seed: u64) -> Self {
        ModelConfig {
            parties,
            in_channels: GRIDS_PER_GROUP,
            grid_size: 24,
            convs: vec![ConvSpec { out_channels: 16, kernel: 3, pool: 2 }, ConvSpec { out_channels: 32, kernel: 3, pool: 2 }],
            sub_dense: 128,
            head: vec![128],
            weight_sharing: false,
            standardize: true,
            precision: Precision::default(),
            rng_seed,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self.parties {
            3 => 3,
            _ => 5,
        }
    }

    pub fn n_subnets(&self) -> usize {
        if self.weight_sharing {
            1
        } else {
            self.parties
        }
    }

    pub fn group_len(&self) -> usize {
        self.in_channels * self.grid_size * self.grid_size
    }

    pub fn input_len(&self) -> usize {
        self.parties * self.group_len()
    }

    /// Spatial size after each conv/pool stage, input first.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.grid_size];
        for c in &self.convs {
            let last = *s.last().expect("nonempty");
            s.push(last / c.pool.max(1));
        }
        s
    }

    pub fn flatten_len(&self) -> usize {
        let s = *self.spatial_sizes().last().expect("nonempty");
        let c = self.convs.last().map_or(self.in_channels, |c| c.out_channels);
        c * s * s
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=4).contains(&self.parties) {
            return Err(Error::InvalidParameter(format!("parties = {}", self.parties)));
        }
        if self.in_channels == 0 || self.grid_size == 0 || self.sub_dense == 0 || self.head.contains(&0) {
            return Err(Error::InvalidParameter("zero-sized layer".into()));
        }
        let mut s = self.grid_size;
        for c in &self.convs {
            if c.out_channels == 0 || c.kernel % 2 == 0 || c.pool == 0 || s % c.pool != 0 {
                return Err(Error::InvalidParameter(format!("conv {c:?} on a {s}×{s} input")));
            }
            s /= c.pool;
        }
        Ok(())
    }

    /// Layout of the flat parameter vector.
    pub fn layout(&self) -> Result<Layout> {
        self.validate()?;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let sizes = self.spatial_sizes();
        let mut subnets = Vec::new();
        for _ in 0..self.n_subnets() {
            let mut convs = Vec::new();
            let mut cin = self.in_channels;
            for (l, c) in self.convs.iter().enumerate() {
                let w = take(c.out_channels * cin * c.kernel * c.kernel);
                let b = take(c.out_channels);
                convs.push(ConvLayout { cin, cout: c.out_channels, kernel: c.kernel, pool: c.pool, size: sizes[l], w, b });
                cin = c.out_channels;
            }
            let n_in = self.flatten_len();
            let dense = DenseLayout { n_in, n_out: self.sub_dense, w: take(n_in * self.sub_dense), b: take(self.sub_dense) };
            subnets.push(SubnetLayout { convs, dense });
        }
        let mut head = Vec::new();
        let mut n_in = self.parties * self.sub_dense;
        for &n_out in self.head.iter().chain([self.n_classes()].iter()) {
            head.push(DenseLayout { n_in, n_out, w: take(n_in * n_out), b: take(n_out) });
            n_in = n_out;
        }
        Ok(Layout { subnets, head, total: at })
    }

    pub fn n_params(&self) -> Result<usize> {
        Ok(self.layout()?.total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayout {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub pool: usize,
    /// Input height and width.
    pub size: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayout {
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubnetLayout {
    pub convs: Vec<ConvLayout>,
    pub dense: DenseLayout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub subnets: Vec<SubnetLayout>,
    pub head: Vec<DenseLayout>,
    pub total: usize,
}

impl Layout {
    /// `(name, offset, len, fan_in)` for every weight and bias block.
    pub fn blocks(&self) -> Vec<(String, usize, usize, usize)> {
        let mut out = Vec::new();
        for (s, sub) in self.subnets.iter().enumerate() {
            for (l, c) in sub.convs.iter().enumerate() {
                let fan = c.cin * c.kernel * c.kernel;
                out.push((format!("sub{s}.conv{l}.w"), c.w, c.cout * fan, fan));
                out.push((format!("sub{s}.conv{l}.b"), c.b, c.cout, fan));
            }
            let d = &sub.dense;
            out.push((format!("sub{s}.dense.w"), d.w, d.n_in * d.n_out, d.n_in));
            out.push((format!("sub{s}.dense.b"), d.b, d.n_out, d.n_in));
        }
        for (l, d) in self.head.iter().enumerate() {
            out.push((format!("head{l}.w"), d.w, d.n_in * d.n_out, d.n_in));
            out.push((format!("head{l}.b"), d.b, d.n_out, d.n_in));
        }
        out
    }
}

/// Per-slot input standardization `(x − mean) / std`, one slot per grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Standardization {
    pub fn identity(slots: usize) -> Self {
        Standardization { mean: vec![0.0; slots], std: vec![1.0; slots] }
    }

    /// Mean and standard deviation of every grid slot over `samples`.
    pub fn fit(samples: &[&[f32]], slots: usize) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidParameter("cannot standardize an empty set".into()));
        };
        let cells = first.len() / slots;
        let mut sum = vec![0.0f64; slots];
        let mut sq = vec![0.0f64; slots];
        for s in samples {
            for (k, g) in s.chunks(cells).enumerate() {
                for &v in g {
                    sum[k] += v as f64;
                    sq[k] += (v as f64) * (v as f64);
                }
            }
        }
        let n = (samples.len() * cells) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq.iter().zip(&mean).map(|(q, m)| ((q / n - m * m).max(0.0)).sqrt().max(1e-12) as f32).collect();
        Ok(Standardization { mean: mean.into_iter().map(|m| m as f32).collect(), std })
    }

    pub fn apply<T: Real>(&self, x: &[f32]) -> Vec<T> {
        let cells = x.len() / self.mean.len();
        x.chunks(cells)
            .zip(self.mean.iter().zip(&self.std))
            .flat_map(|(g, (&m, &s))| g.iter().map(move |&v| T::from_f64((v as f64 - m as f64) / s as f64)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub config: ModelConfig,
    pub params: Vec<f32>,
    pub standardization: Standardization,
}

impl ClassifierModel {
    /// He-uniform weights drawn from the config's seed, zero biases.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let layout = config.layout()?;
        let mut params = vec![0.0f32; layout.total];
        let mut rng = rng::stream(config.rng_seed, tags::INIT, 0);
        for (name, off, len, fan_in) in layout.blocks() {
            if name.ends_with(".w") {
                let a = (6.0 / fan_in as f64).sqrt();
                for p in &mut params[off..off + len] {
                    *p = rng.random_range(-a..a) as f32;
                }
            }
        }
        let slots = config.parties * config.in_channels;
        Ok(ClassifierModel { config, params, standardization: Standardization::identity(slots) })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let n = config.n_params()?;
        let slots = config.parties * config.in_channels;
        Ok(ClassifierModel { config, params: vec![0.0; n], standardization: Standardization::identity(slots) })
    }

    pub fn layout(&self) -> Layout {
        self.config.layout().expect("validated at construction")
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.config.input_len() {
            return Err(Error::InvalidDimension(format!("input of {} values, model expects {}", x.len(), self.config.input_len())));
        }
        Ok(())
    }

    /// Class probabilities of one raw (unstandardized) sample.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let z: Vec<f32> = self.standardization.apply(x);
        let p = forward_batch(&self.config, &self.layout(), &self.params, &[&z])?;
        Ok(p[0].iter().map(|&v| v as f64).collect())
    }

    /// Sub-network output vectors of one raw sample, one per group.
    pub fn features(&self, x: &[f32]) -> Result<Vec<Vec<f32>>> {
        self.check_input(x)?;
        let z: Vec<f32> = self.standardization.apply(x);
        features(&self.config, &self.layout(), &self.params, &z)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let cfg = serde_json::to_vec(&self.config)?;
        let mut out = Vec::with_capacity(16 + cfg.len() + 4 * (self.params.len() + 2 * self.standardization.mean.len()));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.standardization.mean.len() as u32).to_le_bytes());
        for v in self.standardization.mean.iter().chain(&self.standardization.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut at = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            if at + n > buf.len() {
                return Err(Error::Format(format!("truncated model file at byte {at}")));
            }
            let s = &buf[at..at + n];
            at += n;
            Ok(s)
        };
        if take(4)? != MODEL_MAGIC {
            return Err(Error::Format("not a CVPM model (bad magic)".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().expect("2"));
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let n = u32::from_le_bytes(take(4)?.try_into().expect("4")) as usize;
        let config: ModelConfig = serde_json::from_slice(take(n)?)?;
        let expected = config.n_params().map_err(|e| Error::Format(format!("model config: {e}")))?;
        let n_params = u64::from_le_bytes(take(8)?.try_into().expect("8")) as usize;
        if n_params != expected {
            return Err(Error::Format(format!("{n_params} parameters, config needs {expected}")));
        }
        let floats = |b: &[u8]| b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect::<Vec<_>>();
        let params = floats(take(4 * n_params)?);
        let slots = u32::from_le_bytes(take(4)?.try_into().expect("4")) as usize;
        if slots != config.parties * config.in_channels {
            return Err(Error::Format(format!("{slots} standardization slots")));
        }
        let mean = floats(take(4 * slots)?);
        let std = floats(take(4 * slots)?);
        if at != buf.len() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(ClassifierModel { config, params, standardization: Standardization { mean, std } })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests;
