//! Adam training with early stopping, prediction and evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{argmax, batch_step, forward_batch};
use super::{ClassifierModel, Standardization};
use crate::dataset::{PartitionClass, PatternDataset};
use crate::error::{Error, Result};
use crate::rng::{self, tags};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub shuffle_seed: u64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, batch_size: 64, max_epochs: 100, patience: 10, shuffle_seed: 0, max_steps: None }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("training options {self:?}")));
        }
        Ok(())
    }
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f32>,
    v: Vec<f32>,
}

impl Adam {
    pub fn new(n: usize, opts: &TrainOptions) -> Self {
        Adam { lr: opts.lr, beta1: opts.beta1, beta2: opts.beta2, eps: opts.eps, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32]) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let lr = (self.lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * *m / (v.sqrt() + eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub accuracy: f64,
    pub class_names: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized `counts`; a class absent from the data has a zero row.
    pub confusion: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn confusion_csv(&self) -> String {
        let mut s = format!("true\\predicted,{}\n", self.class_names.join(","));
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: super::ModelConfig,
    pub options: TrainOptions,
    pub n_train: usize,
    pub n_val: usize,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub steps: usize,
    pub stopped_early: bool,
    pub test: Option<EvalReport>,
    pub wall_time_s: f64,
}

fn class_names(parties: usize) -> Vec<String> {
    PartitionClass::all(parties).map(|cs| cs.iter().map(|c| c.name().to_string()).collect()).unwrap_or_default()
}

pub fn confusion_from_predictions(parties: usize, truth: &[usize], pred: &[usize]) -> Result<EvalReport> {
    let k = PartitionClass::n_classes(parties)?;
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(Error::InvalidParameter(format!("{} labels and {} predictions", truth.len(), pred.len())));
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidParameter(format!("class index out of range ({t}, {p})")));
        }
        counts[t][p] += 1;
    }
    let correct: usize = (0..k).map(|i| counts[i][i]).sum();
    let confusion = counts
        .iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
        })
        .collect();
    Ok(EvalReport { n_samples: truth.len(), accuracy: correct as f64 / truth.len() as f64, class_names: class_names(parties), counts, confusion })
}

fn check_parties(model: &ClassifierModel, ds: &PatternDataset) -> Result<()> {
    if ds.parties != model.config.parties {
        return Err(Error::InvalidParameter(format!("{}-party data for a {}-party model", ds.parties, model.config.parties)));
    }
    if ds.sample_len() != model.config.input_len() {
        return Err(Error::InvalidDimension(format!("samples of {} values, model expects {}", ds.sample_len(), model.config.input_len())));
    }
    Ok(())
}

fn standardized(model: &ClassifierModel, ds: &PatternDataset) -> Vec<Vec<f32>> {
    ds.samples.iter().map(|s| model.standardization.apply(&s.grids)).collect()
}

fn probabilities(model: &ClassifierModel, xs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    let refs: Vec<&[f32]> = xs.iter().map(Vec::as_slice).collect();
    forward_batch(&model.config, &model.layout(), &model.params, &refs)
}

/// Predicted class index of every sample.
pub fn predict(model: &ClassifierModel, ds: &PatternDataset) -> Result<Vec<usize>> {
    check_parties(model, ds)?;
    Ok(probabilities(model, &standardized(model, ds))?.iter().map(|p| argmax(p)).collect())
}

pub fn evaluate(model: &ClassifierModel, ds: &PatternDataset) -> Result<EvalReport> {
    let pred = predict(model, ds)?;
    confusion_from_predictions(ds.parties, &ds.labels(), &pred)
}

fn loss_and_accuracy(model: &ClassifierModel, xs: &[Vec<f32>], labels: &[usize]) -> Result<(f64, f64)> {
    let probs = probabilities(model, xs)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, &l) in probs.iter().zip(labels) {
        loss -= (p[l] as f64).max(f64::MIN_POSITIVE).ln();
        correct += usize::from(argmax(p) == l);
    }
    let n = labels.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Train from `model`'s current parameters. With a validation set the
/// parameters of the best validation-loss epoch are returned.
pub fn train(model: ClassifierModel, train_ds: &PatternDataset, val_ds: Option<&PatternDataset>, opts: &TrainOptions, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<(ClassifierModel, TrainReport)> {
    opts.validate()?;
    let start = Instant::now();
    let mut model = model;
    check_parties(&model, train_ds)?;
    if let Some(v) = val_ds {
        check_parties(&model, v)?;
    }
    if train_ds.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let slots = model.config.parties * model.config.in_channels;
    model.standardization = if model.config.standardize {
        let raw: Vec<&[f32]> = train_ds.samples.iter().map(|s| s.grids.as_slice()).collect();
        Standardization::fit(&raw, slots)?
    } else {
        Standardization::identity(slots)
    };
    let layout = model.layout();
    let xs = standardized(&model, train_ds);
    let ys = train_ds.labels();
    let val = val_ds.map(|v| (standardized(&model, v), v.labels()));

    let mut adam = Adam::new(model.params.len(), opts);
    let mut best: Option<(f64, Vec<f32>, usize)> = None;
    let mut epochs = Vec::new();
    let mut wait = 0;
    let mut steps = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    'outer: for epoch in 0..opts.max_epochs {
        let mut rng = rng::stream(opts.shuffle_seed, tags::SHUFFLE, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
        for batch in order.chunks(opts.batch_size) {
            let inputs: Vec<&[f32]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, grad, c) = batch_step(&model.config, &layout, &model.params, &inputs, &labels).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("epoch {epoch}, step {steps}: {m}")),
                other => other,
            })?;
            adam.step(&mut model.params, &grad);
            steps += 1;
            loss_sum += loss * batch.len() as f64;
            correct += c;
            seen += batch.len();
            if opts.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
        }
        let mut rec = EpochRecord { epoch, train_loss: loss_sum / seen as f64, train_accuracy: correct as f64 / seen as f64, val_loss: None, val_accuracy: None };
        if let Some((vx, vy)) = &val {
            let (l, a) = loss_and_accuracy(&model, vx, vy)?;
            rec.val_loss = Some(l);
            rec.val_accuracy = Some(a);
            if best.as_ref().is_none_or(|b| l < b.0) {
                best = Some((l, model.params.clone(), epoch));
                wait = 0;
            } else {
                wait += 1;
            }
        }
        on_epoch(&rec);
        epochs.push(rec);
        if opts.max_steps.is_some_and(|m| steps >= m) {
            break 'outer;
        }
        if val.is_some() && wait >= opts.patience {
            stopped_early = true;
            break;
        }
    }
    let best_epoch = match best {
        Some((_, params, e)) => {
            model.params = params;
            e
        }
        None => epochs.len() - 1,
    };
    let report = TrainReport {
        model: model.config.clone(),
        options: opts.clone(),
        n_train: train_ds.len(),
        n_val: val_ds.map_or(0, PatternDataset::len),
        epochs,
        best_epoch,
        steps,
        stopped_early,
        test: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}
