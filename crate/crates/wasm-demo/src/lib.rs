//! Browser bindings: draw a labeled sample and its correlation patterns,
//! relabel its modes, and watch a two-mode squeezed state lose entanglement.

use wasm_bindgen::prelude::*;

use cvent_core::dataset::{draw_sample, quantize, sample_patterns, LabeledSample, PartitionClass, Provenance};
use cvent_core::density::DensityMatrix;
use cvent_core::fock::PureStateVector;
use cvent_core::homodyne::{pair_grids, QuadGrid};
use cvent_core::qda::{permute_sample, ModePermutation};
use cvent_core::rng;
use cvent_core::stellar::{negativity, SeedConfig};
use cvent_core::C64;

fn js(e: cvent_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Sample {
    inner: LabeledSample,
    parties: usize,
    n_bins: usize,
}

#[wasm_bindgen]
impl Sample {
    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn label(&self) -> String {
        self.inner.label.name().to_string()
    }

    pub fn partition(&self) -> String {
        self.inner.provenance.partition.as_ref().map(|p| p.to_string()).unwrap_or_default()
    }

    /// `parties × 4` grids of `n_bins²` values, group-major.
    pub fn grids(&self) -> Vec<f32> {
        self.inner.grids.clone()
    }
}

/// Draw one sample of class `class_index` at a small cutoff.
#[wasm_bindgen]
pub fn generate(parties: usize, class_index: usize, seed: u32, cutoff: usize) -> Result<Sample, JsError> {
    let label = PartitionClass::from_index(parties, class_index).map_err(js)?;
    let mut cfg = SeedConfig::default_for(parties).map_err(js)?;
    cfg.cutoff = cutoff;
    cfg.working_pad = 4;
    cfg.leak_tol = 0.1;
    cfg.validate().map_err(js)?;
    let grid = QuadGrid::default();
    let mut r = rng::from_seed(seed as u64);
    let draw = draw_sample(label, parties, &cfg, 2, &mut r).map_err(js)?;
    let ps = sample_patterns(&draw, &grid).map_err(js)?;
    let structured = label != PartitionClass::FullySep && label != PartitionClass::FullyInsep;
    let inner = LabeledSample {
        label,
        grids: quantize(&ps),
        provenance: Provenance { partition: structured.then(|| draw.partition.clone()), ..Provenance::unknown() },
    };
    Ok(Sample { inner, parties, n_bins: grid.n_bins })
}

/// Relabel mode `l` as `perm[l]`.
#[wasm_bindgen]
pub fn permute(sample: &Sample, perm: Vec<u32>) -> Result<Sample, JsError> {
    let pi = ModePermutation::new(perm.into_iter().map(|p| p as usize).collect()).map_err(js)?;
    let inner = permute_sample(&sample.inner, &pi, 0).map_err(js)?;
    Ok(Sample { inner, parties: sample.parties, n_bins: sample.n_bins })
}

#[wasm_bindgen]
pub struct TwoMode {
    negativity: f64,
    lossless: f64,
    grids: Vec<f32>,
    n_bins: usize,
}

#[wasm_bindgen]
impl TwoMode {
    pub fn negativity(&self) -> f64 {
        self.negativity
    }

    /// `(e^{2s} − 1)/2`, the negativity without loss and truncation.
    pub fn lossless(&self) -> f64 {
        self.lossless
    }

    /// XX, XP, PX, PP grids of the two modes.
    pub fn grids(&self) -> Vec<f32> {
        self.grids.clone()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
}

/// Two-mode squeezed vacuum of squeezing `s`, both modes sent through loss
/// of transmissivity `eta`.
#[wasm_bindgen]
pub fn two_mode_squeezed(s: f64, eta: f64, cutoff: usize) -> Result<TwoMode, JsError> {
    if !(2..=12).contains(&cutoff) {
        return Err(JsError::new("cutoff must be in 2..=12"));
    }
    let t = s.tanh();
    let mut amps = vec![C64::new(0.0, 0.0); cutoff * cutoff];
    for n in 0..cutoff {
        amps[n * cutoff + n] = C64::new(t.powi(n as i32) / s.cosh(), 0.0);
    }
    let psi = PureStateVector::new(vec![cutoff, cutoff], amps).map_err(js)?;
    let rho = DensityMatrix::from_pure(&psi).apply_loss(0, eta).and_then(|r| r.apply_loss(1, eta)).map_err(js)?;
    let grid = QuadGrid::default();
    let grids = pair_grids(&rho, &grid).map_err(js)?.into_iter().flatten().map(|v| v as f32).collect();
    Ok(TwoMode { negativity: negativity(&rho, &[0]).map_err(js)?, lossless: ((2.0 * s).exp() - 1.0) / 2.0, grids, n_bins: grid.n_bins })
}
