//! Label-preserving augmentation of pattern datasets: mode-permutation
//! relabeling and convex mixing of separable samples.
//!
//! Group `k` of a sample holds the patterns with mode `k` singled out, so
//! relabeling the modes by `π` moves group `k` to slot `π(k)`. The stored
//! axis order (singled, mixed) means no grid is transposed.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{dirichlet_weights, LabeledSample, Lineage, PartitionClass, PatternDataset, Provenance};
use crate::error::{Error, Result};
use crate::fock::check_perm;
use crate::homodyne::{PatternSet, GRIDS_PER_GROUP};
use crate::rng::{self, tags};

/// Tolerance on `Σ w = 1` for mixing weights.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModePermutation {
    mapping: Vec<usize>,
}

impl ModePermutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        if !(3..=4).contains(&mapping.len()) {
            return Err(Error::InvalidDimension(format!("permutation of {} modes", mapping.len())));
        }
        check_perm(&mapping, mapping.len())?;
        Ok(ModePermutation { mapping })
    }

    pub fn identity(parties: usize) -> Result<Self> {
        Self::new((0..parties).collect())
    }

    /// Every permutation of `parties` modes in lexicographic order; the
    /// identity comes first.
    pub fn all(parties: usize) -> Result<Vec<Self>> {
        let mut cur: Vec<usize> = (0..parties).collect();
        let mut out = vec![Self::new(cur.clone())?];
        while next_permutation(&mut cur) {
            out.push(ModePermutation { mapping: cur.clone() });
        }
        Ok(out)
    }

    pub fn parties(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &p)| i == p)
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn group_len(s: &LabeledSample, parties: usize) -> Result<usize> {
    let mismatch = || Error::InvalidDimension(format!("sample with {} values is not a {parties}-party pattern set", s.grids.len()));
    if s.grids.len() % (parties * GRIDS_PER_GROUP) != 0 {
        return Err(mismatch());
    }
    let g = s.grids.len() / parties;
    let cells = g / GRIDS_PER_GROUP;
    let n = (cells as f64).sqrt().round() as usize;
    if n == 0 || n * n != cells {
        return Err(mismatch());
    }
    s.label.index(parties).map_err(|_| mismatch())?;
    Ok(g)
}

/// Relabel the modes of `s` by `π`; `parent` is recorded in the lineage.
pub fn permute_sample(s: &LabeledSample, pi: &ModePermutation, parent: usize) -> Result<LabeledSample> {
    let parties = pi.parties();
    let g = group_len(s, parties)?;
    let mut grids = vec![0.0f32; s.grids.len()];
    for (k, &p) in pi.mapping.iter().enumerate() {
        grids[p * g..(p + 1) * g].copy_from_slice(&s.grids[k * g..(k + 1) * g]);
    }
    let provenance = Provenance {
        partition: s.provenance.partition.as_ref().map(|p| p.permuted(&pi.mapping)),
        lineage: Lineage::Permuted { parent, perm: pi.mapping.clone() },
        ..s.provenance.clone()
    };
    Ok(LabeledSample { label: s.label, grids, provenance })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n || n == 0 {
        return Err(Error::InvalidParameter(format!("{} weights for {n} inputs", weights.len())));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!("weights must be positive: {weights:?}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidParameter(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// `Σ w_i · patterns_i` at full precision.
pub fn convex_mix_patterns(parts: &[(f64, &PatternSet)]) -> Result<PatternSet> {
    let weights: Vec<f64> = parts.iter().map(|p| p.0).collect();
    check_weights(&weights, parts.len())?;
    let mut out = PatternSet::zeros(parts[0].1.parties, parts[0].1.grid);
    for (w, ps) in parts {
        out.add_scaled(*w, ps)?;
    }
    Ok(out)
}

/// Convex mixture of samples. Inputs must all be FULLY_SEP, or, with
/// `allow_partitioned`, share one structured class and concrete partition.
pub fn convex_mix_samples(samples: &[&LabeledSample], weights: &[f64], parents: &[usize], allow_partitioned: bool) -> Result<LabeledSample> {
    check_weights(weights, samples.len())?;
    if parents.len() != samples.len() {
        return Err(Error::InvalidParameter(format!("{} parent indices for {} samples", parents.len(), samples.len())));
    }
    let first = samples[0];
    let label = first.label;
    if samples.iter().any(|s| s.label != label) {
        return Err(Error::InvalidParameter("cannot mix samples of different classes".into()));
    }
    match label {
        PartitionClass::FullySep => {}
        PartitionClass::FullyInsep => return Err(Error::InvalidParameter("FULLY_INSEP samples cannot be mixed".into())),
        _ if !allow_partitioned => return Err(Error::InvalidParameter(format!("mixing {} samples is not enabled", label.name()))),
        _ => {
            let part = &first.provenance.partition;
            if part.is_none() || samples.iter().any(|s| &s.provenance.partition != part) {
                return Err(Error::InvalidParameter(format!("{} samples must share one known partition", label.name())));
            }
        }
    }
    let len = first.grids.len();
    if samples.iter().any(|s| s.grids.len() != len) {
        return Err(Error::InvalidDimension("samples differ in shape".into()));
    }
    let mut acc = vec![0.0f64; len];
    for (s, &w) in samples.iter().zip(weights) {
        for (a, &v) in acc.iter_mut().zip(&s.grids) {
            *a += w * v as f64;
        }
    }
    let parties = first.provenance.partition.as_ref().map(|p| p.n_modes());
    let min_mass = parties
        .or_else(|| [3, 4].into_iter().find(|&p| group_len(first, p).is_ok()))
        .map(|p| {
            let cells = len / (p * GRIDS_PER_GROUP);
            acc.chunks(cells).map(|g| g.iter().sum::<f64>()).fold(f64::INFINITY, f64::min)
        });
    let provenance = Provenance {
        rng_seed: first.provenance.rng_seed,
        mixture_arity: samples.iter().map(|s| s.provenance.mixture_arity).sum(),
        weights: weights.to_vec(),
        partition: first.provenance.partition.clone(),
        rejected_seeds: 0,
        circuit_retries: 0,
        min_mass,
        lineage: Lineage::Mixed { parents: parents.to_vec(), weights: weights.to_vec() },
    };
    Ok(LabeledSample { label, grids: acc.into_iter().map(|v| v as f32).collect(), provenance })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AugmentOp {
    Permute,
    ConvexMix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub ops: Vec<AugmentOp>,
    pub target_factor: usize,
    /// Components per convex mix, the parent included.
    pub mix_arity: usize,
    /// Share of a mixable class's new samples made by mixing when both
    /// operations are enabled.
    pub mix_fraction: f64,
    /// Also mix structured classes within one concrete partition.
    pub allow_partitioned_mixing: bool,
    pub rng_seed: u64,
}

impl AugmentationPlan {
    pub fn permute(target_factor: usize, rng_seed: u64) -> Self {
        AugmentationPlan {
            ops: vec![AugmentOp::Permute],
            target_factor,
            mix_arity: 2,
            mix_fraction: 0.5,
            allow_partitioned_mixing: false,
            rng_seed,
        }
    }

    pub fn has(&self, op: AugmentOp) -> bool {
        self.ops.contains(&op)
    }

    fn mixable(&self, c: PartitionClass) -> bool {
        self.has(AugmentOp::ConvexMix)
            && match c {
                PartitionClass::FullySep => true,
                PartitionClass::FullyInsep => false,
                _ => self.allow_partitioned_mixing,
            }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_factor == 0 {
            return Err(Error::InvalidParameter("augmentation factor must be at least 1".into()));
        }
        if self.ops.is_empty() && self.target_factor > 1 {
            return Err(Error::InvalidParameter("no augmentation operations selected".into()));
        }
        if self.has(AugmentOp::ConvexMix) && self.mix_arity < 2 {
            return Err(Error::InvalidParameter(format!("mix arity {} < 2", self.mix_arity)));
        }
        if !(0.0..=1.0).contains(&self.mix_fraction) {
            return Err(Error::InvalidParameter(format!("mix fraction {}", self.mix_fraction)));
        }
        Ok(())
    }

    /// Largest factor reachable on `ds` with every class grown equally.
    pub fn attainable_factor(&self, ds: &PatternDataset) -> usize {
        let counts = ds.class_counts();
        let classes = PartitionClass::all(ds.parties).unwrap_or(&[]);
        let present = classes.iter().zip(&counts).filter(|(_, &n)| n > 0).map(|(c, _)| *c);
        let mut cap = usize::MAX;
        for c in present {
            let mut class_cap = 1;
            if self.has(AugmentOp::Permute) {
                class_cap = factorial(ds.parties);
            }
            if self.mixable(c) && (self.mix_fraction > 0.0 || !self.has(AugmentOp::Permute)) {
                class_cap = usize::MAX;
            }
            cap = cap.min(class_cap);
        }
        cap
    }
}

enum Extra {
    Perm(usize),
    Mix,
}

/// Originals first, unchanged, then each parent's new samples in parent order.
pub fn augment_dataset(ds: &PatternDataset, plan: &AugmentationPlan) -> Result<PatternDataset> {
    plan.validate()?;
    let mut out = ds.clone();
    out.history.push(serde_json::json!({ "augment": plan }));
    let f = plan.target_factor;
    if f == 1 || ds.is_empty() {
        return Ok(out);
    }
    let attainable = plan.attainable_factor(ds);
    if f > attainable {
        return Err(Error::UnattainableFactor { requested: f, attainable });
    }
    let parties = ds.parties;
    let perms = ModePermutation::all(parties)?;
    let n_perm = perms.len() - 1;
    let labels = ds.labels();
    let classes = PartitionClass::all(parties)?;

    // per parent: how many of its f-1 new samples are mixes
    let mut n_mix = vec![0usize; ds.len()];
    for (c, class) in classes.iter().enumerate() {
        if !plan.mixable(*class) {
            continue;
        }
        let members: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == c).collect();
        let extras = members.len() * (f - 1);
        let total = if plan.has(AugmentOp::Permute) {
            let wanted = (plan.mix_fraction * extras as f64).round() as usize;
            wanted.max(extras.saturating_sub(members.len() * n_perm))
        } else {
            extras
        };
        for (j, &i) in members.iter().enumerate() {
            n_mix[i] = total / members.len() + usize::from(j < total % members.len());
        }
    }

    let job = |i: usize| -> Result<Vec<LabeledSample>> {
        let mut rng = rng::stream(plan.rng_seed, tags::AUGMENT, i as u64);
        let s = &ds.samples[i];
        let k_perm = f - 1 - n_mix[i];
        let mut plan_i: Vec<Extra> = if k_perm == n_perm {
            (1..=n_perm).map(Extra::Perm).collect()
        } else {
            let ids: Vec<usize> = (1..=n_perm).collect();
            ids.choose_multiple(&mut rng, k_perm).map(|&p| Extra::Perm(p)).collect()
        };
        plan_i.extend((0..n_mix[i]).map(|_| Extra::Mix));
        let mut made = Vec::with_capacity(plan_i.len());
        for e in plan_i {
            match e {
                Extra::Perm(p) => made.push(permute_sample(s, &perms[p], i)?),
                Extra::Mix => {
                    let pool: Vec<usize> = (0..ds.len())
                        .filter(|&j| j != i && labels[j] == labels[i] && (s.label == PartitionClass::FullySep || ds.samples[j].provenance.partition == s.provenance.partition))
                        .collect();
                    if pool.is_empty() {
                        return Err(Error::UnattainableFactor { requested: f, attainable: 1 });
                    }
                    let mut parents = vec![i];
                    parents.extend(pool.choose_multiple(&mut rng, plan.mix_arity - 1).copied());
                    let weights = dirichlet_weights(parents.len(), &mut rng);
                    let inputs: Vec<&LabeledSample> = parents.iter().map(|&j| &ds.samples[j]).collect();
                    made.push(convex_mix_samples(&inputs, &weights, &parents, plan.allow_partitioned_mixing)?);
                }
            }
        }
        Ok(made)
    };
    #[cfg(feature = "parallel")]
    let extras = {
        use rayon::prelude::*;
        (0..ds.len()).into_par_iter().map(job).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let extras = (0..ds.len()).map(job).collect::<Result<Vec<_>>>()?;
    out.samples.extend(extras.into_iter().flatten());
    Ok(out)
}
