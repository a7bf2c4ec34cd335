//! Labeled pattern datasets, one class per multi-partition structure.
//!
//! A sample of class `S` is a mixture of `k ~ U{1..k_max}` components with
//! flat-Dirichlet weights. Every component is a tensor product of seeds laid
//! out on one concrete partition of the modes (drawn once per sample), with
//! every multimode seed certified fully inseparable.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::homodyne::{pattern_set_from_density, PatternSet, QuadGrid, GRIDS_PER_GROUP};
use crate::rng::{self, tags, Rng};
use crate::stellar::{sample_verified_seed, InseparabilityCertificate, SeedConfig};

pub const DEFAULT_K_MAX: usize = 4;
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartitionClass {
    /// `1⊗1⊗1` or `1⊗1⊗1⊗1`
    FullySep,
    /// `1⊗2`
    Bisep,
    /// `1⊗1⊗2`
    Trisep,
    /// `2⊗2`
    Bisep22,
    /// `1⊗3`
    Bisep13,
    FullyInsep,
}

impl PartitionClass {
    /// Classes in label order.
    pub fn all(parties: usize) -> Result<&'static [PartitionClass]> {
        use PartitionClass::*;
        match parties {
            3 => Ok(&[FullySep, Bisep, FullyInsep]),
            4 => Ok(&[FullySep, Trisep, Bisep22, Bisep13, FullyInsep]),
            _ => Err(Error::InvalidParameter(format!("{parties} parties (expected 3 or 4)"))),
        }
    }

    pub fn n_classes(parties: usize) -> Result<usize> {
        Ok(Self::all(parties)?.len())
    }

    pub fn index(self, parties: usize) -> Result<usize> {
        Self::all(parties)?
            .iter()
            .position(|&c| c == self)
            .ok_or_else(|| Error::InvalidParameter(format!("{self:?} is not a {parties}-party class")))
    }

    pub fn from_index(parties: usize, index: usize) -> Result<Self> {
        Self::all(parties)?
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("label {index} for {parties} parties")))
    }

    /// Subsystem sizes of the tensor-product structure.
    pub fn block_sizes(self, parties: usize) -> Vec<usize> {
        use PartitionClass::*;
        match self {
            FullySep => vec![1; parties],
            Bisep => vec![1, 2],
            Trisep => vec![1, 1, 2],
            Bisep22 => vec![2, 2],
            Bisep13 => vec![1, 3],
            FullyInsep => vec![parties],
        }
    }

    pub fn name(self) -> &'static str {
        use PartitionClass::*;
        match self {
            FullySep => "FULLY_SEP",
            Bisep => "BISEP",
            Trisep => "TRISEP",
            Bisep22 => "BISEP_22",
            Bisep13 => "BISEP_13",
            FullyInsep => "FULLY_INSEP",
        }
    }

    /// `1⊗2`-style structure string.
    pub fn structure(self, parties: usize) -> String {
        self.block_sizes(parties).iter().map(|s| s.to_string()).collect::<Vec<_>>().join("⊗")
    }
}

/// A concrete partition of the modes into blocks, e.g. `A|BC`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Uniformly random partition with the given block sizes; blocks follow
    /// the size order given, equal-size blocks ordered by smallest mode.
    pub fn random(sizes: &[usize], rng: &mut Rng) -> Self {
        let n: usize = sizes.iter().sum();
        let mut modes: Vec<usize> = (0..n).collect();
        modes.shuffle(rng);
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &s in sizes {
            let mut b = modes[at..at + s].to_vec();
            b.sort_unstable();
            blocks.push(b);
            at += s;
        }
        Partition { blocks }.canonical()
    }

    pub fn canonical(mut self) -> Self {
        for b in &mut self.blocks {
            b.sort_unstable();
        }
        self.blocks.sort_by_key(|b| (b.len(), b[0]));
        self
    }

    pub fn n_modes(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Mode permutation sending the concatenated block order to the labels.
    pub fn layout(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// Relabel every mode `l` as `perm[l]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Partition { blocks: self.blocks.iter().map(|b| b.iter().map(|&l| perm[l]).collect()).collect() }.canonical()
    }
}

fn mode_letter(l: usize) -> char {
    (b'A' + l as u8) as char
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|b| b.iter().map(|&l| mode_letter(l)).collect()).collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// How a sample came to be.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Lineage {
    Original,
    Permuted { parent: usize, perm: Vec<usize> },
    Mixed { parents: Vec<usize>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rng_seed: u64,
    pub mixture_arity: usize,
    pub weights: Vec<f64>,
    pub partition: Option<Partition>,
    /// Multimode seeds rejected by the inseparability check.
    pub rejected_seeds: usize,
    /// Circuits redrawn for exceeding the leakage tolerance.
    pub circuit_retries: usize,
    /// Smallest on-grid mass over the sample's grids, when known.
    pub min_mass: Option<f64>,
    pub lineage: Lineage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub label: PartitionClass,
    /// `parties × 4 × n_bins²` grid values, group-major, row-major.
    pub grids: Vec<f32>,
    pub provenance: Provenance,
}

/// One mixture component: a product of seeds on `partition`, already in
/// label order.
#[derive(Clone, Debug)]
pub struct Component {
    pub weight: f64,
    pub density: DensityMatrix,
    pub certificates: Vec<Option<InseparabilityCertificate>>,
}

#[derive(Clone, Debug)]
pub struct SampleDraw {
    pub label: PartitionClass,
    pub partition: Partition,
    pub components: Vec<Component>,
    pub rejected_seeds: usize,
    pub circuit_retries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub parties: usize,
    /// Samples per class in label order.
    pub class_counts: Vec<usize>,
    pub seed: SeedConfig,
    pub grid: QuadGrid,
    pub k_max: usize,
    pub rng_seed: u64,
}

impl DatasetConfig {
    pub fn balanced(parties: usize, per_class: usize, rng_seed: u64) -> Result<Self> {
        Ok(DatasetConfig {
            parties,
            class_counts: vec![per_class; PartitionClass::n_classes(parties)?],
            seed: SeedConfig::default_for(parties)?,
            grid: QuadGrid::default(),
            k_max: DEFAULT_K_MAX,
            rng_seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = PartitionClass::n_classes(self.parties)?;
        if self.class_counts.len() != n {
            return Err(Error::InvalidParameter(format!("{} class counts for {n} classes", self.class_counts.len())));
        }
        if self.class_counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidParameter("empty dataset".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("mixture arity cap must be positive".into()));
        }
        self.seed.validate()
    }

    /// Class of every sample index: round robin over classes with room left.
    pub fn schedule(&self) -> Vec<usize> {
        let mut left = self.class_counts.clone();
        let mut out = Vec::with_capacity(left.iter().sum());
        while left.iter().any(|&c| c > 0) {
            for (c, n) in left.iter_mut().enumerate() {
                if *n > 0 {
                    *n -= 1;
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Flat-Dirichlet weights of length `k`.
pub fn dirichlet_weights(k: usize, rng: &mut Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Draw the pre-pattern state of one sample.
pub fn draw_sample(label: PartitionClass, parties: usize, seed: &SeedConfig, k_max: usize, rng: &mut Rng) -> Result<SampleDraw> {
    label.index(parties)?;
    let k = rng.random_range(1..=k_max);
    let weights = dirichlet_weights(k, rng);
    let partition = Partition::random(&label.block_sizes(parties), rng);
    let layout = partition.layout();
    // position t of the block-ordered product holds mode layout[t]
    let perm = layout.clone();
    let mut components = Vec::with_capacity(k);
    let (mut rejected, mut retries) = (0, 0);
    for w in weights {
        let mut rho: Option<DensityMatrix> = None;
        let mut certs = Vec::with_capacity(partition.blocks.len());
        for block in &partition.blocks {
            let v = sample_verified_seed(block.len(), seed, rng).map_err(|e| match e {
                Error::Generation(msg) => Error::Generation(format!("{} sample on {partition}: {msg}", label.name())),
                other => other,
            })?;
            rejected += v.rejected;
            retries += v.seed.circuit_retries;
            certs.push(v.certificate);
            rho = Some(match rho {
                None => v.density,
                Some(r) => r.kron(&v.density),
            });
        }
        let density = rho.expect("at least one block").permute_modes(&perm)?;
        components.push(Component { weight: w, density, certificates: certs });
    }
    Ok(SampleDraw { label, partition, components, rejected_seeds: rejected, circuit_retries: retries })
}

/// Patterns of a drawn sample: the weighted sum of component patterns.
pub fn sample_patterns(draw: &SampleDraw, grid: &QuadGrid) -> Result<PatternSet> {
    let parties = draw.partition.n_modes();
    let mut ps = PatternSet::zeros(parties, *grid);
    for c in &draw.components {
        ps.add_scaled(c.weight, &pattern_set_from_density(&c.density, grid)?)?;
    }
    Ok(ps)
}

pub fn quantize(ps: &PatternSet) -> Vec<f32> {
    ps.data.iter().map(|&v| v as f32).collect()
}

/// Build one labeled sample from its own rng seed.
pub fn build_sample(label: PartitionClass, config: &DatasetConfig, sample_seed: u64) -> Result<LabeledSample> {
    let mut rng = rng::from_seed(sample_seed);
    let draw = draw_sample(label, config.parties, &config.seed, config.k_max, &mut rng)?;
    let ps = sample_patterns(&draw, &config.grid)?;
    let structured = label != PartitionClass::FullySep && label != PartitionClass::FullyInsep;
    Ok(LabeledSample {
        label,
        grids: quantize(&ps),
        provenance: Provenance {
            rng_seed: sample_seed,
            mixture_arity: draw.components.len(),
            weights: draw.components.iter().map(|c| c.weight).collect(),
            partition: structured.then(|| draw.partition.clone()),
            rejected_seeds: draw.rejected_seeds,
            circuit_retries: draw.circuit_retries,
            min_mass: Some(ps.min_mass()),
            lineage: Lineage::Original,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u16,
    pub parties: u8,
    pub n_groups: u8,
    pub grids_per_group: u8,
    pub grid_size: u16,
    pub n_classes: u8,
    pub n_samples: u64,
    pub x_min: f64,
    pub x_max: f64,
    pub convention_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatternDataset {
    pub parties: usize,
    pub grid: QuadGrid,
    pub samples: Vec<LabeledSample>,
    /// Generator settings, if this dataset was generated here.
    pub config: Option<DatasetConfig>,
    /// Free-form records appended by later stages (augmentation, splits).
    pub history: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub class_counts: Vec<usize>,
    pub rejected_seeds: usize,
    pub circuit_retries: usize,
    pub low_mass_samples: usize,
}

impl PatternDataset {
    pub fn empty(parties: usize, grid: QuadGrid) -> Self {
        PatternDataset { parties, grid, samples: Vec::new(), config: None, history: Vec::new() }
    }

    pub fn n_classes(&self) -> usize {
        PartitionClass::n_classes(self.parties).expect("validated parties")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.parties * GRIDS_PER_GROUP * self.grid.cells()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.index(self.parties).expect("valid label")).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for l in self.labels() {
            c[l] += 1;
        }
        c
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            version: FORMAT_VERSION,
            parties: self.parties as u8,
            n_groups: self.parties as u8,
            grids_per_group: GRIDS_PER_GROUP as u8,
            grid_size: self.grid.n_bins as u16,
            n_classes: self.n_classes() as u8,
            n_samples: self.samples.len() as u64,
            x_min: self.grid.x_min,
            x_max: self.grid.x_max,
            convention_hash: crate::format::convention_hash(),
        }
    }

    pub fn stats(&self) -> BuildStats {
        BuildStats {
            class_counts: self.class_counts(),
            rejected_seeds: self.samples.iter().map(|s| s.provenance.rejected_seeds).sum(),
            circuit_retries: self.samples.iter().map(|s| s.provenance.circuit_retries).sum(),
            low_mass_samples: self.samples.iter().filter(|s| s.provenance.min_mass.is_some_and(|m| m < crate::homodyne::LOW_MASS)).count(),
        }
    }

    /// Sub-dataset with the listed samples, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> PatternDataset {
        PatternDataset {
            parties: self.parties,
            grid: self.grid,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            config: self.config.clone(),
            history: self.history.clone(),
        }
    }
}

/// Class-balanced (or `class_counts`-shaped) dataset; a pure function of the
/// config. Sample `i` draws from stream `(rng_seed, SAMPLE, i)`.
pub fn build_dataset(config: &DatasetConfig) -> Result<PatternDataset> {
    build_dataset_with_progress(config, |_| {})
}

pub fn build_dataset_with_progress(config: &DatasetConfig, progress: impl Fn(usize) + Sync) -> Result<PatternDataset> {
    config.validate()?;
    let schedule = config.schedule();
    let classes = PartitionClass::all(config.parties)?;
    let job = |(i, &c): (usize, &usize)| {
        let seed = rng::derive_seed(config.rng_seed, tags::SAMPLE, i as u64);
        let s = build_sample(classes[c], config, seed);
        progress(i);
        s
    };
    #[cfg(feature = "parallel")]
    let samples = {
        use rayon::prelude::*;
        schedule.par_iter().enumerate().map(job).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let samples = schedule.iter().enumerate().map(job).collect::<Result<Vec<_>>>()?;
    Ok(PatternDataset { parties: config.parties, grid: config.grid, samples, config: Some(config.clone()), history: Vec::new() })
}

/// Index of the original sample `i` descends from, when it is in `ds`.
pub fn lineage_root(ds: &PatternDataset, i: usize) -> usize {
    let parent = match &ds.samples[i].provenance.lineage {
        Lineage::Original => return i,
        Lineage::Permuted { parent, .. } => *parent,
        Lineage::Mixed { parents, .. } => parents[0],
    };
    if parent < ds.len() && ds.samples[parent].provenance.lineage == Lineage::Original {
        parent
    } else {
        i
    }
}

/// Stratified split; per class `round(fraction · count)` originals go to the
/// first part, each with every sample derived from it. Both parts keep the
/// original sample order.
pub fn split_dataset(ds: &PatternDataset, fraction: f64, rng_seed: u64) -> Result<(PatternDataset, PatternDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("split fraction {fraction}")));
    }
    let labels = ds.labels();
    let roots: Vec<usize> = (0..ds.len()).map(|i| lineage_root(ds, i)).collect();
    let mut rng = rng::stream(rng_seed, tags::SPLIT, 0);
    let mut in_first = vec![false; ds.len()];
    for c in 0..ds.n_classes() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c && roots[i] == i).collect();
        if idx.is_empty() {
            return Err(Error::InvalidParameter(format!("class {c} has no samples")));
        }
        idx.shuffle(&mut rng);
        let n = (fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..n] {
            in_first[i] = true;
        }
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for i in 0..ds.len() {
        if in_first[roots[i]] {
            first.push(i);
        } else {
            second.push(i);
        }
    }
    first.sort_unstable();
    second.sort_unstable();
    let record = serde_json::json!({ "split": { "fraction": fraction, "rng_seed": rng_seed } });
    let mut a = ds.subset(&first);
    let mut b = ds.subset(&second);
    a.history.push(record.clone());
    b.history.push(record);
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stellar::{negativity, SeedBounds};
    use approx::assert_abs_diff_eq;

    fn small_config(parties: usize, per_class: usize) -> DatasetConfig {
        let mut c = DatasetConfig::balanced(parties, per_class, 11).unwrap();
        c.seed.cutoff = if parties == 3 { 6 } else { 4 };
        c.seed.working_pad = 4;
        c.seed.leak_tol = 0.3;
        c.seed.bounds = SeedBounds { s_max: 0.4, alpha_max: 0.6, eta_min: 0.8, eta_max: 1.0 };
        c
    }

    #[test]
    fn class_tables() {
        assert_eq!(PartitionClass::n_classes(3).unwrap(), 3);
        assert_eq!(PartitionClass::n_classes(4).unwrap(), 5);
        assert!(PartitionClass::n_classes(2).is_err());
        for p in [3, 4] {
            for (i, c) in PartitionClass::all(p).unwrap().iter().enumerate() {
                assert_eq!(c.index(p).unwrap(), i);
                assert_eq!(PartitionClass::from_index(p, i).unwrap(), *c);
                assert_eq!(c.block_sizes(p).iter().sum::<usize>(), p);
            }
        }
        assert_eq!(PartitionClass::Bisep.structure(3), "1⊗2");
        assert!(PartitionClass::Trisep.index(3).is_err());
    }

    #[test]
    fn partitions_are_uniform_and_canonical() {
        let mut rng = rng::from_seed(3);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..3000 {
            let p = Partition::random(&[1, 2], &mut rng);
            *counts.entry(p.to_string()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 3);
        for (k, v) in &counts {
            assert!((*v as f64 - 1000.0).abs() < 100.0, "{k}: {v}");
        }
        assert!(counts.contains_key("A|BC"));
        let p = Partition { blocks: vec![vec![0], vec![1, 2]] };
        assert_eq!(p.permuted(&[1, 0, 2]).to_string(), "B|AC");
        let mut rng = rng::from_seed(4);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..500 {
            seen.insert(Partition::random(&[2, 2], &mut rng).to_string());
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn dirichlet_weights_sum_to_one() {
        let mut rng = rng::from_seed(5);
        for k in 1..=4 {
            let w = dirichlet_weights(k, &mut rng);
            assert_eq!(w.len(), k);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn trivial_fully_separable_sample_is_vacuum() {
        let mut cfg = small_config(3, 1);
        cfg.seed.bounds = SeedBounds::zero();
        cfg.seed.max_rank = 0;
        cfg.k_max = 1;
        let s = build_sample(PartitionClass::FullySep, &cfg, 1).unwrap();
        let vac = crate::homodyne::pattern_set_from_density(
            &DensityMatrix::from_pure(&crate::fock::PureStateVector::vacuum(vec![6; 3])),
            &cfg.grid,
        )
        .unwrap();
        assert_eq!(s.grids, quantize(&vac));
        assert_eq!(s.provenance.mixture_arity, 1);
    }

    #[test]
    fn biseparable_components_are_certified() {
        let cfg = small_config(3, 1);
        let mut rng = rng::from_seed(6);
        for _ in 0..3 {
            let draw = draw_sample(PartitionClass::Bisep, 3, &cfg.seed, 2, &mut rng).unwrap();
            let single = draw.partition.blocks[0].clone();
            let pair = draw.partition.blocks[1].clone();
            let mut mix = DensityMatrix::zeros(vec![6; 3]);
            for c in &draw.components {
                // entangled inside the pair, product across the labeled cut
                assert!(negativity(&c.density.partial_trace(&pair).unwrap(), &[0]).unwrap() > 0.0);
                mix.add_scaled(c.weight, &c.density).unwrap();
            }
            assert!(negativity(&mix, &single).unwrap() < 1e-9);
        }
    }

    #[test]
    fn mixture_patterns_are_weighted_sums() {
        let cfg = small_config(3, 1);
        let mut rng = rng::from_seed(7);
        let draw = draw_sample(PartitionClass::FullySep, 3, &cfg.seed, 4, &mut rng).unwrap();
        let total = sample_patterns(&draw, &cfg.grid).unwrap();
        let mut mixed = DensityMatrix::zeros(vec![6; 3]);
        for c in &draw.components {
            mixed.add_scaled(c.weight, &c.density).unwrap();
        }
        let direct = pattern_set_from_density(&mixed, &cfg.grid).unwrap();
        assert!(total.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let cfg = small_config(3, 2);
        let a = build_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.class_counts(), vec![2, 2, 2]);
        let b = build_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|s| s.grids.len() == 12 * 576));
    }

    #[test]
    fn quadripartite_dataset_has_five_classes() {
        let cfg = small_config(4, 1);
        let ds = build_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.class_counts(), vec![1; 5]);
        assert!(ds.samples.iter().all(|s| s.grids.len() == 16 * 576));
    }

    #[test]
    fn stratified_split_counts() {
        let mut ds = PatternDataset::empty(3, QuadGrid::default());
        let classes = PartitionClass::all(3).unwrap();
        for i in 0..30 {
            ds.samples.push(LabeledSample {
                label: classes[i % 3],
                grids: vec![i as f32],
                provenance: Provenance {
                    rng_seed: i as u64,
                    mixture_arity: 1,
                    weights: vec![1.0],
                    partition: None,
                    rejected_seeds: 0,
                    circuit_retries: 0,
                    min_mass: Some(1.0),
                    lineage: Lineage::Original,
                },
            });
        }
        let (tr, te) = split_dataset(&ds, 0.8, 1).unwrap();
        assert_eq!(tr.class_counts(), vec![8, 8, 8]);
        assert_eq!(te.class_counts(), vec![2, 2, 2]);
        let mut all: Vec<f32> = tr.samples.iter().chain(&te.samples).map(|s| s.grids[0]).collect();
        all.sort_by(f32::total_cmp);
        assert_eq!(all, (0..30).map(|i| i as f32).collect::<Vec<_>>());
        assert!(split_dataset(&ds, 1.0, 1).is_err());
    }
}
