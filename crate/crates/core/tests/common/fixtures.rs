#![allow(dead_code)]

use cvent_core::dataset::{build_dataset, DatasetConfig, PatternDataset};
use cvent_core::stellar::SeedBounds;

/// Quick-to-generate settings: low cutoff and mild seeds.
pub fn small_config(parties: usize, per_class: usize, rng_seed: u64) -> DatasetConfig {
    let mut c = DatasetConfig::balanced(parties, per_class, rng_seed).unwrap();
    c.seed.cutoff = if parties == 3 { 6 } else { 4 };
    c.seed.working_pad = 4;
    c.seed.leak_tol = 0.3;
    c.seed.bounds = SeedBounds { s_max: 0.4, alpha_max: 0.6, eta_min: 0.8, eta_max: 1.0 };
    c
}

pub fn small_dataset(parties: usize, per_class: usize, rng_seed: u64) -> PatternDataset {
    build_dataset(&small_config(parties, per_class, rng_seed)).unwrap()
}
