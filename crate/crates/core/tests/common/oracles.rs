//! Closed-form references and the measured deviations from them.

#![allow(dead_code)]

use cvent_core::dataset::{draw_sample, sample_patterns, PartitionClass};
use cvent_core::density::DensityMatrix;
use cvent_core::fock::{occupation, total_dim, PureStateVector, StateEnsemble};
use cvent_core::gaussian::{displace_unitary, loss_channel, squeeze_unitary};
use cvent_core::homodyne::{pattern_set, pattern_set_from_density, quadrature_wavefunction, QuadGrid, Quadrature};
use cvent_core::qda::{convex_mix_patterns, ModePermutation};
use cvent_core::rng;
use cvent_core::stellar::{negativity, SeedBounds, SeedConfig};
use cvent_core::C64;
use rand::Rng as _;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `max |Σ_k K_k†K_k − I|` over a few transmissivities, summed here rather
/// than by the library.
pub fn kraus_completeness() -> f64 {
    let mut worst: f64 = 0.0;
    for eta in [0.05, 0.3, 0.7, 0.95, 1.0] {
        let d = 16;
        let ch = loss_channel(eta, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in &ch.kraus {
                    for r in 0..d {
                        acc += k.get(r, i).conj() * k.get(r, j);
                    }
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
    }
    worst
}

/// `⟨2n|S(ξ)|0⟩ = (−e^{iφ} tanh s)^n √((2n)!) / (2^n n! √cosh s)` against the
/// vacuum column of the squeeze operator at 16 levels.
pub fn squeezed_vacuum_error() -> f64 {
    let d_w = 16;
    let mut worst: f64 = 0.0;
    for (s, phi) in [(0.1, 0.0), (0.45, 1.1), (0.8, 0.0), (0.8, -2.3)] {
        let u = squeeze_unitary(s, phi, d_w).unwrap();
        for m in 0..d_w {
            let exact = if m % 2 == 1 {
                C64::new(0.0, 0.0)
            } else {
                let n = m / 2;
                let r = -C64::from_polar(s.tanh(), phi);
                r.powu(n as u32) * factorial(2 * n).sqrt() / (2f64.powi(n as i32) * factorial(n) * s.cosh().sqrt())
            };
            worst = worst.max((u.get(m, 0) - exact).norm());
        }
    }
    worst
}

/// `⟨n|D(α)|0⟩ = e^{−|α|²/2} αⁿ/√n!` against the displacement operator.
pub fn coherent_error() -> f64 {
    let d_w = 16;
    let mut worst: f64 = 0.0;
    for alpha in [C64::new(0.3, 0.0), C64::new(-0.7, 0.9), C64::new(0.0, 1.5)] {
        let u = displace_unitary(alpha, d_w).unwrap();
        for n in 0..d_w {
            let exact = (-alpha.norm_sqr() / 2.0).exp() * alpha.powu(n as u32) / factorial(n).sqrt();
            worst = worst.max((u.get(n, 0) - exact).norm());
        }
    }
    worst
}

pub fn tmsv(s: f64, d: usize) -> PureStateVector {
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    for n in 0..d {
        amps[n * d + n] = C64::new(s.tanh().powi(n as i32) / s.cosh(), 0.0);
    }
    PureStateVector::new(vec![d, d], amps).unwrap()
}

/// `|N − (e^{2s} − 1)/2|` for the two-mode squeezed vacuum at `s = 0.5`,
/// twelve levels per mode.
pub fn tmsv_negativity_error() -> f64 {
    let s: f64 = 0.5;
    let rho = DensityMatrix::from_pure(&tmsv(s, 12));
    (negativity(&rho, &[0]).unwrap() - ((2.0 * s).exp() - 1.0) / 2.0).abs()
}

/// `|ψ₀(0)|² − (2π)^{−1/2}` for both quadratures.
pub fn vacuum_density_error() -> f64 {
    let target = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    [Quadrature::X, Quadrature::P].iter().map(|&q| (quadrature_wavefunction(0, 0.0, q).norm_sqr() - target).abs()).fold(0.0, f64::max)
}

/// Largest `|Var − 1|` of either axis of every default vacuum grid.
pub fn vacuum_variance_error() -> f64 {
    let grid = QuadGrid::default();
    let ens = StateEnsemble::pure(PureStateVector::vacuum(vec![4; 3]));
    let ps = pattern_set(&ens, 3, &grid).unwrap();
    let c = grid.centers();
    let n = grid.n_bins;
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        for q in 0..4 {
            let g = ps.grid_data(k, q);
            let mass: f64 = g.iter().sum();
            for axis in 0..2 {
                let (mut m1, mut m2) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let x = if axis == 0 { c[i] } else { c[j] };
                        m1 += g[i * n + j] * x;
                        m2 += g[i * n + j] * x * x;
                    }
                }
                let var = m2 / mass - (m1 / mass).powi(2);
                worst = worst.max((var - 1.0).abs());
            }
        }
    }
    worst
}

pub fn random_state(dims: Vec<usize>, seed: u64) -> PureStateVector {
    let mut r = rng::from_seed(seed);
    let n = total_dim(&dims);
    let amps = (0..n)
        .map(|i| {
            let s: usize = occupation(&dims, i).iter().sum();
            C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * 0.6f64.powi(s as i32)
        })
        .collect();
    PureStateVector::new(dims, amps).unwrap()
}

pub fn random_ensemble(dims: Vec<usize>, seed: u64) -> StateEnsemble {
    let mut r = rng::from_seed(seed ^ 0xabc);
    let k = r.random_range(1..=3);
    let mut w: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 0.1).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    StateEnsemble::new(w.into_iter().enumerate().map(|(i, wi)| (wi, random_state(dims.clone(), seed * 31 + i as u64))).collect()).unwrap()
}

/// `max |P(Σ wᵢρᵢ) − Σ wᵢP(ρᵢ)|` over mixtures of random ensembles.
pub fn pattern_linearity_error() -> f64 {
    let grid = QuadGrid::default();
    let mut worst: f64 = 0.0;
    for (parties, d) in [(3, 4), (4, 3)] {
        for seed in 0..3 {
            let a = random_ensemble(vec![d; parties], 100 + seed);
            let b = random_ensemble(vec![d; parties], 200 + seed);
            let w = 0.35;
            let mixed = StateEnsemble::mixture(&[(w, &a), (1.0 - w, &b)]).unwrap();
            let lhs = pattern_set(&mixed, parties, &grid).unwrap();
            let mut rhs = pattern_set(&a, parties, &grid).unwrap();
            for v in rhs.data.iter_mut() {
                *v *= w;
            }
            rhs.add_scaled(1.0 - w, &pattern_set(&b, parties, &grid).unwrap()).unwrap();
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    worst
}

/// Relabeled versus regenerated patterns, every permutation of three modes,
/// on `n_states` random mixed states.
pub fn tripartite_covariance_error(n_states: usize) -> f64 {
    let grid = QuadGrid::default();
    let mut worst: f64 = 0.0;
    for seed in 0..n_states as u64 {
        let ens = random_ensemble(vec![5; 3], 300 + seed);
        let rho = DensityMatrix::from_ensemble(&ens);
        let ps = pattern_set_from_density(&rho, &grid).unwrap();
        for pi in ModePermutation::all(3).unwrap() {
            let relabeled = ps.permute_groups(pi.mapping()).unwrap();
            let regenerated = pattern_set(&ens.permute_modes(pi.mapping()).unwrap(), 3, &grid).unwrap();
            worst = worst.max(relabeled.max_abs_diff(&regenerated));
        }
    }
    worst
}

/// Convex mixture of generated FULLY_SEP pattern sets against the patterns
/// of the physically mixed state.
pub fn convex_mix_error() -> f64 {
    let mut seed = SeedConfig::default_for(3).unwrap();
    seed.cutoff = 6;
    seed.working_pad = 6;
    seed.bounds = SeedBounds { s_max: 0.4, alpha_max: 0.8, eta_min: 0.7, eta_max: 1.0 };
    seed.leak_tol = 0.05;
    let grid = QuadGrid::default();
    let mut worst: f64 = 0.0;
    let mut r = rng::from_seed(17);
    for _ in 0..3 {
        let d1 = draw_sample(PartitionClass::FullySep, 3, &seed, 3, &mut r).unwrap();
        let d2 = draw_sample(PartitionClass::FullySep, 3, &seed, 3, &mut r).unwrap();
        let p1 = sample_patterns(&d1, &grid).unwrap();
        let p2 = sample_patterns(&d2, &grid).unwrap();
        let w = r.random_range(0.05..0.95);
        let mixed = convex_mix_patterns(&[(w, &p1), (1.0 - w, &p2)]).unwrap();
        let mut rho = DensityMatrix::zeros(vec![6; 3]);
        for (wi, d) in [(w, &d1), (1.0 - w, &d2)] {
            for c in &d.components {
                rho.add_scaled(wi * c.weight, &c.density).unwrap();
            }
        }
        worst = worst.max(mixed.max_abs_diff(&pattern_set_from_density(&rho, &grid).unwrap()));
    }
    worst
}
