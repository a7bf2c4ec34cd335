//! Random seed states `σ_m = (∏ L_l) G |C(r)⟩⟨C(r)| G† (∏ L_l†)`: a core state
//! of stellar rank at most `r`, a random Gaussian circuit and per-mode loss,
//! plus the partial-transpose certificate used to accept entangled seeds.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{apply_channel, total_dim, FockConfig, PureStateVector, StateEnsemble};
use crate::gaussian::{apply_circuit, loss_channel, GaussianCircuit, GaussianElement};
use crate::rng::Rng;
use crate::C64;

pub const MAX_RANK: usize = 3;
pub const RETRY_CAP: usize = 100;
pub const DEFAULT_NU_MIN: f64 = 0.01;
/// Largest partial-transpose dimension handed to the eigensolver.
pub const NEGATIVITY_BUDGET: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedBounds {
    pub s_max: f64,
    pub alpha_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for SeedBounds {
    fn default() -> Self {
        SeedBounds { s_max: 0.8, alpha_max: 1.5, eta_min: 0.6, eta_max: 1.0 }
    }
}

impl SeedBounds {
    /// No squeezing, no displacement, no loss.
    pub fn zero() -> Self {
        SeedBounds { s_max: 0.0, alpha_max: 0.0, eta_min: 1.0, eta_max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.s_max >= 0.0
            && self.alpha_max >= 0.0
            && 0.0 < self.eta_min
            && self.eta_min <= self.eta_max
            && self.eta_max <= 1.0
            && self.s_max.is_finite()
            && self.alpha_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("seed bounds {self:?}")))
        }
    }
}

/// Everything needed to draw seeds for one dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub bounds: SeedBounds,
    /// Ranks are drawn uniformly from `0..=max_rank`.
    pub max_rank: usize,
    pub cutoff: usize,
    pub working_pad: usize,
    /// Largest weight the Gaussian circuit may push above the cutoff.
    pub leak_tol: f64,
    /// Acceptance threshold on every bipartition's negativity.
    pub nu_min: f64,
}

impl SeedConfig {
    pub fn default_for(parties: usize) -> Result<Self> {
        let fc = FockConfig::default_for(parties)?;
        Ok(SeedConfig {
            bounds: SeedBounds::default(),
            max_rank: MAX_RANK,
            cutoff: fc.cutoff,
            working_pad: fc.working_pad,
            leak_tol: DEFAULT_SEED_LEAK_TOL,
            nu_min: DEFAULT_NU_MIN,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.max_rank > MAX_RANK {
            return Err(Error::InvalidParameter(format!("stellar rank above {MAX_RANK}")));
        }
        if self.cutoff <= self.max_rank {
            return Err(Error::InvalidDimension(format!("cutoff {} cannot hold rank {}", self.cutoff, self.max_rank)));
        }
        if !(self.leak_tol >= 0.0) || !(self.nu_min >= 0.0) {
            return Err(Error::InvalidParameter("negative tolerance".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_SEED_LEAK_TOL: f64 = 2e-2;

/// A single seed request: mode count, rank, bounds and its own rng seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub m: usize,
    pub r: usize,
    pub bounds: SeedBounds,
    pub rng_seed: u64,
}

impl SeedSpec {
    pub fn sample(&self, cutoff: usize, working_pad: usize, leak_tol: f64) -> Result<SeedState> {
        let mut rng = crate::rng::from_seed(self.rng_seed);
        sample_seed_state(self.m, self.r, &self.bounds, cutoff, working_pad, leak_tol, &mut rng)
    }
}

fn complex_normal(rng: &mut Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Core state with support on `Σ n_l ≤ r`, independent complex Gaussian
/// coefficients, and some top-shell amplitude of modulus at least 0.1.
pub fn sample_core_state(m: usize, r: usize, cutoff: usize, rng: &mut Rng) -> Result<PureStateVector> {
    if r > MAX_RANK {
        return Err(Error::InvalidParameter(format!("stellar rank {r} above {MAX_RANK}")));
    }
    if m == 0 || cutoff <= r {
        return Err(Error::InvalidDimension(format!("{m} modes at cutoff {cutoff} for rank {r}")));
    }
    let dims = vec![cutoff; m];
    if r == 0 {
        return Ok(PureStateVector::vacuum(dims));
    }
    let n = total_dim(&dims);
    let shell: Vec<usize> = (0..n).map(|i| crate::fock::occupation(&dims, i).iter().sum()).collect();
    for _ in 0..RETRY_CAP {
        let amps: Vec<C64> = shell
            .iter()
            .map(|&s| if s <= r { complex_normal(rng) } else { C64::new(0.0, 0.0) })
            .collect();
        let psi = PureStateVector::new(dims.clone(), amps)?;
        let top = psi
            .amplitudes()
            .iter()
            .zip(&shell)
            .filter(|(_, &s)| s == r)
            .map(|(a, _)| a.norm())
            .fold(0.0, f64::max);
        if top >= 0.1 {
            return Ok(psi);
        }
    }
    Err(Error::Generation(format!("no rank-{r} core state after {RETRY_CAP} draws")))
}

/// Coefficients `c_n / √(n!)` of the stellar polynomial of a single-mode
/// state, trailing zeros removed.
pub fn stellar_coefficients(psi: &PureStateVector) -> Result<Vec<C64>> {
    if psi.n_modes() != 1 {
        return Err(Error::InvalidDimension("stellar polynomial needs one mode".into()));
    }
    let mut fact = 1.0;
    let mut out: Vec<C64> = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if n > 0 {
                fact *= n as f64;
            }
            c / fact.sqrt()
        })
        .collect();
    while out.len() > 1 && out.last().is_some_and(|c| c.norm() == 0.0) {
        out.pop();
    }
    Ok(out)
}

/// Per mode a squeezer then a displacement, then one beam splitter for every
/// pair `(i, j)`, `i < j`, in lexicographic order.
pub fn sample_gaussian_circuit(m: usize, bounds: &SeedBounds, rng: &mut Rng) -> GaussianCircuit {
    let mut elements = Vec::with_capacity(2 * m + m * (m - 1) / 2);
    for mode in 0..m {
        let s = rng.random::<f64>() * bounds.s_max;
        let phi = rng.random::<f64>() * 2.0 * PI;
        elements.push(GaussianElement::Squeeze { mode, s, phi });
        let r = rng.random::<f64>() * bounds.alpha_max;
        let arg = rng.random::<f64>() * 2.0 * PI;
        elements.push(GaussianElement::Displace { mode, alpha: C64::from_polar(r, arg) });
    }
    for i in 0..m {
        for j in i + 1..m {
            let theta = rng.random::<f64>() * FRAC_PI_2;
            let phi = rng.random::<f64>() * 2.0 * PI;
            elements.push(GaussianElement::BeamSplitter { i, j, theta, phi });
        }
    }
    GaussianCircuit::new(elements)
}

/// A seed before loss is expanded: the pure state `G|C(r)⟩` and the
/// transmissivity of each mode's loss channel.
#[derive(Clone, Debug)]
pub struct SeedState {
    pub pure: PureStateVector,
    pub etas: Vec<f64>,
    pub circuit: GaussianCircuit,
    pub core_rank: usize,
    pub leakage: f64,
    /// Circuits discarded for exceeding the leakage tolerance.
    pub circuit_retries: usize,
}

impl SeedState {
    pub fn n_modes(&self) -> usize {
        self.pure.n_modes()
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::from_pure(&self.pure);
        for (l, &eta) in self.etas.iter().enumerate() {
            if eta < 1.0 {
                rho = rho.apply_loss(l, eta)?;
            }
        }
        Ok(rho)
    }

    pub fn ensemble(&self, branch_tol: f64) -> Result<StateEnsemble> {
        let d = self.pure.dims()[0];
        let mut ens = StateEnsemble::pure(self.pure.clone());
        for (l, &eta) in self.etas.iter().enumerate() {
            ens = apply_channel(&ens, &loss_channel(eta, d)?.on_mode(l), branch_tol)?;
        }
        Ok(ens)
    }
}

pub fn sample_seed_state(
    m: usize,
    r: usize,
    bounds: &SeedBounds,
    cutoff: usize,
    working_pad: usize,
    leak_tol: f64,
    rng: &mut Rng,
) -> Result<SeedState> {
    bounds.validate()?;
    let config = FockConfig::new(m, cutoff, working_pad)?;
    let core = sample_core_state(m, r, cutoff, rng)?;
    let mut last = None;
    for retries in 0..RETRY_CAP {
        let circuit = sample_gaussian_circuit(m, bounds, rng);
        match apply_circuit(&core, &circuit, &config, leak_tol) {
            Ok(out) => {
                let etas = (0..m).map(|_| bounds.eta_min + rng.random::<f64>() * (bounds.eta_max - bounds.eta_min)).collect();
                return Ok(SeedState {
                    pure: out.state,
                    etas,
                    circuit,
                    core_rank: r,
                    leakage: out.leakage,
                    circuit_retries: retries,
                });
            }
            Err(e @ Error::TruncationOverflow { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one draw"))
}

/// Sum of the moduli of the negative eigenvalues of `ρ^{T_subset}`.
pub fn negativity(rho: &DensityMatrix, subset: &[usize]) -> Result<f64> {
    if rho.dim() > NEGATIVITY_BUDGET {
        return Err(Error::BudgetExceeded { dim: rho.dim(), budget: NEGATIVITY_BUDGET });
    }
    let pt = rho.partial_transpose(subset)?;
    let tr = rho.trace();
    Ok(pt.hermitian_eigenvalues().iter().filter(|&&l| l < 0.0).map(|l| -l).sum::<f64>() / tr)
}

pub fn ensemble_negativity(ens: &StateEnsemble, subset: &[usize]) -> Result<f64> {
    if total_dim(ens.dims()) > NEGATIVITY_BUDGET {
        return Err(Error::BudgetExceeded { dim: total_dim(ens.dims()), budget: NEGATIVITY_BUDGET });
    }
    negativity(&DensityMatrix::from_ensemble(ens), subset)
}

/// One side of every bipartition of `m` modes (the side holding mode 0).
pub fn bipartitions(m: usize) -> Vec<Vec<usize>> {
    (1..(1usize << m) - 1)
        .filter(|mask| mask & 1 == 1)
        .map(|mask| (0..m).filter(|l| mask >> l & 1 == 1).collect())
        .collect()
}

/// Per-mode cutoff the certificate is evaluated at.
pub fn verification_cutoff(m: usize) -> usize {
    match m {
        0..=2 => 8,
        3 => 6,
        _ => 4,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InseparabilityCertificate {
    pub accepted: bool,
    /// `(side containing mode 0, negativity)`; stops at the first failure.
    pub negativities: Vec<(Vec<usize>, f64)>,
    pub verification_cutoff: usize,
    /// Trace of the state surviving the local projection.
    pub kept_trace: f64,
}

/// Accepts iff every bipartition has negativity above `nu_min`, evaluated on
/// the locally projected state (a local filter cannot create entanglement).
pub fn verify_fully_inseparable(rho: &DensityMatrix, nu_min: f64) -> Result<InseparabilityCertificate> {
    let m = rho.n_modes();
    if m < 2 {
        return Err(Error::InvalidDimension("inseparability needs at least two modes".into()));
    }
    let d_v = verification_cutoff(m);
    let (proj, kept_trace) = rho.project_levels(d_v)?;
    let mut negativities = Vec::new();
    let mut accepted = true;
    for side in bipartitions(m) {
        let nu = negativity(&proj, &side)?;
        negativities.push((side, nu));
        if !(nu > nu_min) {
            accepted = false;
            break;
        }
    }
    Ok(InseparabilityCertificate { accepted, negativities, verification_cutoff: d_v, kept_trace })
}

#[derive(Clone, Debug)]
pub struct VerifiedSeed {
    pub seed: SeedState,
    pub density: DensityMatrix,
    pub certificate: Option<InseparabilityCertificate>,
    /// Seeds drawn and rejected before this one.
    pub rejected: usize,
}

/// Draw `m`-mode seeds with rank `~U{0..=max_rank}` until one stays within
/// the leakage tolerance and passes the certificate (single-mode seeds pass
/// trivially). A core state no circuit fits counts as a rejection.
pub fn sample_verified_seed(m: usize, config: &SeedConfig, rng: &mut Rng) -> Result<VerifiedSeed> {
    let mut rejected = 0;
    for _ in 0..RETRY_CAP {
        let r = rng.random_range(0..=config.max_rank);
        let seed = match sample_seed_state(m, r, &config.bounds, config.cutoff, config.working_pad, config.leak_tol, rng) {
            Ok(s) => s,
            Err(Error::TruncationOverflow { .. }) => {
                rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let density = seed.density()?;
        if m == 1 {
            return Ok(VerifiedSeed { seed, density, certificate: None, rejected });
        }
        let cert = verify_fully_inseparable(&density, config.nu_min)?;
        if cert.accepted {
            return Ok(VerifiedSeed { seed, density, certificate: Some(cert), rejected });
        }
        rejected += 1;
    }
    Err(Error::Generation(format!("no fully inseparable {m}-mode seed within leakage tolerance after {RETRY_CAP} draws")))
}
