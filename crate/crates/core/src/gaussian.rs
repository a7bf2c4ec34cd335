//! Gaussian unitaries and the photon-loss channel in truncated Fock space.
//!
//! Single-mode squeezers and displacements are built column by column from
//! the exact Fock-space recurrences
//!
//! ```text
//! S(ξ)|n⟩ = (â† cosh s + â e^{-iφ} sinh s) S(ξ)|n-1⟩ / √n,   S(ξ) = exp(½(ξ*â² − ξâ†²)), ξ = s e^{iφ}
//! D(α)|n⟩ = (â† − α*) D(α)|n-1⟩ / √n
//! ```
//!
//! seeded with the closed-form squeezed vacuum and coherent state, so every
//! returned matrix element equals the untruncated operator's element. The
//! beam splitter `exp(θ(e^{iφ}â_i†â_j − e^{-iφ}â_iâ_j†))` conserves photon
//! number and is exponentiated exactly on each fixed-number block.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ChannelKrausSet, FockConfig, OperatorMatrix, PureStateVector, UnitaryOutcome};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GaussianElement {
    Squeeze { mode: usize, s: f64, phi: f64 },
    Displace { mode: usize, alpha: C64 },
    BeamSplitter { i: usize, j: usize, theta: f64, phi: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianCircuit {
    pub elements: Vec<GaussianElement>,
}

impl GaussianCircuit {
    pub fn new(elements: Vec<GaussianElement>) -> Self {
        GaussianCircuit { elements }
    }

    /// Circuit implementing the inverse unitary.
    pub fn inverse(&self) -> GaussianCircuit {
        let elements = self
            .elements
            .iter()
            .rev()
            .map(|e| match *e {
                GaussianElement::Squeeze { mode, s, phi } => GaussianElement::Squeeze {
                    mode,
                    s,
                    phi: phi + std::f64::consts::PI,
                },
                GaussianElement::Displace { mode, alpha } => GaussianElement::Displace { mode, alpha: -alpha },
                GaussianElement::BeamSplitter { i, j, theta, phi } => GaussianElement::BeamSplitter {
                    i,
                    j,
                    theta,
                    phi: phi + std::f64::consts::PI,
                },
            })
            .collect();
        GaussianCircuit { elements }
    }

    pub fn n_beam_splitters(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, GaussianElement::BeamSplitter { .. }))
            .count()
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Squeezed-vacuum Fock amplitudes `c_0 … c_{len-1}`.
pub fn squeezed_vacuum_amplitudes(s: f64, phi: f64, len: usize) -> Vec<C64> {
    let mut out = vec![zero(); len];
    let ratio = -C64::from_polar(s.tanh(), phi);
    // c_{2n} = sech(s)^{1/2} (−e^{iφ} tanh s)^n √((2n)!) / (2^n n!)
    let mut c = C64::new(1.0 / s.cosh().sqrt(), 0.0);
    let mut n = 0usize;
    while 2 * n < len {
        out[2 * n] = c;
        // c_{2n+2}/c_{2n} = ratio · √((2n+1)(2n+2)) / (2(n+1))
        let k = (2 * n) as f64;
        c *= ratio * ((k + 1.0) * (k + 2.0)).sqrt() / (2.0 * (n as f64 + 1.0));
        n += 1;
    }
    out
}

/// Coherent-state Fock amplitudes `e^{-|α|²/2} α^n / √(n!)`.
pub fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..len {
        out.push(c);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    out
}

/// `exp(½(ξ*â² − ξâ†²))` with `ξ = s e^{iφ}`, restricted to levels `0..d_w`.
pub fn squeeze_unitary(s: f64, phi: f64, d_w: usize) -> Result<OperatorMatrix> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("squeezing magnitude {s}")));
    }
    if d_w < 2 {
        return Err(Error::InvalidDimension(format!("padded dimension {d_w}")));
    }
    // work in 2·d_w levels
    let big = 2 * d_w + 1;
    let (ch, sh) = (s.cosh(), s.sinh());
    let down = C64::from_polar(sh, -phi);
    let mut col = squeezed_vacuum_amplitudes(s, phi, big);
    let mut m = OperatorMatrix::from_vec(d_w, vec![0], vec![zero(); d_w * d_w])?;
    for n in 0..d_w {
        if n > 0 {
            let inv = 1.0 / (n as f64).sqrt();
            let prev = col;
            col = vec![zero(); big];
            for (k, c) in col.iter_mut().enumerate().take(big - 1) {
                let up = if k > 0 { prev[k - 1] * ((k as f64).sqrt() * ch) } else { zero() };
                *c = (up + prev[k + 1] * down * ((k + 1) as f64).sqrt()) * inv;
            }
        }
        for r in 0..d_w {
            m.set(r, n, col[r]);
        }
    }
    Ok(m.with_unitary_flag(true))
}

/// `exp(αâ† − α*â)` restricted to levels `0..d_w`.
pub fn displace_unitary(alpha: C64, d_w: usize) -> Result<OperatorMatrix> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter(format!("displacement {alpha}")));
    }
    if d_w < 2 {
        return Err(Error::InvalidDimension(format!("padded dimension {d_w}")));
    }
    let mut col = coherent_amplitudes(alpha, d_w);
    let mut m = OperatorMatrix::from_vec(d_w, vec![0], vec![zero(); d_w * d_w])?;
    for n in 0..d_w {
        if n > 0 {
            let inv = 1.0 / (n as f64).sqrt();
            let prev = col;
            col = (0..d_w)
                .map(|k| {
                    let up = if k > 0 { prev[k - 1] * (k as f64).sqrt() } else { zero() };
                    (up - alpha.conj() * prev[k]) * inv
                })
                .collect();
        }
        for r in 0..d_w {
            m.set(r, n, col[r]);
        }
    }
    Ok(m.with_unitary_flag(true))
}

/// Beam-splitter action on the `N`-photon block, in the basis
/// `|p, N−p⟩` (p photons in the first mode), `p = 0..=N`.
#[derive(Clone, Debug)]
pub struct NumberBlock {
    pub n: usize,
    /// `(N+1)×(N+1)` row-major: `[out_p][in_p]`.
    pub matrix: Vec<C64>,
}

impl NumberBlock {
    #[inline]
    pub fn get(&self, out_p: usize, in_p: usize) -> C64 {
        self.matrix[out_p * (self.n + 1) + in_p]
    }
}

/// Exact per-photon-number blocks of the beam splitter for `N = 0..=n_max`.
pub fn beam_splitter_blocks(theta: f64, phi: f64, n_max: usize) -> Vec<NumberBlock> {
    (0..=n_max)
        .map(|n| {
            let size = n + 1;
            let e = C64::from_polar(theta, phi);
            let g = DMatrix::<C64>::from_fn(size, size, |r, c| {
                // â_i†â_j: |p, N−p⟩ → √(p+1)√(N−p) |p+1, N−p−1⟩
                if r == c + 1 {
                    e * ((c + 1) as f64 * (n - c) as f64).sqrt()
                } else if c == r + 1 {
                    // −â_iâ_j†: |p, N−p⟩ → −√p√(N−p+1) |p−1, N−p+1⟩
                    -e.conj() * (c as f64 * (n - c + 1) as f64).sqrt()
                } else {
                    zero()
                }
            });
            let u = g.exp();
            let mut matrix = vec![zero(); size * size];
            for r in 0..size {
                for c in 0..size {
                    matrix[r * size + c] = u[(r, c)];
                }
            }
            NumberBlock { n, matrix }
        })
        .collect()
}

/// Cached blocks of the balanced (θ = π/4, φ = 0) beam splitter.
pub fn balanced_blocks(n_max: usize) -> &'static [NumberBlock] {
    static CACHE: OnceLock<Vec<NumberBlock>> = OnceLock::new();
    const CACHED_MAX: usize = 64;
    assert!(n_max <= CACHED_MAX, "balanced beam splitter cache covers N <= {CACHED_MAX}");
    &CACHE.get_or_init(|| beam_splitter_blocks(std::f64::consts::FRAC_PI_4, 0.0, CACHED_MAX))[..=n_max]
}

/// Two-mode beam splitter on `pair` at the padded dimension of `config`.
pub fn beam_splitter_unitary(theta: f64, phi: f64, pair: (usize, usize), config: &FockConfig) -> Result<OperatorMatrix> {
    let (i, j) = pair;
    if i == j || i >= config.n_modes || j >= config.n_modes {
        return Err(Error::InvalidParameter(format!("beam splitter pair ({i}, {j})")));
    }
    beam_splitter_local(theta, phi, config.padded_cutoff()).map(|m| m.on_modes(vec![i, j]))
}

/// Two-mode beam splitter with per-mode dimension `d`, acting on modes `[0, 1]`.
pub fn beam_splitter_local(theta: f64, phi: f64, d: usize) -> Result<OperatorMatrix> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidParameter(format!("beam splitter angles ({theta}, {phi})")));
    }
    let blocks = beam_splitter_blocks(theta, phi, 2 * (d - 1));
    let mut m = OperatorMatrix::from_vec(d, vec![0, 1], vec![zero(); d.pow(4)])?;
    for block in &blocks {
        let n = block.n;
        for p_out in 0..=n {
            let q_out = n - p_out;
            if p_out >= d || q_out >= d {
                continue;
            }
            for p_in in 0..=n {
                let q_in = n - p_in;
                if p_in >= d || q_in >= d {
                    continue;
                }
                m.set(p_out * d + q_out, p_in * d + q_in, block.get(p_out, p_in));
            }
        }
    }
    Ok(m.with_unitary_flag(true))
}

/// Loss channel with transmissivity `eta`:
/// `K_k = √((1−η)^k / k!) η^{n̂/2} â^k`, `k = 0..d−1`, zero operators omitted.
pub fn loss_channel(eta: f64, d: usize) -> Result<ChannelKrausSet> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0, 1]")));
    }
    if d < 2 {
        return Err(Error::InvalidDimension(format!("loss channel dimension {d}")));
    }
    let mut kraus = Vec::new();
    for k in 0..d {
        let mut op = OperatorMatrix::from_vec(d, vec![0], vec![zero(); d * d])?;
        let mut nonzero = false;
        for n in k..d {
            let amp = loss_amplitude(n, k, eta);
            if amp != 0.0 {
                op.set(n - k, n, C64::new(amp, 0.0));
                nonzero = true;
            }
        }
        if nonzero {
            kraus.push(op);
        }
    }
    Ok(ChannelKrausSet { kraus, eta })
}

/// `⟨n−k|K_k|n⟩ = √(C(n,k) (1−η)^k η^{n−k})`.
pub fn loss_amplitude(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    (binomial(n, k) * (1.0 - eta).powi(k as i32) * eta.powi((n - k) as i32)).sqrt()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut b = 1.0;
    for t in 0..k {
        b = b * (n - t) as f64 / (t + 1) as f64;
    }
    b
}

/// Local operator of one circuit element at padded dimension `d_w`.
pub fn element_operator(e: &GaussianElement, d_w: usize, n_modes: usize) -> Result<OperatorMatrix> {
    let check = |m: usize| {
        if m >= n_modes {
            Err(Error::ModeOutOfRange { mode: m, n_modes })
        } else {
            Ok(())
        }
    };
    match *e {
        GaussianElement::Squeeze { mode, s, phi } => {
            check(mode)?;
            Ok(squeeze_unitary(s, phi, d_w)?.on_modes(vec![mode]))
        }
        GaussianElement::Displace { mode, alpha } => {
            check(mode)?;
            Ok(displace_unitary(alpha, d_w)?.on_modes(vec![mode]))
        }
        GaussianElement::BeamSplitter { i, j, theta, phi } => {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(Error::InvalidParameter(format!("beam splitter pair ({i}, {j})")));
            }
            if !(0.0..=FRAC_PI_2).contains(&theta) {
                return Err(Error::InvalidParameter(format!("beam splitter angle {theta}")));
            }
            Ok(beam_splitter_local(theta, phi, d_w)?.on_modes(vec![i, j]))
        }
    }
}

/// Dense product `U_n ⋯ U_1` over all modes at the padded dimension.
/// Intended for small configurations; states are normally evolved with
/// [`apply_circuit`].
pub fn compile_circuit(circ: &GaussianCircuit, config: &FockConfig) -> Result<OperatorMatrix> {
    let d_w = config.padded_cutoff();
    let padded = FockConfig { cutoff: d_w, working_pad: 0, ..*config };
    let mut total = OperatorMatrix::identity(d_w, (0..config.n_modes).collect());
    for e in &circ.elements {
        let local = element_operator(e, d_w, config.n_modes)?;
        let modes = local.modes().to_vec();
        let full = crate::fock::embed_on_modes(&local.on_modes((0..modes.len()).collect()), &modes, &padded)?;
        total = full.matmul(&total)?;
    }
    Ok(total)
}

/// Evolve `state` through the circuit at the padded dimension, then truncate
/// back to the state's own dimensions.
pub fn apply_circuit(
    state: &PureStateVector,
    circ: &GaussianCircuit,
    config: &FockConfig,
    leak_tol: f64,
) -> Result<UnitaryOutcome> {
    let d_w = config.padded_cutoff();
    let ops = circ
        .elements
        .iter()
        .map(|e| element_operator(e, d_w, state.n_modes()))
        .collect::<Result<Vec<_>>>()?;
    let mut ops = ops;
    for m in 0..state.n_modes() {
        if !ops.iter().any(|o| o.modes().contains(&m)) {
            ops.push(OperatorMatrix::identity(d_w, vec![m]));
        }
    }
    crate::fock::apply_unitaries(state, &ops, leak_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_channel, apply_unitary, StateEnsemble, DEFAULT_BRANCH_TOL};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Independent route: dense exponential of the truncated generator in a
    /// much larger space, cropped to `d`.
    fn expm_oracle(gen: impl Fn(&DMatrix<C64>) -> DMatrix<C64>, big: usize, d: usize) -> DMatrix<C64> {
        let a = DMatrix::<C64>::from_fn(big, big, |r, c| {
            if c == r + 1 {
                C64::new((c as f64).sqrt(), 0.0)
            } else {
                zero()
            }
        });
        gen(&a).exp().view((0, 0), (d, d)).into_owned()
    }

    #[test]
    fn squeeze_matches_dense_exponential() {
        let (s, phi, d) = (0.8, 0.7, 16);
        let xi = C64::from_polar(s, phi);
        let oracle = expm_oracle(
            |a| {
                let ad = a.adjoint();
                (a * a * xi.conj() - &ad * &ad * xi) * C64::new(0.5, 0.0)
            },
            200,
            d,
        );
        let u = squeeze_unitary(s, phi, d).unwrap();
        for r in 0..d {
            for c in 0..d {
                assert_abs_diff_eq!((u.get(r, c) - oracle[(r, c)]).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn displace_matches_dense_exponential() {
        let (alpha, d) = (C64::new(1.1, -0.6), 16);
        let oracle = expm_oracle(|a| a.adjoint() * alpha - a * alpha.conj(), 200, d);
        let u = displace_unitary(alpha, d).unwrap();
        for r in 0..d {
            for c in 0..d {
                assert_abs_diff_eq!((u.get(r, c) - oracle[(r, c)]).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn squeezed_vacuum_closed_form() {
        let u = squeeze_unitary(0.5, 0.0, 16).unwrap();
        let expected = -(0.5f64).tanh() * 2f64.sqrt() / 2.0 / (0.5f64).cosh().sqrt();
        assert_abs_diff_eq!(u.get(2, 0).re, expected, epsilon = 1e-12);
        for s in [0.1, 0.4, 0.8] {
            let phi = 1.3;
            let u = squeeze_unitary(s, phi, 16).unwrap();
            for n in 0..8 {
                let closed = C64::new(1.0 / s.cosh().sqrt(), 0.0)
                    * (-C64::from_polar(s.tanh(), phi)).powu(n as u32)
                    * factorial(2 * n).sqrt()
                    / (2f64.powi(n as i32) * factorial(n));
                assert_abs_diff_eq!((u.get(2 * n, 0) - closed).norm(), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(u.get(2 * n + 1, 0).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn zero_parameters_give_identity() {
        let id = OperatorMatrix::identity(8, vec![0]);
        assert_abs_diff_eq!(squeeze_unitary(0.0, 0.3, 8).unwrap().max_abs_diff(&id), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(displace_unitary(zero(), 8).unwrap().max_abs_diff(&id), 0.0, epsilon = 1e-15);
        let cfg = FockConfig::new(2, 4, 2).unwrap();
        let bs = beam_splitter_unitary(0.0, 0.0, (0, 1), &cfg).unwrap();
        assert_abs_diff_eq!(bs.max_abs_diff(&OperatorMatrix::identity(6, vec![0, 1])), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inverse_pairs_compose_to_identity_on_low_levels() {
        let d = 60;
        let low: Vec<usize> = (0..4).collect();
        let a = squeeze_unitary(0.6, 0.4, d).unwrap();
        let b = squeeze_unitary(0.6, 0.4 + PI, d).unwrap();
        let p = b.matmul(&a).unwrap();
        for &r in &low {
            for &c in &low {
                let t = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((p.get(r, c) - C64::new(t, 0.0)).norm(), 0.0, epsilon = 1e-8);
            }
        }
        let alpha = C64::new(0.9, 0.5);
        let p = displace_unitary(-alpha, d).unwrap().matmul(&displace_unitary(alpha, d).unwrap()).unwrap();
        for &r in &low {
            for &c in &low {
                let t = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((p.get(r, c) - C64::new(t, 0.0)).norm(), 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn coherent_state_from_displacement() {
        let u = displace_unitary(C64::new(1.0, 0.0), 16).unwrap();
        for n in 0..16 {
            assert_abs_diff_eq!(u.get(n, 0).re, (-0.5f64).exp() / factorial(n).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn beam_splitter_single_photon_convention() {
        let cfg = FockConfig::new(2, 4, 0).unwrap();
        let bs = beam_splitter_unitary(FRAC_PI_4, 0.0, (0, 1), &cfg).unwrap();
        let psi = PureStateVector::basis(cfg.dims(), &[1, 0]).unwrap();
        let out = apply_unitary(&psi, &bs, 1e-12).unwrap().state;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // U|1,0⟩ = (|1,0⟩ − |0,1⟩)/√2 with U = exp(θ(â_0†â_1 − â_0â_1†))
        assert_abs_diff_eq!(out.amplitude(&[1, 0]).re, h, epsilon = 1e-14);
        assert_abs_diff_eq!(out.amplitude(&[0, 1]).re, -h, epsilon = 1e-14);
    }

    #[test]
    fn beam_splitter_is_unitary_and_number_conserving() {
        let cfg = FockConfig::new(2, 5, 0).unwrap();
        let bs = beam_splitter_unitary(0.37, 1.1, (0, 1), &cfg).unwrap();
        // columns with total photon number < 5 map inside the space
        let domain: Vec<usize> = (0..25).filter(|i| i / 5 + i % 5 < 5).collect();
        assert!(bs.unitarity_defect(Some(&domain)) < 1e-12);
        let psi = PureStateVector::new(
            cfg.dims(),
            (0..25)
                .map(|i| if i / 5 + i % 5 < 5 { C64::new(1.0 + i as f64, 0.3 * i as f64) } else { zero() })
                .collect(),
        )
        .unwrap();
        let out = apply_unitary(&psi, &bs, 1e-12).unwrap();
        assert_eq!(out.leakage, 0.0);
        let before = psi.mean_photon(0) + psi.mean_photon(1);
        let after = out.state.mean_photon(0) + out.state.mean_photon(1);
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn beam_splitter_group_property_on_coherent_states() {
        let cfg = FockConfig::new(2, 12, 8).unwrap();
        let a = PureStateVector::new(vec![12], coherent_amplitudes(C64::new(0.6, 0.2), 12)).unwrap();
        let b = PureStateVector::new(vec![12], coherent_amplitudes(C64::new(-0.3, 0.5), 12)).unwrap();
        let psi = a.tensor(&b);
        let q = beam_splitter_unitary(FRAC_PI_4, 0.0, (0, 1), &cfg).unwrap();
        let h = beam_splitter_unitary(FRAC_PI_2, 0.0, (0, 1), &cfg).unwrap();
        let twice = crate::fock::apply_unitaries(&psi, &[q.clone(), q], 1.0).unwrap();
        let once = apply_unitary(&psi, &h, 1.0).unwrap();
        for (x, y) in twice.state.amplitudes().iter().zip(once.state.amplitudes()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn loss_channel_completeness_and_action() {
        for eta in [0.0, 0.3, 0.7, 1.0] {
            let ch = loss_channel(eta, 10).unwrap();
            assert!(ch.completeness_defect() <= 1e-12, "eta={eta}");
        }
        let id = loss_channel(1.0, 6).unwrap();
        assert_eq!(id.kraus.len(), 1);
        assert_eq!(id.kraus[0], OperatorMatrix::identity(6, vec![0]).with_unitary_flag(false));
        assert!(loss_channel(1.2, 4).is_err());
        assert!(loss_channel(-0.1, 4).is_err());

        let one = StateEnsemble::pure(PureStateVector::basis(vec![6], &[1]).unwrap());
        let out = apply_channel(&one, &loss_channel(0.7, 6).unwrap(), DEFAULT_BRANCH_TOL).unwrap();
        assert_eq!(out.len(), 2);
        assert_abs_diff_eq!(out.members()[0].0, 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(out.members()[0].1.amplitude(&[1]).norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.members()[1].0, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(out.members()[1].1.amplitude(&[0]).norm(), 1.0, epsilon = 1e-14);

        let two = StateEnsemble::pure(PureStateVector::basis(vec![6], &[2]).unwrap());
        let out = apply_channel(&two, &loss_channel(0.7, 6).unwrap(), DEFAULT_BRANCH_TOL).unwrap();
        assert_abs_diff_eq!(out.mean_photon(0), 1.4, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_is_fixed_by_loss() {
        let vac = StateEnsemble::pure(PureStateVector::vacuum(vec![5]));
        for eta in [0.0, 0.5, 1.0] {
            let out = apply_channel(&vac, &loss_channel(eta, 5).unwrap(), DEFAULT_BRANCH_TOL).unwrap();
            assert_eq!(out.len(), 1);
            assert_abs_diff_eq!(out.members()[0].1.amplitude(&[0]).norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn compile_empty_and_inverse_circuits() {
        let cfg = FockConfig::new(2, 3, 13).unwrap();
        let id = compile_circuit(&GaussianCircuit::default(), &cfg).unwrap();
        assert_eq!(id, OperatorMatrix::identity(16, vec![0, 1]));

        let circ = GaussianCircuit::new(vec![
            GaussianElement::Squeeze { mode: 0, s: 0.2, phi: 0.3 },
            GaussianElement::Squeeze { mode: 0, s: 0.2, phi: 0.3 + PI },
        ]);
        let u = compile_circuit(&circ, &cfg).unwrap();
        let low: Vec<usize> = (0..256).filter(|i| i / 16 < 3 && i % 16 < 3).collect();
        for &r in &low {
            for &c in &low {
                let t = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((u.get(r, c) - C64::new(t, 0.0)).norm(), 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn circuit_then_inverse_restores_state() {
        let cfg = FockConfig::new(2, 6, 14).unwrap();
        let circ = GaussianCircuit::new(vec![
            GaussianElement::Squeeze { mode: 0, s: 0.3, phi: 0.2 },
            GaussianElement::Displace { mode: 1, alpha: C64::new(0.4, -0.2) },
            GaussianElement::BeamSplitter { i: 0, j: 1, theta: 0.7, phi: 0.5 },
        ]);
        let psi = PureStateVector::basis(cfg.dims(), &[1, 0]).unwrap();
        let fwd = apply_circuit(&psi, &circ, &cfg, 1.0).unwrap();
        let back = apply_circuit(&fwd.state, &circ.inverse(), &cfg, 1.0).unwrap();
        assert!(fwd.leakage < 1e-3);
        assert_abs_diff_eq!(back.state.inner(&psi).norm(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn squeezed_quadrature_variance_convention() {
        // φ = 0 squeezes x̂, φ = π squeezes p̂; Var_vac = 1
        let d = 40;
        let a = annihilation(d);
        for s in [0.3, 0.8] {
            for (phi, squeezed_is_x) in [(0.0, true), (PI, false)] {
                let u = squeeze_unitary(s, phi, d).unwrap();
                let mut t: Vec<C64> = (0..d).map(|r| u.get(r, 0)).collect();
                let n: f64 = t.iter().map(|c| c.norm_sqr()).sum();
                t.iter_mut().for_each(|c| *c /= n.sqrt());
                let var = quad_variance(&t, &a, squeezed_is_x);
                assert_abs_diff_eq!(var, (-2.0 * s).exp(), epsilon = 1e-4);
            }
        }
    }

    fn annihilation(d: usize) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; d]; d];
        for n in 1..d {
            a[n - 1][n] = (n as f64).sqrt();
        }
        a
    }

    fn quad_variance(psi: &[C64], a: &[Vec<f64>], x: bool) -> f64 {
        let d = psi.len();
        // q = â† + â  or  i(â† − â)
        let apply = |v: &[C64]| -> Vec<C64> {
            (0..d)
                .map(|r| {
                    (0..d)
                        .map(|c| {
                            let adag = a[c][r];
                            let ann = a[r][c];
                            if x {
                                v[c] * (adag + ann)
                            } else {
                                v[c] * C64::new(0.0, adag - ann)
                            }
                        })
                        .sum()
                })
                .collect()
        };
        let qv = apply(psi);
        let mean: f64 = psi.iter().zip(&qv).map(|(p, q)| (p.conj() * q).re).sum();
        let q2: f64 = qv.iter().map(|q| q.norm_sqr()).sum();
        q2 - mean * mean
    }
}
