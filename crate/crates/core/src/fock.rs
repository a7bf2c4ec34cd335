//! Truncated Fock-space states, operators and channel application.
//!
//! Multimode amplitudes are stored in a mixed-radix layout: the occupation
//! `(n_0, …, n_{m-1})` lives at `Σ n_l · stride_l` with mode 0 the most
//! significant digit. Per-mode dimensions may differ (mixed beam-splitter
//! outputs need more levels than their inputs), so states carry `dims`
//! rather than a single cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Upper bound on the number of amplitudes of a single state vector.
pub const DIM_BUDGET: usize = 1 << 20;
/// Default tolerated norm loss when truncating after a unitary.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;
/// Kraus branches lighter than this are dropped.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockConfig {
    pub n_modes: usize,
    /// Levels `0..cutoff` are kept per mode.
    pub cutoff: usize,
    /// Extra levels used while applying unitaries.
    pub working_pad: usize,
}

impl FockConfig {
    pub fn new(n_modes: usize, cutoff: usize, working_pad: usize) -> Result<Self> {
        if !(1..=4).contains(&n_modes) {
            return Err(Error::InvalidDimension(format!("n_modes = {n_modes}, expected 1..=4")));
        }
        if cutoff < 2 {
            return Err(Error::InvalidDimension(format!("cutoff = {cutoff}, expected >= 2")));
        }
        let cfg = FockConfig { n_modes, cutoff, working_pad };
        let padded = cfg.padded_cutoff().checked_pow(n_modes as u32).unwrap_or(usize::MAX);
        if padded > DIM_BUDGET {
            return Err(Error::BudgetExceeded { dim: padded, budget: DIM_BUDGET });
        }
        Ok(cfg)
    }

    /// Defaults: cutoff 10 for up to three modes, 7 for four; pad 6.
    pub fn default_for(n_modes: usize) -> Result<Self> {
        let cutoff = if n_modes >= 4 { 7 } else { 10 };
        Self::new(n_modes, cutoff, 6)
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.n_modes as u32)
    }

    pub fn padded_cutoff(&self) -> usize {
        self.cutoff + self.working_pad
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.cutoff; self.n_modes]
    }
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for l in (0..dims.len().saturating_sub(1)).rev() {
        s[l] = s[l + 1] * dims[l + 1];
    }
    s
}

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn index_of(dims: &[usize], occ: &[usize]) -> usize {
    occ.iter().zip(strides(dims)).map(|(n, s)| n * s).sum()
}

pub fn occupation(dims: &[usize], mut idx: usize) -> Vec<usize> {
    let mut occ = vec![0; dims.len()];
    for l in (0..dims.len()).rev() {
        occ[l] = idx % dims[l];
        idx /= dims[l];
    }
    occ
}

/// Copy `amps` laid out over `from` into a layout over `to`, dropping levels
/// that do not fit and zero-filling new ones.
pub fn reshape_levels(amps: &[C64], from: &[usize], to: &[usize]) -> Vec<C64> {
    debug_assert_eq!(from.len(), to.len());
    let mut out = vec![C64::new(0.0, 0.0); total_dim(to)];
    let ts = strides(to);
    for (idx, a) in amps.iter().enumerate() {
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        let occ = occupation(from, idx);
        if occ.iter().zip(to).all(|(n, d)| n < d) {
            let j: usize = occ.iter().zip(&ts).map(|(n, s)| n * s).sum();
            out[j] = *a;
        }
    }
    out
}

fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureStateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl PureStateVector {
    /// Normalizing constructor.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != total_dim(&dims) {
            return Err(Error::InvalidDimension(format!(
                "{} amplitudes for dims {:?}",
                amps.len(),
                dims
            )));
        }
        let n = norm_sqr(&amps);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical(format!("state norm {n}")));
        }
        let inv = 1.0 / n.sqrt();
        Ok(PureStateVector { dims, amps: amps.into_iter().map(|a| a * inv).collect() })
    }

    pub fn from_config(config: &FockConfig, amps: Vec<C64>) -> Result<Self> {
        Self::new(config.dims(), amps)
    }

    pub fn basis(dims: Vec<usize>, occ: &[usize]) -> Result<Self> {
        if occ.len() != dims.len() || occ.iter().zip(&dims).any(|(n, d)| n >= d) {
            return Err(Error::InvalidDimension(format!("occupation {occ:?} outside {dims:?}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); total_dim(&dims)];
        amps[index_of(&dims, occ)] = C64::new(1.0, 0.0);
        Ok(PureStateVector { dims, amps })
    }

    pub fn vacuum(dims: Vec<usize>) -> Self {
        let occ = vec![0; dims.len()];
        Self::basis(dims, &occ).expect("vacuum fits any dims")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, occ: &[usize]) -> C64 {
        self.amps[index_of(&self.dims, occ)]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn inner(&self, other: &PureStateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// ⟨n̂_mode⟩
    pub fn mean_photon(&self, mode: usize) -> f64 {
        let s = strides(&self.dims)[mode];
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| ((i / s) % self.dims[mode]) as f64 * a.norm_sqr())
            .sum()
    }

    /// Tensor product `self ⊗ other`; `other`'s modes follow `self`'s.
    pub fn tensor(&self, other: &PureStateVector) -> PureStateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureStateVector { dims, amps }
    }

    /// Relabel modes: mode `l` of `self` becomes mode `perm[l]` of the result.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<PureStateVector> {
        check_perm(perm, self.n_modes())?;
        let mut new_dims = vec![0; self.dims.len()];
        for (l, &p) in perm.iter().enumerate() {
            new_dims[p] = self.dims[l];
        }
        let ns = strides(&new_dims);
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let occ = occupation(&self.dims, idx);
            let j: usize = occ.iter().zip(perm).map(|(n, &p)| n * ns[p]).sum();
            amps[j] = *a;
        }
        Ok(PureStateVector { dims: new_dims, amps })
    }

    /// Change per-mode dimensions without renormalizing. Returns the
    /// unnormalized vector and its squared norm.
    pub(crate) fn relevel_raw(&self, to: &[usize]) -> (Vec<C64>, f64) {
        let v = reshape_levels(&self.amps, &self.dims, to);
        let n = norm_sqr(&v);
        (v, n)
    }

    #[cfg(test)]
    pub(crate) fn from_raw(dims: Vec<usize>, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), total_dim(&dims));
        PureStateVector { dims, amps }
    }
}

pub(crate) fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidParameter(format!("permutation {perm:?} for {n} modes")));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidParameter(format!("not a permutation: {perm:?}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Mixed state as a weighted list of pure states.
#[derive(Clone, Debug)]
pub struct StateEnsemble {
    members: Vec<(f64, PureStateVector)>,
    dropped_weight: f64,
}

impl StateEnsemble {
    /// Weights must be positive; they are renormalized to sum to one.
    pub fn new(members: Vec<(f64, PureStateVector)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        };
        let dims = first.dims.clone();
        let mut total = 0.0;
        for (w, s) in &members {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("ensemble weight {w}")));
            }
            if s.dims != dims {
                return Err(Error::InvalidDimension("ensemble members differ in dims".into()));
            }
            total += w;
        }
        let members = members.into_iter().map(|(w, s)| (w / total, s)).collect();
        Ok(StateEnsemble { members, dropped_weight: 0.0 })
    }

    pub fn pure(state: PureStateVector) -> Self {
        StateEnsemble { members: vec![(1.0, state)], dropped_weight: 0.0 }
    }

    pub fn members(&self) -> &[(f64, PureStateVector)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        self.members[0].1.dims()
    }

    pub fn n_modes(&self) -> usize {
        self.dims().len()
    }

    /// Weight discarded by branch pruning over this ensemble's history.
    pub fn dropped_weight(&self) -> f64 {
        self.dropped_weight
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, _)| w).sum()
    }

    /// Convex combination `Σ p_i ρ_i`.
    pub fn mixture(parts: &[(f64, &StateEnsemble)]) -> Result<Self> {
        let mut members = Vec::new();
        let mut dropped = 0.0;
        for (p, e) in parts {
            dropped += p * e.dropped_weight;
            members.extend(e.members.iter().map(|(w, s)| (p * w, s.clone())));
        }
        let mut out = Self::new(members)?;
        out.dropped_weight = dropped;
        Ok(out)
    }

    pub fn tensor(&self, other: &StateEnsemble) -> StateEnsemble {
        let mut members = Vec::with_capacity(self.len() * other.len());
        for (wa, a) in &self.members {
            for (wb, b) in &other.members {
                members.push((wa * wb, a.tensor(b)));
            }
        }
        StateEnsemble {
            members,
            dropped_weight: self.dropped_weight + other.dropped_weight,
        }
    }

    pub fn permute_modes(&self, perm: &[usize]) -> Result<StateEnsemble> {
        let members = self
            .members
            .iter()
            .map(|(w, s)| Ok((*w, s.permute_modes(perm)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(StateEnsemble { members, dropped_weight: self.dropped_weight })
    }

    pub fn mean_photon(&self, mode: usize) -> f64 {
        self.members.iter().map(|(w, s)| w * s.mean_photon(mode)).sum()
    }

    pub(crate) fn from_parts(members: Vec<(f64, PureStateVector)>, dropped_weight: f64) -> Self {
        StateEnsemble { members, dropped_weight }
    }
}

/// Dense complex matrix acting on the listed modes, each of dimension
/// `local_dim`. Rows/columns follow the mixed-radix order of `modes` as listed.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
    modes: Vec<usize>,
    local_dim: usize,
    unitary: bool,
}

impl OperatorMatrix {
    pub fn from_vec(local_dim: usize, modes: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n = local_dim.pow(modes.len() as u32);
        if data.len() != n * n {
            return Err(Error::InvalidDimension(format!(
                "{} entries for a {n}x{n} operator",
                data.len()
            )));
        }
        Ok(OperatorMatrix { rows: n, cols: n, data, modes, local_dim, unitary: false })
    }

    pub fn identity(local_dim: usize, modes: Vec<usize>) -> Self {
        let n = local_dim.pow(modes.len() as u32);
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = C64::new(1.0, 0.0);
        }
        OperatorMatrix { rows: n, cols: n, data, modes, local_dim, unitary: true }
    }

    pub fn with_unitary_flag(mut self, unitary: bool) -> Self {
        self.unitary = unitary;
        self
    }

    /// Same matrix, acting on different modes.
    pub fn on_modes(mut self, modes: Vec<usize>) -> Self {
        assert_eq!(modes.len(), self.modes.len(), "mode count must match the matrix arity");
        self.modes = modes;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn is_flagged_unitary(&self) -> bool {
        self.unitary
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        let mut data = vec![C64::new(0.0, 0.0); self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        OperatorMatrix { rows: self.cols, cols: self.rows, data, ..self.clone() }
    }

    /// Matrix product `self · rhs`; both must act on the same modes.
    pub fn matmul(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.cols != rhs.rows || self.modes != rhs.modes {
            return Err(Error::InvalidDimension("operator product shape/mode mismatch".into()));
        }
        let mut data = vec![C64::new(0.0, 0.0); self.rows * rhs.cols];
        for r in 0..self.rows {
            let out = &mut data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(&rhs.data[k * rhs.cols..(k + 1) * rhs.cols]) {
                    *o += a * b;
                }
            }
        }
        Ok(OperatorMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
            modes: self.modes.clone(),
            local_dim: self.local_dim,
            unitary: self.unitary && rhs.unitary,
        })
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |(U†U − I)_{ij}|` over columns `< domain` (all columns when `None`).
    pub fn unitarity_defect(&self, domain: Option<&[usize]>) -> f64 {
        let ud = self.adjoint().matmul(self).expect("square operator");
        let mut worst: f64 = 0.0;
        let cols: Vec<usize> = match domain {
            Some(d) => d.to_vec(),
            None => (0..self.cols).collect(),
        };
        for &i in &cols {
            for &j in &cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ud.get(i, j) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Apply to a state vector laid out over `dims`, acting on `self.modes`.
    pub(crate) fn apply_local(&self, amps: &[C64], dims: &[usize]) -> Result<Vec<C64>> {
        for &m in &self.modes {
            if m >= dims.len() {
                return Err(Error::ModeOutOfRange { mode: m, n_modes: dims.len() });
            }
            if dims[m] != self.local_dim {
                return Err(Error::InvalidDimension(format!(
                    "operator local dim {} vs mode {m} dim {}",
                    self.local_dim, dims[m]
                )));
            }
        }
        let st = strides(dims);
        let local: Vec<usize> = (0..self.rows)
            .map(|li| {
                let mut rem = li;
                let mut off = 0;
                for &m in self.modes.iter().rev() {
                    off += (rem % self.local_dim) * st[m];
                    rem /= self.local_dim;
                }
                off
            })
            .collect();
        let outer_dims: Vec<(usize, usize)> = (0..dims.len())
            .filter(|l| !self.modes.contains(l))
            .map(|l| (dims[l], st[l]))
            .collect();
        let n_outer: usize = outer_dims.iter().map(|(d, _)| d).product();
        let mut out = vec![C64::new(0.0, 0.0); amps.len()];
        let mut buf = vec![C64::new(0.0, 0.0); self.rows];
        for o in 0..n_outer {
            let mut rem = o;
            let mut base = 0;
            for &(d, s) in outer_dims.iter().rev() {
                base += (rem % d) * s;
                rem /= d;
            }
            let mut any = false;
            for (b, off) in buf.iter_mut().zip(&local) {
                *b = amps[base + off];
                any |= b.re != 0.0 || b.im != 0.0;
            }
            if !any {
                continue;
            }
            for (r, off) in local.iter().enumerate() {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                out[base + off] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }
}

/// Truncated annihilation operator: `(a)_{n-1,n} = √n`.
pub fn annihilation_matrix(d: usize) -> Result<OperatorMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("annihilation operator needs D >= 2, got {d}")));
    }
    let mut op = OperatorMatrix::from_vec(d, vec![0], vec![C64::new(0.0, 0.0); d * d])?;
    for n in 1..d {
        op.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    Ok(op)
}

/// `op ⊗ 1` on the remaining modes, as an operator over all modes of `config`.
pub fn embed_on_modes(op: &OperatorMatrix, modes: &[usize], config: &FockConfig) -> Result<OperatorMatrix> {
    let d = config.cutoff;
    for &m in modes {
        if m >= config.n_modes {
            return Err(Error::ModeOutOfRange { mode: m, n_modes: config.n_modes });
        }
    }
    if op.local_dim != d || op.rows != d.pow(modes.len() as u32) {
        return Err(Error::InvalidDimension(format!(
            "operator of size {} does not act on {} modes of dimension {d}",
            op.rows,
            modes.len()
        )));
    }
    let local = op.clone().on_modes(modes.to_vec());
    let dims = config.dims();
    let n = config.dim();
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    let mut col = vec![C64::new(0.0, 0.0); n];
    for c in 0..n {
        col.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        col[c] = C64::new(1.0, 0.0);
        let image = local.apply_local(&col, &dims)?;
        for (r, v) in image.into_iter().enumerate() {
            data[r * n + c] = v;
        }
    }
    Ok(OperatorMatrix {
        rows: n,
        cols: n,
        data,
        modes: (0..config.n_modes).collect(),
        local_dim: d,
        unitary: op.unitary,
    })
}

/// Apply any operator (not necessarily unitary) to a state, without
/// renormalizing. Useful for ladder-operator checks.
pub fn apply_operator(state: &PureStateVector, op: &OperatorMatrix) -> Result<Vec<C64>> {
    op.apply_local(&state.amps, &state.dims)
}

#[derive(Clone, Debug)]
pub struct UnitaryOutcome {
    pub state: PureStateVector,
    /// `1 − ‖P_D U ψ‖²`: weight lost by truncating back to the input dims.
    pub leakage: f64,
}

/// Apply `u` at its (padded) local dimension, truncate back to the input
/// dimensions and renormalize.
pub fn apply_unitary(state: &PureStateVector, u: &OperatorMatrix, leak_tol: f64) -> Result<UnitaryOutcome> {
    apply_unitaries(state, std::slice::from_ref(u), leak_tol)
}

/// Apply a sequence of local unitaries in the padded space, truncating once
/// at the end.
pub fn apply_unitaries(state: &PureStateVector, ops: &[OperatorMatrix], leak_tol: f64) -> Result<UnitaryOutcome> {
    let mut work_dims = state.dims.clone();
    for op in ops {
        for &m in op.modes() {
            if m >= work_dims.len() {
                return Err(Error::ModeOutOfRange { mode: m, n_modes: work_dims.len() });
            }
            if op.local_dim < state.dims[m] {
                return Err(Error::InvalidDimension(format!(
                    "operator dimension {} below state dimension {} on mode {m}",
                    op.local_dim, state.dims[m]
                )));
            }
            work_dims[m] = work_dims[m].max(op.local_dim);
        }
    }
    for op in ops {
        if op.modes().iter().any(|&m| work_dims[m] != op.local_dim) {
            return Err(Error::InvalidDimension("inconsistent padded dimensions".into()));
        }
    }
    let (mut v, _) = state.relevel_raw(&work_dims);
    for op in ops {
        v = op.apply_local(&v, &work_dims)?;
    }
    let truncated = reshape_levels(&v, &work_dims, &state.dims);
    let kept = norm_sqr(&truncated);
    let leakage = (1.0 - kept).max(0.0);
    if leakage > leak_tol {
        return Err(Error::TruncationOverflow { leakage, tol: leak_tol });
    }
    let state = PureStateVector::new(state.dims.clone(), truncated)?;
    Ok(UnitaryOutcome { state, leakage })
}

/// Completely positive map given by single-mode Kraus operators.
#[derive(Clone, Debug)]
pub struct ChannelKrausSet {
    pub kraus: Vec<OperatorMatrix>,
    /// Transmissivity, for loss channels.
    pub eta: f64,
}

impl ChannelKrausSet {
    /// Same channel acting on another mode.
    pub fn on_mode(self, mode: usize) -> Self {
        ChannelKrausSet {
            kraus: self.kraus.into_iter().map(|k| k.on_modes(vec![mode])).collect(),
            eta: self.eta,
        }
    }

    /// `max |Σ K†K − I|`.
    pub fn completeness_defect(&self) -> f64 {
        let Some(first) = self.kraus.first() else {
            return f64::INFINITY;
        };
        let n = first.rows;
        let mut acc = vec![C64::new(0.0, 0.0); n * n];
        for k in &self.kraus {
            let kk = k.adjoint().matmul(k).expect("square kraus");
            for (a, b) in acc.iter_mut().zip(kk.data) {
                *a += b;
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc[i * n + j] - C64::new(t, 0.0)).norm());
            }
        }
        worst
    }
}

/// Expand each member `(p, ψ)` into branches `(p‖Kψ‖², Kψ/‖Kψ‖)`.
pub fn apply_channel(ens: &StateEnsemble, ch: &ChannelKrausSet, branch_tol: f64) -> Result<StateEnsemble> {
    let deviation = ch.completeness_defect();
    if deviation > 1e-9 {
        return Err(Error::InvalidChannel { deviation });
    }
    let mut members = Vec::new();
    let mut dropped = 0.0;
    for (p, psi) in ens.members() {
        for k in &ch.kraus {
            let v = k.apply_local(&psi.amps, &psi.dims)?;
            let w = p * norm_sqr(&v);
            if w < branch_tol {
                dropped += w;
                continue;
            }
            members.push((w, PureStateVector::new(psi.dims.clone(), v)?));
        }
    }
    if members.is_empty() {
        return Err(Error::Numerical("channel output has no branch above tolerance".into()));
    }
    let total: f64 = members.iter().map(|(w, _)| w).sum();
    let members = members.into_iter().map(|(w, s)| (w / total, s)).collect();
    Ok(StateEnsemble::from_parts(members, ens.dropped_weight + dropped))
}

/// Born-rule density `Σ_γ p_γ Σ_rest |⟨v_1 ⊗ … ⊗ rest|ψ_γ⟩|²`, where each
/// `proj_vectors[i]` holds the Fock coefficients `⟨n|v⟩` of the projector on
/// `proj_modes[i]` and all other modes are traced out.
pub fn partial_trace_expectation(
    ens: &StateEnsemble,
    proj_modes: &[usize],
    proj_vectors: &[Vec<C64>],
) -> Result<f64> {
    let dims = ens.dims().to_vec();
    if proj_modes.len() != proj_vectors.len() || proj_modes.is_empty() {
        return Err(Error::InvalidDimension("projector list mismatch".into()));
    }
    for (m, v) in proj_modes.iter().zip(proj_vectors) {
        if *m >= dims.len() {
            return Err(Error::ModeOutOfRange { mode: *m, n_modes: dims.len() });
        }
        if v.len() != dims[*m] {
            return Err(Error::InvalidDimension(format!(
                "projector of length {} on mode {m} of dimension {}",
                v.len(),
                dims[*m]
            )));
        }
    }
    let st = strides(&dims);
    let rest: Vec<usize> = (0..dims.len()).filter(|l| !proj_modes.contains(l)).collect();
    let n_rest: usize = rest.iter().map(|&l| dims[l]).product();
    let n_proj: usize = proj_modes.iter().map(|&l| dims[l]).product();
    // coefficient and offset of every projected multi-index
    let mut proj_terms = Vec::with_capacity(n_proj);
    for pi in 0..n_proj {
        let mut rem = pi;
        let mut off = 0;
        let mut coef = C64::new(1.0, 0.0);
        for (m, v) in proj_modes.iter().zip(proj_vectors).rev() {
            let n = rem % dims[*m];
            rem /= dims[*m];
            off += n * st[*m];
            coef *= v[n].conj();
        }
        if coef.norm_sqr() > 0.0 {
            proj_terms.push((off, coef));
        }
    }
    let mut total = 0.0;
    for (p, psi) in ens.members() {
        let mut acc = 0.0;
        for ri in 0..n_rest {
            let mut rem = ri;
            let mut base = 0;
            for &l in rest.iter().rev() {
                base += (rem % dims[l]) * st[l];
                rem /= dims[l];
            }
            let amp: C64 = proj_terms.iter().map(|(off, c)| c * psi.amps[base + off]).sum();
            acc += amp.norm_sqr();
        }
        total += p * acc;
    }
    Ok(total)
}
