//! Joint homodyne densities between a singled-out mode `k` and the mode `M`
//! obtained by mixing the remaining modes on balanced beam splitters,
//! binned on a uniform grid (midpoint rule).
//!
//! Tripartite: the two non-`k` modes `i < j` meet on one beam splitter and
//! `X_M = (X_i + X_j)/√2`. Quadripartite: `i < j < l`, first `BS(i, j)`, then
//! `BS(M_ij, l)`, so `X_M = (X_i + X_j + √2 X_l)/2`. `M` is always the first
//! output of each beam splitter and the second output is traced out.
//!
//! Grids are stored with axis 0 = singled mode, axis 1 = mixed mode, in the
//! quadrature-pair order `(X,X), (X,P), (P,X), (P,P)`.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{occupation, partial_trace_expectation, reshape_levels, strides, total_dim, PureStateVector, StateEnsemble};
use crate::gaussian::{balanced_blocks, beam_splitter_local};
use crate::C64;

pub const GRIDS_PER_GROUP: usize = 4;
pub const DEFAULT_BINS: usize = 24;
pub const LOW_MASS: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadGrid {
    pub n_bins: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for QuadGrid {
    fn default() -> Self {
        QuadGrid { n_bins: DEFAULT_BINS, x_min: -6.0, x_max: 6.0 }
    }
}

impl QuadGrid {
    pub fn new(n_bins: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_bins == 0 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("grid {n_bins} bins on [{x_min}, {x_max}]")));
        }
        Ok(QuadGrid { n_bins, x_min, x_max })
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.n_bins).map(|u| self.x_min + (u as f64 + 0.5) * w).collect()
    }

    pub fn cells(&self) -> usize {
        self.n_bins * self.n_bins
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

/// `(singled, mixed)` quadrature pairs in storage order.
pub const QPAIRS: [(Quadrature, Quadrature); 4] = [
    (Quadrature::X, Quadrature::X),
    (Quadrature::X, Quadrature::P),
    (Quadrature::P, Quadrature::X),
    (Quadrature::P, Quadrature::P),
];

/// `ψ_n(x)` for `n < len` under `x̂ = â + â†`, by the stable recurrence of the
/// normalized Hermite functions in `ξ = x/√2`.
pub fn hermite_functions(x: f64, len: usize) -> Vec<f64> {
    let xi = x / std::f64::consts::SQRT_2;
    let scale = 2f64.powf(-0.25);
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for n in 0..len {
        out.push(scale * cur);
        let next = (2.0 / (n + 1) as f64).sqrt() * xi * cur - (n as f64 / (n + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// `⟨q|n⟩`: `ψ_n(x)` for X, `(−i)^n ψ_n(p)` for P.
pub fn quadrature_wavefunction(n: usize, x: f64, which: Quadrature) -> C64 {
    let v = hermite_functions(x, n + 1)[n];
    match which {
        Quadrature::X => C64::new(v, 0.0),
        Quadrature::P => minus_i_pow(n) * v,
    }
}

fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Row `u` holds `⟨q_u|n⟩` for every level `n < d`.
fn wavefunction_table(grid: &QuadGrid, d: usize, which: Quadrature) -> Vec<C64> {
    let mut t = Vec::with_capacity(grid.n_bins * d);
    for x in grid.centers() {
        for (n, v) in hermite_functions(x, d).into_iter().enumerate() {
            t.push(match which {
                Quadrature::X => C64::new(v, 0.0),
                Quadrature::P => minus_i_pow(n) * v,
            });
        }
    }
    t
}

/// Non-`k` modes in ascending order.
pub fn other_modes(k: usize, parties: usize) -> Vec<usize> {
    (0..parties).filter(|&l| l != k).collect()
}

/// Mix modes `first` and `second` on a balanced beam splitter, keep the
/// first output (dimension `d_first + d_second − 1`, in `first`'s slot)
/// and trace out the second; `second` is removed from the mode list.
pub fn mix_and_trace(rho: &DensityMatrix, first: usize, second: usize) -> Result<DensityMatrix> {
    let m = rho.n_modes();
    if first >= m || second >= m || first == second {
        return Err(Error::InvalidParameter(format!("beam splitter pair ({first}, {second}) on {m} modes")));
    }
    let dims = rho.dims();
    let (da, db) = (dims[first], dims[second]);
    let dm = da + db - 1;
    let st = strides(dims);
    let (sa, sb) = (st[first], st[second]);
    let n_in = rho.dim();

    let mut new_dims = dims.to_vec();
    new_dims[first] = dm;
    new_dims.remove(second);
    let slot = first - usize::from(second < first);
    let nst = strides(&new_dims);
    let n_out = total_dim(&new_dims);

    // (input offset, output offset) of every configuration of the other modes
    let mut rest = Vec::new();
    for idx in 0..n_in {
        let occ = occupation(dims, idx);
        if occ[first] != 0 || occ[second] != 0 {
            continue;
        }
        let mut out = 0;
        let mut t = 0;
        for (l, &o) in occ.iter().enumerate() {
            if l == second {
                continue;
            }
            out += o * nst[t];
            t += 1;
        }
        rest.push((idx, out));
    }

    let n_max = da + db - 2;
    let blocks = balanced_blocks(n_max);
    // valid inputs (p in first mode) per photon number N
    let ranges: Vec<(usize, usize)> = (0..=n_max).map(|n| (n.saturating_sub(db - 1), n.min(da - 1))).collect();
    let dd = da * db;
    let local_off: Vec<usize> = (0..dd).map(|t| (t / db) * sa + (t % db) * sb).collect();
    // column layout of the half-transformed block: (N, m) for m = 0..=N
    // rows of the half-transformed block: (N, m) for m = 0..=N
    let row_off: Vec<usize> = (0..=n_max)
        .scan(0, |acc, n| {
            let o = *acc;
            *acc += n + 1;
            Some(o)
        })
        .collect();
    let n_rows = row_off[n_max] + n_max + 1;
    let ms = nst[slot];

    let data = rho.data();
    let mut out = vec![C64::new(0.0, 0.0); n_out * n_out];
    let mut sub = vec![C64::new(0.0, 0.0); dd * dd];
    let mut t = vec![C64::new(0.0, 0.0); n_rows * dd];
    for (a, &(ir, or)) in rest.iter().enumerate() {
        for &(ic, oc) in &rest[a..] {
            let mut any = false;
            for tr in 0..dd {
                let row = (ir + local_off[tr]) * n_in + ic;
                for tc in 0..dd {
                    let v = data[row + local_off[tc]];
                    any |= v.re != 0.0 || v.im != 0.0;
                    sub[tr * dd + tc] = v;
                }
            }
            if !any {
                continue;
            }
            // t[(N, m), ·] = Σ_p U^N[m, p] ρ[(p, N − p), ·]
            t.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (n, &(p0, p1)) in ranges.iter().enumerate() {
                let u = &blocks[n].matrix;
                for m in 0..=n {
                    let dst = (row_off[n] + m) * dd;
                    for p in p0..=p1 {
                        let f = u[m * (n + 1) + p];
                        let src = &sub[(p * db + n - p) * dd..(p * db + n - p + 1) * dd];
                        for (o, v) in t[dst..dst + dd].iter_mut().zip(src) {
                            *o += f * v;
                        }
                    }
                }
            }
            // out[m_r, m_c] = Σ_Q Σ_{p_c} t[(m_r + Q, m_r), (p_c, N_c − p_c)] conj(U^{N_c}[m_c, p_c]),  N_c = m_c + Q
            for mr in 0..=n_max {
                for mc in 0..=n_max {
                    let mut v = C64::new(0.0, 0.0);
                    for q in 0..=n_max - mr.max(mc) {
                        let (nr, nc) = (mr + q, mc + q);
                        let trow = &t[(row_off[nr] + mr) * dd..(row_off[nr] + mr + 1) * dd];
                        let u = &blocks[nc].matrix;
                        let (p0, p1) = ranges[nc];
                        for p in p0..=p1 {
                            v += trow[p * db + nc - p] * u[mc * (nc + 1) + p].conj();
                        }
                    }
                    out[(or + mr * ms) * n_out + oc + mc * ms] += v;
                    if ic != ir {
                        out[(oc + mc * ms) * n_out + or + mr * ms] += v.conj();
                    }
                }
            }
        }
    }
    DensityMatrix::from_raw(new_dims, out)
}

/// Two-mode state `(k, M)` after mixing every other mode into `M`.
pub fn mixed_pair_density(rho: &DensityMatrix, k: usize) -> Result<DensityMatrix> {
    let parties = rho.n_modes();
    if k >= parties {
        return Err(Error::ModeOutOfRange { mode: k, n_modes: parties });
    }
    mixed_pair_density_ordered(rho, k, &other_modes(k, parties))
}

/// As [`mixed_pair_density`], with the cascade order given explicitly:
/// `order[0]` and `order[1]` meet first, later modes join `M` one by one.
pub fn mixed_pair_density_ordered(rho: &DensityMatrix, k: usize, order: &[usize]) -> Result<DensityMatrix> {
    let parties = rho.n_modes();
    let mut check: Vec<usize> = order.iter().copied().chain([k]).collect();
    check.sort_unstable();
    if check != (0..parties).collect::<Vec<_>>() || order.len() < 2 {
        return Err(Error::InvalidParameter(format!("cascade order {order:?} for singled mode {k}")));
    }
    // current position of each original mode
    let mut pos: Vec<Option<usize>> = (0..parties).map(Some).collect();
    let mut cur = rho.clone();
    let m_mode = order[0];
    for &next in &order[1..] {
        let (a, b) = (pos[m_mode].expect("live"), pos[next].expect("live"));
        cur = mix_and_trace(&cur, a, b)?;
        pos[next] = None;
        for p in pos.iter_mut().flatten() {
            if *p > b {
                *p -= 1;
            }
        }
    }
    let (pk, pm) = (pos[k].expect("live"), pos[m_mode].expect("live"));
    if pk < pm {
        Ok(cur)
    } else {
        let mut perm = vec![0; 2];
        perm[pk] = 0;
        perm[pm] = 1;
        cur.permute_modes(&perm)
    }
}

/// Four binned joint densities of a two-mode `(k, M)` state, in [`QPAIRS`] order.
pub fn pair_grids(pair: &DensityMatrix, grid: &QuadGrid) -> Result<Vec<Vec<f64>>> {
    if pair.n_modes() != 2 {
        return Err(Error::InvalidDimension("pair grids need a two-mode state".into()));
    }
    let (dk, dm) = (pair.dims()[0], pair.dims()[1]);
    let nb = grid.n_bins;
    let area = grid.width() * grid.width();
    let n = pair.dim();
    let data = pair.data();
    let singled = [wavefunction_table(grid, dk, Quadrature::X), wavefunction_table(grid, dk, Quadrature::P)];
    let mixed = [wavefunction_table(grid, dm, Quadrature::X), wavefunction_table(grid, dm, Quadrature::P)];

    // t[u][(m, m')] = Σ_{n,n'} a_u[n] ρ[(n,m),(n',m')] conj(a_u[n'])
    let reduce_singled = |a: &[C64]| -> Vec<Vec<C64>> {
        (0..nb)
            .map(|u| {
                let au = &a[u * dk..(u + 1) * dk];
                let mut t = vec![C64::new(0.0, 0.0); dm * dm];
                for (nr, ar) in au.iter().enumerate() {
                    for (nc, ac) in au.iter().enumerate() {
                        let f = ar * ac.conj();
                        for mr in 0..dm {
                            let row = (nr * dm + mr) * n + nc * dm;
                            let trow = &mut t[mr * dm..(mr + 1) * dm];
                            for (o, v) in trow.iter_mut().zip(&data[row..row + dm]) {
                                *o += f * v;
                            }
                        }
                    }
                }
                t
            })
            .collect()
    };
    let t = [reduce_singled(&singled[0]), reduce_singled(&singled[1])];

    let mut out = Vec::with_capacity(4);
    for (qs, qm) in QPAIRS {
        let ts = &t[qs as usize];
        let b = &mixed[qm as usize];
        let mut g = vec![0.0; nb * nb];
        for u in 0..nb {
            for v in 0..nb {
                let bv = &b[v * dm..(v + 1) * dm];
                let mut acc = C64::new(0.0, 0.0);
                for (mr, br) in bv.iter().enumerate() {
                    let mut inner = C64::new(0.0, 0.0);
                    for (mc, bc) in bv.iter().enumerate() {
                        inner += ts[u][mr * dm + mc] * bc.conj();
                    }
                    acc += br * inner;
                }
                g[u * nb + v] = acc.re.max(0.0) * area;
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Stack of `parties × 4` correlation patterns, group-major, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub parties: usize,
    pub grid: QuadGrid,
    pub data: Vec<f64>,
}

impl PatternSet {
    pub fn zeros(parties: usize, grid: QuadGrid) -> Self {
        PatternSet { parties, grid, data: vec![0.0; parties * GRIDS_PER_GROUP * grid.cells()] }
    }

    pub fn n_groups(&self) -> usize {
        self.parties
    }

    pub fn n_grids(&self) -> usize {
        self.parties * GRIDS_PER_GROUP
    }

    pub fn grid_data(&self, group: usize, qpair: usize) -> &[f64] {
        let c = self.grid.cells();
        let o = (group * GRIDS_PER_GROUP + qpair) * c;
        &self.data[o..o + c]
    }

    pub fn grid_data_mut(&mut self, group: usize, qpair: usize) -> &mut [f64] {
        let c = self.grid.cells();
        let o = (group * GRIDS_PER_GROUP + qpair) * c;
        &mut self.data[o..o + c]
    }

    pub fn masses(&self) -> Vec<f64> {
        self.data.chunks(self.grid.cells()).map(|g| g.iter().sum()).collect()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Some grid keeps less than 95% of its probability on the grid.
    pub fn low_mass(&self) -> bool {
        self.min_mass() < LOW_MASS
    }

    /// `self += w · other`
    pub fn add_scaled(&mut self, w: f64, other: &PatternSet) -> Result<()> {
        if self.parties != other.parties || self.grid != other.grid {
            return Err(Error::InvalidDimension("pattern sets differ in shape".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += w * b;
        }
        Ok(())
    }

    /// Group of singled mode `k` moves to slot `perm[k]`; grids are untouched.
    pub fn permute_groups(&self, perm: &[usize]) -> Result<PatternSet> {
        crate::fock::check_perm(perm, self.parties)?;
        let g = GRIDS_PER_GROUP * self.grid.cells();
        let mut data = vec![0.0; self.data.len()];
        for (k, &p) in perm.iter().enumerate() {
            data[p * g..(p + 1) * g].copy_from_slice(&self.data[k * g..(k + 1) * g]);
        }
        Ok(PatternSet { parties: self.parties, grid: self.grid, data })
    }

    pub fn max_abs_diff(&self, other: &PatternSet) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Patterns of a dense state, `k` ascending.
pub fn pattern_set_from_density(rho: &DensityMatrix, grid: &QuadGrid) -> Result<PatternSet> {
    let parties = rho.n_modes();
    if !(3..=4).contains(&parties) {
        return Err(Error::InvalidDimension(format!("patterns need 3 or 4 modes, got {parties}")));
    }
    let mut ps = PatternSet::zeros(parties, *grid);
    for k in 0..parties {
        let pair = mixed_pair_density(rho, k)?;
        for (q, g) in pair_grids(&pair, grid)?.into_iter().enumerate() {
            ps.grid_data_mut(k, q).copy_from_slice(&g);
        }
    }
    Ok(ps)
}

pub fn pattern_set(ens: &StateEnsemble, parties: usize, grid: &QuadGrid) -> Result<PatternSet> {
    if ens.n_modes() != parties {
        return Err(Error::InvalidDimension(format!("{} modes for {parties} parties", ens.n_modes())));
    }
    pattern_set_from_density(&DensityMatrix::from_ensemble(ens), grid)
}

/// Member-wise route: every pure member is embedded with enough levels that
/// the beam splitters lose nothing, then mixed. Output modes keep their
/// labels; `M` is mode `others[0]`.
pub fn mixed_mode_state(ens: &StateEnsemble, k: usize, parties: usize) -> Result<StateEnsemble> {
    if ens.n_modes() != parties || !(3..=4).contains(&parties) || k >= parties {
        return Err(Error::InvalidDimension(format!("mixing mode {k} of {parties} parties")));
    }
    let others = other_modes(k, parties);
    let total: usize = others.iter().map(|&l| ens.dims()[l] - 1).sum::<usize>() + 1;
    let mut big = ens.dims().to_vec();
    for &l in &others {
        big[l] = total;
    }
    let bs = beam_splitter_local(std::f64::consts::FRAC_PI_4, 0.0, total)?;
    let mut ops = vec![bs.clone().on_modes(vec![others[0], others[1]])];
    if parties == 4 {
        ops.push(bs.on_modes(vec![others[0], others[2]]));
    }
    let members = ens
        .members()
        .iter()
        .map(|(w, psi)| {
            let lifted = PureStateVector::new(big.clone(), reshape_levels(psi.amplitudes(), psi.dims(), &big))?;
            let out = crate::fock::apply_unitaries(&lifted, &ops, 1e-10)?;
            Ok((*w, out.state))
        })
        .collect::<Result<Vec<_>>>()?;
    StateEnsemble::new(members)
}

/// One binned joint density via the projector route on the mixed ensemble.
pub fn joint_density_grid(
    ens: &StateEnsemble,
    k: usize,
    qpair: (Quadrature, Quadrature),
    grid: &QuadGrid,
) -> Result<Vec<f64>> {
    let parties = ens.n_modes();
    let mixed = mixed_mode_state(ens, k, parties)?;
    let m = other_modes(k, parties)[0];
    let (dk, dm) = (mixed.dims()[k], mixed.dims()[m]);
    let area = grid.width() * grid.width();
    let centers = grid.centers();
    // projector coefficients ⟨n|q⟩ = conj(⟨q|n⟩)
    let proj = |x: f64, d: usize, q: Quadrature| -> Vec<C64> {
        (0..d).map(|n| quadrature_wavefunction(n, x, q).conj()).collect()
    };
    let mut g = Vec::with_capacity(grid.cells());
    for &x in &centers {
        let a = proj(x, dk, qpair.0);
        for &y in &centers {
            let b = proj(y, dm, qpair.1);
            g.push(partial_trace_expectation(&mixed, &[k, m], &[a.clone(), b])? * area);
        }
    }
    Ok(g)
}
