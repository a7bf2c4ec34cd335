//! Dense density matrices over a mixed-radix multimode Fock basis.
//!
//! Used where ensembles would blow up: the entanglement certificate
//! (partial transpose) and the homodyne reduction of multi-seed samples,
//! whose loss channels would otherwise expand into `D^m` pure branches.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{check_perm, occupation, strides, total_dim, PureStateVector, StateEnsemble};
use crate::gaussian::loss_amplitude;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: Vec<C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl DensityMatrix {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = total_dim(&dims);
        DensityMatrix { dims, data: vec![zero(); n * n] }
    }

    pub fn from_raw(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n = total_dim(&dims);
        if data.len() != n * n {
            return Err(Error::InvalidDimension(format!("{} entries for dimension {n}", data.len())));
        }
        Ok(DensityMatrix { dims, data })
    }

    pub fn from_pure(psi: &PureStateVector) -> Self {
        let mut rho = Self::zeros(psi.dims().to_vec());
        rho.add_pure(1.0, psi.amplitudes());
        rho
    }

    pub fn from_ensemble(ens: &StateEnsemble) -> Self {
        let mut rho = Self::zeros(ens.dims().to_vec());
        for (w, psi) in ens.members() {
            rho.add_pure(*w, psi.amplitudes());
        }
        rho
    }

    /// `ρ += w |v⟩⟨v|`
    pub fn add_pure(&mut self, w: f64, v: &[C64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        for (r, a) in v.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let a = a * w;
            let row = &mut self.data[r * n..(r + 1) * n];
            for (o, b) in row.iter_mut().zip(v) {
                *o += a * b.conj();
            }
        }
    }

    /// `ρ += w σ`
    pub fn add_scaled(&mut self, w: f64, other: &DensityMatrix) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::InvalidDimension("density dims differ".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * w;
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        total_dim(&self.dims)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| self.data[i * n + i].re).sum()
    }

    pub fn scale(&mut self, f: f64) {
        self.data.iter_mut().for_each(|v| *v *= f);
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.data[r * n + c] - self.data[c * n + r].conj()).norm());
            }
        }
        worst
    }

    pub fn mean_photon(&self, mode: usize) -> f64 {
        let n = self.dim();
        let s = strides(&self.dims)[mode];
        (0..n).map(|i| ((i / s) % self.dims[mode]) as f64 * self.data[i * n + i].re).sum()
    }

    /// `self ⊗ other`, modes of `other` after those of `self`.
    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let (na, nb) = (self.dim(), other.dim());
        let n = na * nb;
        let mut data = vec![zero(); n * n];
        for ra in 0..na {
            for ca in 0..na {
                let a = self.data[ra * na + ca];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for rb in 0..nb {
                    let dst = (ra * nb + rb) * n + ca * nb;
                    let src = &other.data[rb * nb..(rb + 1) * nb];
                    for (o, b) in data[dst..dst + nb].iter_mut().zip(src) {
                        *o = a * b;
                    }
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix { dims, data }
    }

    /// Relabel modes: mode `l` becomes mode `perm[l]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<DensityMatrix> {
        check_perm(perm, self.n_modes())?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let mut new_dims = vec![0; self.dims.len()];
        for (l, &p) in perm.iter().enumerate() {
            new_dims[p] = self.dims[l];
        }
        let ns = strides(&new_dims);
        let n = self.dim();
        let map: Vec<usize> = (0..n)
            .map(|i| occupation(&self.dims, i).iter().zip(perm).map(|(o, &p)| o * ns[p]).sum())
            .collect();
        let mut data = vec![zero(); n * n];
        for r in 0..n {
            let dr = map[r] * n;
            for c in 0..n {
                data[dr + map[c]] = self.data[r * n + c];
            }
        }
        Ok(DensityMatrix { dims: new_dims, data })
    }

    /// Loss channel of transmissivity `eta` on `mode`, applied in place of the
    /// Kraus expansion: `ρ' = Σ_k K_k ρ K_k†`.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<DensityMatrix> {
        if mode >= self.n_modes() {
            return Err(Error::ModeOutOfRange { mode, n_modes: self.n_modes() });
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0, 1]")));
        }
        let d = self.dims[mode];
        let table: Vec<Vec<f64>> = (0..d).map(|n| (0..=n).map(|k| loss_amplitude(n, k, eta)).collect()).collect();
        let n = self.dim();
        let s = strides(&self.dims)[mode];
        let level: Vec<usize> = (0..n).map(|i| (i / s) % d).collect();
        // col_factor[k][c] = ⟨n_c − k|K_k|n_c⟩, zero when n_c < k
        let col_factor: Vec<Vec<f64>> = (0..d)
            .map(|k| level.iter().map(|&l| if l >= k { table[l][k] } else { 0.0 }).collect())
            .collect();
        let mut data = vec![zero(); n * n];
        for r in 0..n {
            let nr = level[r];
            let src = &self.data[r * n..(r + 1) * n];
            for k in 0..=nr {
                let fr = table[nr][k];
                let shift = k * s;
                let dst = (r - shift) * n;
                let cf = &col_factor[k][shift..];
                let out = &mut data[dst..dst + n - shift];
                for ((o, v), f) in out.iter_mut().zip(&src[shift..]).zip(cf) {
                    *o += v * (fr * f);
                }
            }
        }
        Ok(DensityMatrix { dims: self.dims.clone(), data })
    }

    /// Partial transpose over the modes in `subset`.
    pub fn partial_transpose(&self, subset: &[usize]) -> Result<DensityMatrix> {
        for &m in subset {
            if m >= self.n_modes() {
                return Err(Error::ModeOutOfRange { mode: m, n_modes: self.n_modes() });
            }
        }
        let n = self.dim();
        let st = strides(&self.dims);
        let mut data = vec![zero(); n * n];
        for r in 0..n {
            let or = occupation(&self.dims, r);
            for c in 0..n {
                let oc = occupation(&self.dims, c);
                let (mut r2, mut c2) = (0, 0);
                for l in 0..self.dims.len() {
                    let (a, b) = if subset.contains(&l) { (oc[l], or[l]) } else { (or[l], oc[l]) };
                    r2 += a * st[l];
                    c2 += b * st[l];
                }
                data[r2 * n + c2] = self.data[r * n + c];
            }
        }
        Ok(DensityMatrix { dims: self.dims.clone(), data })
    }

    /// Crop every mode to at most `d_v` levels (a local projection) and
    /// renormalize. Returns the cropped state and the trace that survived.
    pub fn project_levels(&self, d_v: usize) -> Result<(DensityMatrix, f64)> {
        let new_dims: Vec<usize> = self.dims.iter().map(|&d| d.min(d_v)).collect();
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&i| occupation(&self.dims, i).iter().all(|&o| o < d_v))
            .collect();
        let n = self.dim();
        let mut data = Vec::with_capacity(keep.len() * keep.len());
        for &r in &keep {
            for &c in &keep {
                data.push(self.data[r * n + c]);
            }
        }
        let mut out = DensityMatrix { dims: new_dims, data };
        let tr = out.trace();
        if !(tr > 0.0) {
            return Err(Error::Numerical("projected state has zero trace".into()));
        }
        out.scale(1.0 / tr);
        Ok((out, tr))
    }

    /// Reduced state on `keep` (in the listed order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let m = self.n_modes();
        let traced: Vec<usize> = (0..m).filter(|l| !keep.contains(l)).collect();
        let mut perm = vec![0; m];
        for (t, &l) in keep.iter().chain(&traced).enumerate() {
            perm[l] = t;
        }
        let p = self.permute_modes(&perm)?;
        let nk: usize = keep.iter().map(|&l| self.dims[l]).product();
        let nt: usize = traced.iter().map(|&l| self.dims[l]).product();
        let n = nk * nt;
        let mut data = vec![zero(); nk * nk];
        for a in 0..nk {
            for b in 0..nk {
                data[a * nk + b] = (0..nt).map(|t| p.data[(a * nt + t) * n + b * nt + t]).sum();
            }
        }
        Ok(DensityMatrix { dims: keep.iter().map(|&l| self.dims[l]).collect(), data })
    }

    /// Eigenvalues, treating the matrix as Hermitian.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = DMatrix::<C64>::from_fn(n, n, |r, c| {
            // symmetrize away rounding noise
            (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5
        });
        m.symmetric_eigenvalues().iter().copied().collect()
    }
}
