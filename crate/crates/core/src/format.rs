//! Dataset files: a little-endian binary body plus a JSON sidecar.
//!
//! ```text
//! "CVPD" | u16 version | u8 parties | u8 n_groups | u8 grids_per_group
//! | u16 grid_size | u8 n_classes | u64 n_samples | f64 x_min | f64 x_max
//! | u64 convention_hash
//! then per sample: u8 label | f32 grids (group, quadrature pair, row, column)
//! ```
//!
//! The sidecar (`<file>.json`) carries the generator config, history and
//! per-sample provenance; the binary alone is enough to train.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{BuildStats, DatasetConfig, DatasetHeader, LabeledSample, Lineage, PartitionClass, PatternDataset, Provenance, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::homodyne::{QuadGrid, GRIDS_PER_GROUP};

pub const DATASET_MAGIC: &[u8; 4] = b"CVPD";
pub const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 1 + 2 + 1 + 8 + 8 + 8 + 8;

/// Everything a reader must agree on for the grids to mean the same thing.
pub const CONVENTIONS: &str = "cvpd-v1;x=a+a^dag;p=i(a^dag-a);<q|n>:X=psi_n,P=(-i)^n psi_n;\
bs=exp(theta(a_i^dag a_j-a_i a_j^dag)),theta=pi/4,phi=0;M=first output,second traced;\
tri:BS(i<j);quad:BS(i<j),BS(M,l);axes=(singled,mixed);qpairs=XX,XP,PX,PP;midpoint;\
labels3=FULLY_SEP,BISEP,FULLY_INSEP;labels4=FULLY_SEP,TRISEP,BISEP_22,BISEP_13,FULLY_INSEP";

pub fn convention_hash() -> u64 {
    let d = Sha256::digest(CONVENTIONS.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub header: DatasetHeader,
    pub config: Option<DatasetConfig>,
    pub history: Vec<serde_json::Value>,
    pub stats: BuildStats,
    pub provenance: Vec<Provenance>,
}

pub fn encode_dataset(ds: &PatternDataset) -> Result<Vec<u8>> {
    let h = ds.header();
    let len = ds.sample_len();
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (1 + 4 * len));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&h.version.to_le_bytes());
    out.push(h.parties);
    out.push(h.n_groups);
    out.push(h.grids_per_group);
    out.extend_from_slice(&h.grid_size.to_le_bytes());
    out.push(h.n_classes);
    out.extend_from_slice(&h.n_samples.to_le_bytes());
    out.extend_from_slice(&h.x_min.to_le_bytes());
    out.extend_from_slice(&h.x_max.to_le_bytes());
    out.extend_from_slice(&h.convention_hash.to_le_bytes());
    for s in &ds.samples {
        if s.grids.len() != len {
            return Err(Error::Format(format!("sample with {} values, expected {len}", s.grids.len())));
        }
        out.push(s.label.index(ds.parties)? as u8);
        for v in &s.grids {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::Format(format!("truncated file at byte {}", self.at)));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }
}

pub fn decode_header(buf: &[u8]) -> Result<DatasetHeader> {
    let mut c = Cursor { buf, at: 0 };
    if c.take(4)? != DATASET_MAGIC {
        return Err(Error::Format("not a CVPD dataset (bad magic)".into()));
    }
    let h = DatasetHeader {
        version: c.u16()?,
        parties: c.u8()?,
        n_groups: c.u8()?,
        grids_per_group: c.u8()?,
        grid_size: c.u16()?,
        n_classes: c.u8()?,
        n_samples: c.u64()?,
        x_min: c.f64()?,
        x_max: c.f64()?,
        convention_hash: c.u64()?,
    };
    if h.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", h.version)));
    }
    let parties = h.parties as usize;
    let expected_classes = PartitionClass::n_classes(parties).map_err(|_| Error::Format(format!("{parties} parties")))?;
    if h.n_groups != h.parties || h.grids_per_group as usize != GRIDS_PER_GROUP || h.n_classes as usize != expected_classes {
        return Err(Error::Format(format!("inconsistent header {h:?}")));
    }
    if h.grid_size == 0 || !(h.x_max > h.x_min) {
        return Err(Error::Format(format!("bad grid in header {h:?}")));
    }
    if h.convention_hash != convention_hash() {
        return Err(Error::Format(format!("convention hash {:#018x} does not match {:#018x}", h.convention_hash, convention_hash())));
    }
    Ok(h)
}

/// Decode the binary body; provenance is filled from `sidecar` when given.
pub fn decode_dataset(buf: &[u8], sidecar: Option<Sidecar>) -> Result<PatternDataset> {
    let h = decode_header(buf)?;
    let parties = h.parties as usize;
    let grid = QuadGrid::new(h.grid_size as usize, h.x_min, h.x_max)?;
    let len = parties * GRIDS_PER_GROUP * grid.cells();
    let n = h.n_samples as usize;
    let body = buf.len() - HEADER_LEN;
    if body != n * (1 + 4 * len) {
        return Err(Error::Format(format!("body of {body} bytes does not hold {n} samples of {len} values")));
    }
    if let Some(sc) = &sidecar {
        if sc.provenance.len() != n || sc.header != h {
            return Err(Error::Format("sidecar does not match dataset".into()));
        }
    }
    let mut c = Cursor { buf, at: HEADER_LEN };
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = PartitionClass::from_index(parties, c.u8()? as usize).map_err(|e| Error::Format(format!("sample {i}: {e}")))?;
        let raw = c.take(4 * len)?;
        let grids = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4"))).collect();
        let provenance = match &sidecar {
            Some(sc) => sc.provenance[i].clone(),
            None => Provenance::unknown(),
        };
        samples.push(LabeledSample { label, grids, provenance });
    }
    let (config, history) = match sidecar {
        Some(sc) => (sc.config, sc.history),
        None => (None, Vec::new()),
    };
    Ok(PatternDataset { parties, grid, samples, config, history })
}

pub fn sidecar(ds: &PatternDataset) -> Sidecar {
    Sidecar {
        header: ds.header(),
        config: ds.config.clone(),
        history: ds.history.clone(),
        stats: ds.stats(),
        provenance: ds.samples.iter().map(|s| s.provenance.clone()).collect(),
    }
}

/// Write `path` and its sidecar.
pub fn write_dataset(ds: &PatternDataset, path: &Path) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    let json = serde_json::to_vec_pretty(&sidecar(ds))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read `path`, using the sidecar when it exists.
pub fn read_dataset(path: &Path) -> Result<PatternDataset> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let sc_path = sidecar_path(path);
    let sc = if sc_path.exists() { Some(serde_json::from_slice(&std::fs::read(sc_path)?)?) } else { None };
    decode_dataset(&buf, sc)
}

impl Provenance {
    pub fn unknown() -> Self {
        Provenance {
            rng_seed: 0,
            mixture_arity: 0,
            weights: Vec::new(),
            partition: None,
            rejected_seeds: 0,
            circuit_retries: 0,
            min_mass: None,
            lineage: Lineage::Original,
        }
    }
}
