//! Grid export in the display layout: group `A` reads `(A, M_BC)`, every
//! other group puts the mixed mode first, e.g. `(M_AC, B)`, so those grids
//! and their quadrature pairs are transposed relative to storage.

use std::path::Path;

use anyhow::{Context, Result};

use cvent_core::dataset::PatternDataset;
use cvent_core::homodyne::{other_modes, GRIDS_PER_GROUP, QPAIRS};
use cvent_core::Error;

const QUAD: [char; 2] = ['X', 'P'];

fn letter(l: usize) -> char {
    (b'A' + l as u8) as char
}

/// One grid as shown: `(name, n×n values, row-major)`.
struct Shown {
    name: String,
    values: Vec<f32>,
}

fn display_grids(ds: &PatternDataset, index: usize) -> Vec<Vec<Shown>> {
    let n = ds.grid.n_bins;
    let cells = n * n;
    let s = &ds.samples[index];
    (0..ds.parties)
        .map(|k| {
            let mixed: String = std::iter::once('M').chain(other_modes(k, ds.parties).into_iter().map(letter)).collect();
            let single = letter(k).to_string();
            let transpose = k != 0;
            let mut tiles: Vec<Shown> = Vec::with_capacity(GRIDS_PER_GROUP);
            for (q, pair) in QPAIRS.iter().enumerate() {
                let g = &s.grids[(k * GRIDS_PER_GROUP + q) * cells..(k * GRIDS_PER_GROUP + q + 1) * cells];
                let (qs, qm) = (QUAD[pair.0 as usize], QUAD[pair.1 as usize]);
                let (name, values) = if transpose {
                    let t = (0..cells).map(|i| g[(i % n) * n + i / n]).collect();
                    (format!("{mixed}_{single}_{qm}{qs}"), t)
                } else {
                    (format!("{single}_{mixed}_{qs}{qm}"), g.to_vec())
                };
                tiles.push(Shown { name, values });
            }
            tiles
        })
        .collect()
}

fn csv(values: &[f32], n: usize) -> String {
    let mut s = String::new();
    for row in values.chunks(n) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn to_gray(values: &[f32]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0f32, f32::max);
    values.iter().map(|&v| if max > 0.0 { (255.0 * (v / max).clamp(0.0, 1.0)).round() as u8 } else { 0 }).collect()
}

fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Write every grid of sample `index` plus a mosaic; returns the grid count.
pub fn export(ds: &PatternDataset, index: usize, dir: &Path) -> Result<usize> {
    if index >= ds.len() {
        return Err(Error::InvalidParameter(format!("sample index {index} out of range (dataset has {})", ds.len())).into());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let n = ds.grid.n_bins;
    let groups = display_grids(ds, index);
    let mut count = 0;
    for (k, tiles) in groups.iter().enumerate() {
        for t in tiles {
            let stem = format!("g{k}_{}", t.name);
            std::fs::write(dir.join(format!("{stem}.csv")), csv(&t.values, n))?;
            std::fs::write(dir.join(format!("{stem}.pgm")), pgm(n, n, &to_gray(&t.values)))?;
            count += 1;
        }
    }
    // mosaic: tile row = first-axis quadrature, tile column pair = group
    let (tw, th) = (2 * ds.parties * (n + 1) - 1, 2 * (n + 1) - 1);
    let mut img = vec![0u8; tw * th];
    for (k, tiles) in groups.iter().enumerate() {
        for (q, t) in tiles.iter().enumerate() {
            let (tr, tc) = (q / 2, 2 * k + q % 2);
            for (i, &p) in to_gray(&t.values).iter().enumerate() {
                let (r, c) = (tr * (n + 1) + i / n, tc * (n + 1) + i % n);
                img[r * tw + c] = p;
            }
        }
    }
    std::fs::write(dir.join("mosaic.pgm"), pgm(tw, th, &img))?;
    let s = &ds.samples[index];
    let info = serde_json::json!({
        "index": index,
        "label": s.label.name(),
        "partition": s.provenance.partition.as_ref().map(|p| p.to_string()),
        "lineage": s.provenance.lineage,
        "grids": groups.iter().flatten().map(|t| t.name.clone()).collect::<Vec<_>>(),
    });
    std::fs::write(dir.join("sample.json"), serde_json::to_vec_pretty(&info)?)?;
    Ok(count)
}
