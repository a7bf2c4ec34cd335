//! Forward and backward passes over a chunk of samples.
//!
//! Convolutions run as im2col + GEMM. Activations of a chunk of `n` samples
//! are stored channel-major, `(C, n, H, W)`, so one GEMM covers the chunk.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;
use rand::Rng as _;

use super::{ConvLayout, DenseLayout, Layout, ModelConfig};
use crate::error::{Error, Result};
use crate::rng;

/// Samples per independently reduced chunk; fixed so results do not depend
/// on the thread count.
pub(crate) const CHUNK: usize = 16;

pub trait Real: Float + Default + Debug + Send + Sync + Sum + AddAssign + MulAssign + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// # Safety
    /// Every strided access of the three matrices must be in bounds.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(m: usize, k: usize, n: usize, a: *const Self, rsa: isize, csa: isize, b: *const Self, rsb: isize, csb: isize, beta: Self, c: *mut Self, rsc: isize, csc: isize);
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm_raw(m: usize, k: usize, n: usize, a: *const f32, rsa: isize, csa: isize, b: *const f32, rsb: isize, csb: isize, beta: f32, c: *mut f32, rsc: isize, csc: isize) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(m: usize, k: usize, n: usize, a: *const f64, rsa: isize, csa: isize, b: *const f64, rsb: isize, csb: isize, beta: f64, c: *mut f64, rsc: isize, csc: isize) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Row-major strided matrix view.
#[derive(Clone, Copy)]
struct Mat<'a, T> {
    data: &'a [T],
    rs: usize,
    cs: usize,
}

fn mat<T>(data: &[T], rs: usize, cs: usize) -> Mat<'_, T> {
    Mat { data, rs, cs }
}

fn span(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// `C ← A·B + beta·C` for an `m×k` A and a `k×n` B.
fn gemm<T: Real>(m: usize, k: usize, n: usize, a: Mat<T>, b: Mat<T>, beta: T, c: &mut [T], rsc: usize, csc: usize) {
    assert!(span(m, k, a.rs, a.cs) <= a.data.len());
    assert!(span(k, n, b.rs, b.cs) <= b.data.len());
    assert!(span(m, n, rsc, csc) <= c.len());
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every strided access.
    unsafe { T::gemm_raw(m, k, n, a.data.as_ptr(), a.rs as isize, a.cs as isize, b.data.as_ptr(), b.rs as isize, b.cs as isize, beta, c.as_mut_ptr(), rsc as isize, csc as isize) }
}

fn im2col<T: Real>(x: &[T], c_in: usize, n: usize, size: usize, k: usize) -> Vec<T> {
    let hw = size * size;
    let cols_n = n * hw;
    let pad = k / 2;
    let mut cols = vec![T::zero(); c_in * k * k * cols_n];
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let x0 = pad.saturating_sub(kx);
                let x1 = (size + pad).saturating_sub(kx).min(size);
                for s in 0..n {
                    for y in 0..size {
                        let sy = y + ky;
                        if sy < pad || sy - pad >= size {
                            continue;
                        }
                        let src = c * cols_n + s * hw + (sy - pad) * size;
                        let dst = row * cols_n + s * hw + y * size;
                        cols[dst + x0..dst + x1].copy_from_slice(&x[src + x0 + kx - pad..src + x1 + kx - pad]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], c_in: usize, n: usize, size: usize, k: usize) -> Vec<T> {
    let hw = size * size;
    let cols_n = n * hw;
    let pad = k / 2;
    let mut x = vec![T::zero(); c_in * cols_n];
    for c in 0..c_in {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let x0 = pad.saturating_sub(kx);
                let x1 = (size + pad).saturating_sub(kx).min(size);
                for s in 0..n {
                    for y in 0..size {
                        let sy = y + ky;
                        if sy < pad || sy - pad >= size {
                            continue;
                        }
                        let src = row * cols_n + s * hw + y * size;
                        let dst = c * cols_n + s * hw + (sy - pad) * size;
                        for (d, &v) in x[dst + x0 + kx - pad..dst + x1 + kx - pad].iter_mut().zip(&cols[src + x0..src + x1]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    x
}

struct ConvCache<T> {
    cols: Vec<T>,
    /// Post-ReLU output, `(cout, n, H, W)`.
    out: Vec<T>,
    /// Index into `out` of every pooled maximum.
    argmax: Vec<u32>,
}

struct SubCache<T> {
    convs: Vec<ConvCache<T>>,
    flat: Vec<T>,
    hidden: Vec<T>,
}

struct Caches<T> {
    subs: Vec<SubCache<T>>,
    /// Inputs of each head layer, post-ReLU; the first is the concatenation.
    head_in: Vec<Vec<T>>,
    probs: Vec<T>,
}

fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

fn conv_forward<T: Real>(c: &ConvLayout, params: &[T], x: &[T], n: usize) -> ConvCache<T> {
    let hw = c.size * c.size;
    let kk = c.cin * c.kernel * c.kernel;
    let cols = im2col(x, c.cin, n, c.size, c.kernel);
    let mut out = vec![T::zero(); c.cout * n * hw];
    gemm(c.cout, kk, n * hw, mat(&params[c.w..], kk, 1), mat(&cols, n * hw, 1), T::zero(), &mut out, n * hw, 1);
    for (o, row) in out.chunks_mut(n * hw).enumerate() {
        let b = params[c.b + o];
        for v in row.iter_mut() {
            *v += b;
        }
    }
    relu_inplace(&mut out);
    // max pooling
    let p = c.pool;
    let so = c.size / p;
    let mut argmax = Vec::with_capacity(c.cout * n * so * so);
    for plane in 0..c.cout * n {
        let base = plane * hw;
        for oy in 0..so {
            for ox in 0..so {
                let mut best = base + oy * p * c.size + ox * p;
                for dy in 0..p {
                    for dx in 0..p {
                        let i = base + (oy * p + dy) * c.size + ox * p + dx;
                        if out[i] > out[best] {
                            best = i;
                        }
                    }
                }
                argmax.push(best as u32);
            }
        }
    }
    ConvCache { cols, out, argmax }
}

fn dense_forward<T: Real>(d: &DenseLayout, params: &[T], x: &[T], n: usize, relu: bool) -> Vec<T> {
    let mut y = vec![T::zero(); n * d.n_out];
    gemm(n, d.n_in, d.n_out, mat(x, d.n_in, 1), mat(&params[d.w..], 1, d.n_in), T::zero(), &mut y, d.n_out, 1);
    for row in y.chunks_mut(d.n_out) {
        for (v, &b) in row.iter_mut().zip(&params[d.b..d.b + d.n_out]) {
            *v += b;
        }
    }
    if relu {
        relu_inplace(&mut y);
    }
    y
}

fn subnet_forward<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]], g: usize) -> SubCache<T> {
    let n = inputs.len();
    let sub = &layout.subnets[if cfg.weight_sharing { 0 } else { g }];
    let glen = cfg.group_len();
    let hw = cfg.grid_size * cfg.grid_size;
    let mut x = vec![T::zero(); glen * n];
    for (s, inp) in inputs.iter().enumerate() {
        for c in 0..cfg.in_channels {
            let src = g * glen + c * hw;
            x[c * n * hw + s * hw..c * n * hw + (s + 1) * hw].copy_from_slice(&inp[src..src + hw]);
        }
    }
    let mut convs: Vec<ConvCache<T>> = Vec::with_capacity(sub.convs.len());
    for c in &sub.convs {
        let cache = conv_forward(c, params, &x, n);
        x = cache.argmax.iter().map(|&i| cache.out[i as usize]).collect();
        convs.push(cache);
    }
    // (C, n, h, w) -> (n, C·h·w)
    let f = sub.dense.n_in;
    let c_last = sub.convs.last().map_or(cfg.in_channels, |c| c.cout);
    let chw = f / c_last;
    let mut flat = vec![T::zero(); n * f];
    for c in 0..c_last {
        for s in 0..n {
            flat[s * f + c * chw..s * f + (c + 1) * chw].copy_from_slice(&x[(c * n + s) * chw..(c * n + s + 1) * chw]);
        }
    }
    let hidden = dense_forward(&sub.dense, params, &flat, n, true);
    SubCache { convs, flat, hidden }
}

fn forward_chunk<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]]) -> Caches<T> {
    let n = inputs.len();
    let subs: Vec<SubCache<T>> = (0..cfg.parties).map(|g| subnet_forward(cfg, layout, params, inputs, g)).collect();
    let d = cfg.sub_dense;
    let width = cfg.parties * d;
    let mut h = vec![T::zero(); n * width];
    for (g, sc) in subs.iter().enumerate() {
        for s in 0..n {
            h[s * width + g * d..s * width + (g + 1) * d].copy_from_slice(&sc.hidden[s * d..(s + 1) * d]);
        }
    }
    let mut head_in = Vec::with_capacity(layout.head.len());
    for (l, dl) in layout.head.iter().enumerate() {
        let last = l + 1 == layout.head.len();
        let y = dense_forward(dl, params, &h, n, !last);
        head_in.push(std::mem::replace(&mut h, y));
    }
    // softmax rows
    let k = cfg.n_classes();
    for row in h.chunks_mut(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v = *v / z;
        }
    }
    Caches { subs, head_in, probs: h }
}

/// Backward pass of one chunk; `dlogits` is `(n, K)`; gradients are added
/// into `grad`.
fn backward_chunk<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], caches: &Caches<T>, mut dy: Vec<T>, n: usize, grad: &mut [T]) {
    for (l, dl) in layout.head.iter().enumerate().rev() {
        let x = &caches.head_in[l];
        dense_backward_params(dl, x, &dy, n, grad);
        let mut dx = vec![T::zero(); n * dl.n_in];
        gemm(n, dl.n_out, dl.n_in, mat(&dy, dl.n_out, 1), mat(&params[dl.w..], dl.n_in, 1), T::zero(), &mut dx, dl.n_in, 1);
        // every head input is a ReLU output
        for (d, &v) in dx.iter_mut().zip(x) {
            if !(v > T::zero()) {
                *d = T::zero();
            }
        }
        dy = dx;
    }
    let d = cfg.sub_dense;
    let width = cfg.parties * d;
    for (g, sc) in caches.subs.iter().enumerate() {
        let sub = &layout.subnets[if cfg.weight_sharing { 0 } else { g }];
        let mut dh = vec![T::zero(); n * d];
        for s in 0..n {
            dh[s * d..(s + 1) * d].copy_from_slice(&dy[s * width + g * d..s * width + (g + 1) * d]);
        }
        let dl = &sub.dense;
        dense_backward_params(dl, &sc.flat, &dh, n, grad);
        let f = dl.n_in;
        let mut dflat = vec![T::zero(); n * f];
        gemm(n, d, f, mat(&dh, d, 1), mat(&params[dl.w..], f, 1), T::zero(), &mut dflat, f, 1);
        let c_last = sub.convs.last().map_or(cfg.in_channels, |c| c.cout);
        let chw = f / c_last;
        // (n, C·h·w) -> (C, n, h, w)
        let mut dpool = vec![T::zero(); n * f];
        for c in 0..c_last {
            for s in 0..n {
                dpool[(c * n + s) * chw..(c * n + s + 1) * chw].copy_from_slice(&dflat[s * f + c * chw..s * f + (c + 1) * chw]);
            }
        }
        for (l, (c, cache)) in sub.convs.iter().zip(&sc.convs).enumerate().rev() {
            let hw = c.size * c.size;
            let kk = c.cin * c.kernel * c.kernel;
            let mut dout = vec![T::zero(); cache.out.len()];
            for (&i, &v) in cache.argmax.iter().zip(&dpool) {
                dout[i as usize] += v;
            }
            for (dv, &o) in dout.iter_mut().zip(&cache.out) {
                if !(o > T::zero()) {
                    *dv = T::zero();
                }
            }
            let m = n * hw;
            gemm(c.cout, m, kk, mat(&dout, m, 1), mat(&cache.cols, 1, m), T::one(), &mut grad[c.w..], kk, 1);
            for (o, row) in dout.chunks(m).enumerate() {
                grad[c.b + o] += row.iter().copied().sum::<T>();
            }
            if l > 0 {
                let mut dcols = vec![T::zero(); kk * m];
                gemm(kk, c.cout, m, mat(&params[c.w..], 1, kk), mat(&dout, m, 1), T::zero(), &mut dcols, m, 1);
                dpool = col2im(&dcols, c.cin, n, c.size, c.kernel);
            }
        }
    }
}

fn dense_backward_params<T: Real>(dl: &DenseLayout, x: &[T], dy: &[T], n: usize, grad: &mut [T]) {
    gemm(dl.n_out, n, dl.n_in, mat(dy, 1, dl.n_out), mat(x, dl.n_in, 1), T::one(), &mut grad[dl.w..], dl.n_in, 1);
    for row in dy.chunks(dl.n_out) {
        for (g, &v) in grad[dl.b..dl.b + dl.n_out].iter_mut().zip(row) {
            *g += v;
        }
    }
}

fn check_batch<T>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]]) -> Result<()> {
    if params.len() != layout.total {
        return Err(Error::InvalidDimension(format!("{} parameters, layout needs {}", params.len(), layout.total)));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != cfg.input_len()) {
        return Err(Error::InvalidDimension(format!("input of {} values, model expects {}", x.len(), cfg.input_len())));
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn map_chunks<T: Send, R: Send>(items: &[T], f: impl Fn(&[T]) -> R + Sync + Send) -> Vec<R>
where
    T: Sync,
{
    use rayon::prelude::*;
    items.par_chunks(CHUNK).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, R>(items: &[T], f: impl Fn(&[T]) -> R) -> Vec<R> {
    items.chunks(CHUNK).map(f).collect()
}

/// Class probabilities of already standardized inputs.
pub fn forward_batch<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]]) -> Result<Vec<Vec<T>>> {
    check_batch(cfg, layout, params, inputs)?;
    let k = cfg.n_classes();
    let parts = map_chunks(inputs, |chunk| forward_chunk(cfg, layout, params, chunk).probs);
    Ok(parts.into_iter().flat_map(|p| p.chunks(k).map(<[T]>::to_vec).collect::<Vec<_>>()).collect())
}

/// Sub-network output vector of every group for one standardized input.
pub fn features<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], input: &[T]) -> Result<Vec<Vec<T>>> {
    check_batch(cfg, layout, params, &[input])?;
    Ok((0..cfg.parties).map(|g| subnet_forward(cfg, layout, params, &[input], g).hidden).collect())
}

/// Mean cross-entropy over the batch and its gradient. Chunks are reduced
/// in a fixed order, so the result does not depend on the thread count.
pub fn loss_and_gradient<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]], labels: &[usize]) -> Result<(f64, Vec<T>)> {
    batch_step(cfg, layout, params, inputs, labels).map(|(l, g, _)| (l, g))
}

/// As [`loss_and_gradient`], also counting correct argmax predictions.
pub(crate) fn batch_step<T: Real>(cfg: &ModelConfig, layout: &Layout, params: &[T], inputs: &[&[T]], labels: &[usize]) -> Result<(f64, Vec<T>, usize)> {
    check_batch(cfg, layout, params, inputs)?;
    if inputs.is_empty() || labels.len() != inputs.len() {
        return Err(Error::InvalidParameter(format!("batch of {} inputs and {} labels", inputs.len(), labels.len())));
    }
    let k = cfg.n_classes();
    if let Some(l) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidParameter(format!("label {l} for {k} classes")));
    }
    let scale = T::from_f64(1.0 / inputs.len() as f64);
    let idx: Vec<usize> = (0..inputs.len()).collect();
    let parts = map_chunks(&idx, |chunk| {
        let xs: Vec<&[T]> = chunk.iter().map(|&i| inputs[i]).collect();
        let caches = forward_chunk(cfg, layout, params, &xs);
        let mut loss = 0.0;
        let mut correct = 0;
        let mut dy = caches.probs.clone();
        for (j, &i) in chunk.iter().enumerate() {
            let row = &mut dy[j * k..(j + 1) * k];
            correct += usize::from(argmax(row) == labels[i]);
            loss -= row[labels[i]].to_f64().max(f64::MIN_POSITIVE).ln();
            row[labels[i]] = row[labels[i]] - T::one();
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        let mut grad = vec![T::zero(); params.len()];
        backward_chunk(cfg, layout, params, &caches, dy, chunk.len(), &mut grad);
        (loss, grad, correct)
    });
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad = vec![T::zero(); params.len()];
    for (l, g, c) in parts {
        loss += l;
        correct += c;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += *b;
        }
    }
    let loss = loss / inputs.len() as f64;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite loss {loss} on a batch of {}", inputs.len())));
    }
    Ok((loss, grad, correct))
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Which ReLUs are active and which pool inputs win, hashed.
fn kink_signature(cfg: &ModelConfig, layout: &Layout, params: &[f64], inputs: &[&[f64]]) -> u64 {
    let caches = forward_chunk(cfg, layout, params, inputs);
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for sc in &caches.subs {
        for c in &sc.convs {
            c.out.iter().for_each(|&v| eat((v > 0.0) as u64));
            c.argmax.iter().for_each(|&i| eat(i as u64));
        }
        sc.hidden.iter().for_each(|&v| eat((v > 0.0) as u64));
    }
    for x in &caches.head_in[1..] {
        x.iter().for_each(|&v| eat((v > 0.0) as u64));
    }
    h
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest `|g − g_fd| / max(|g| + |g_fd|, floor)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Probes whose step crossed a ReLU or pooling switch, redrawn.
    pub skipped_kinks: usize,
    /// Names of the parameter blocks that were probed.
    pub blocks: Vec<String>,
}

/// Compare the analytic gradient with central differences on `n_coords`
/// random coordinates (at least one per parameter block).
pub fn gradient_check(cfg: &ModelConfig, params: &[f64], inputs: &[&[f64]], labels: &[usize], n_coords: usize, step: f64, floor: f64, seed: u64) -> Result<GradCheck> {
    let layout = cfg.layout()?;
    let (_, grad) = loss_and_gradient(cfg, &layout, params, inputs, labels)?;
    let base = kink_signature(cfg, &layout, params, inputs);
    let blocks = layout.blocks();
    let mut rng = rng::from_seed(seed);
    let mut p = params.to_vec();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped_kinks: 0, blocks: Vec::new() };
    let mut attempts = 0;
    while out.checked < n_coords {
        attempts += 1;
        if attempts > 20 * n_coords {
            return Err(Error::Numerical("gradient check kept hitting kinks".into()));
        }
        let (name, off, len, _) = if out.checked < blocks.len() { blocks[out.checked].clone() } else { blocks[rng.random_range(0..blocks.len())].clone() };
        let i = off + rng.random_range(0..len);
        let orig = p[i];
        p[i] = orig + step;
        let plus_sig = kink_signature(cfg, &layout, &p, inputs);
        let (lp, _) = loss_and_gradient(cfg, &layout, &p, inputs, labels)?;
        p[i] = orig - step;
        let minus_sig = kink_signature(cfg, &layout, &p, inputs);
        let (lm, _) = loss_and_gradient(cfg, &layout, &p, inputs, labels)?;
        p[i] = orig;
        if plus_sig != base || minus_sig != base {
            out.skipped_kinks += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * step);
        let rel = (grad[i] - fd).abs() / (grad[i].abs() + fd.abs()).max(floor);
        out.max_rel_error = out.max_rel_error.max(rel);
        out.checked += 1;
        if !out.blocks.contains(&name) {
            out.blocks.push(name);
        }
    }
    Ok(out)
}
