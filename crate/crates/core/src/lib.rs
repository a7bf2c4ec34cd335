//! Classification of multipartite continuous-variable entanglement structures
//! from homodyne correlation patterns.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`] and [`density`]: truncated Fock-space states, operators and channels.
//! * [`gaussian`]: squeezing, displacement, beam splitters and the photon-loss channel.
//! * [`stellar`]: random seed states of bounded stellar rank with inseparability checks.
//! * [`homodyne`]: joint quadrature densities binned into 24×24 correlation patterns.
//! * [`dataset`] and [`format`]: labeled datasets per multi-partition class and their files.
//! * [`qda`]: label-preserving augmentation (mode permutation, convex mixing).
//! * [`cnn`]: the multi-branch convolutional classifier, training and evaluation.
//!
//! Conventions shared by every module: `x̂ = â† + â`, `p̂ = i(â† − â)` (vacuum
//! variance 1); multimode Fock indices are mixed-radix with mode 0 as the most
//! significant digit; the beam splitter is `exp(θ(â_i†â_j − â_iâ_j†))`.

pub mod cnn;
pub mod dataset;
pub mod density;
pub mod error;
pub mod fock;
pub mod format;
pub mod gaussian;
pub mod homodyne;
pub mod qda;
pub mod rng;
pub mod stellar;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
