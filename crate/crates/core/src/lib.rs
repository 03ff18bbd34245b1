//! Kernel-smoother estimation of functions, derivatives, and the
//! instantaneous frequency of slowly evolving sinusoids in noise.
//!
//! The crate is organized around a small calculus: kernels of order (q,p)
//! estimate the q-th derivative with O(h^{p−q}) bias; the halfwidth h
//! trades that bias against the noise variance, and the loss-minimizing h
//! follows in closed form once the p-th derivative and the noise level are
//! known. On top of that sit:
//!
//! - [`kernel`]: kernel shapes — minimal-variance and minimal-loss designs,
//!   closed-form limiting shapes, edge kernels, sinusoidal-taper kernels —
//!   with their moments and frequency response;
//! - [`smooth`]: applying kernels to sampled data, plus the bias, variance,
//!   expected-loss, and optimal-halfwidth formulas under white and colored
//!   noise;
//! - [`analytic`]: analytic signal, demodulation, unit-modulus phase
//!   observations, and the covariance structure the Hilbert transform
//!   induces;
//! - [`instfreq`]: the instantaneous-frequency pipeline (smooth `e^{iφ̃}`
//!   and its derivative, combine, iterate the center frequency);
//! - [`adaptive`]: multistage plug-in halfwidth selection with pilot
//!   derivative estimates;
//! - [`multitone`]: iterative per-line estimation of several evolving
//!   sinusoids with interference correction;
//! - [`lab`]: synthetic signal generation and brute-force oracles for
//!   tests and benchmarks.

pub mod adaptive;
pub mod analytic;
pub mod covariance;
pub mod error;
pub mod instfreq;
pub mod kernel;
pub mod lab;
pub mod multitone;
pub mod signal;
pub mod smooth;

pub use covariance::{estimate_noise_variance, CovarianceModel};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelOrder};
pub use signal::SampledSignal;
pub use smooth::{KernelFamily, LossReport, WindowShape};
