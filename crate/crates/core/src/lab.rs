//! Synthetic signal generation and brute-force oracles for tests and
//! benchmarks.
//!
//! Generators are deterministic in the seed: the same spec, length, noise
//! model, and seed reproduce the same samples bit for bit. Colored noise is
//! synthesized by spectral factorization of the declared lag covariance
//! (circulant embedding), so its circular autocovariance matches the model
//! exactly for lags short of the record length.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::signal::SampledSignal;

/// Amplitude evolution A(t) of a tone.
#[derive(Debug, Clone, Copy)]
pub enum AmplitudeModel {
    Constant(f64),
    /// A(t) = intercept + slope·t
    Linear { intercept: f64, slope: f64 },
    /// A(t) = mean + depth·cos(rate·t + phase)
    SinusoidalAm {
        mean: f64,
        depth: f64,
        rate: f64,
        phase: f64,
    },
}

impl AmplitudeModel {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            AmplitudeModel::Constant(a) => a,
            AmplitudeModel::Linear { intercept, slope } => intercept + slope * t,
            AmplitudeModel::SinusoidalAm {
                mean,
                depth,
                rate,
                phase,
            } => mean + depth * (rate * t + phase).cos(),
        }
    }

    /// Second time derivative (the bias-driving curvature for (0,2) kernels).
    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            AmplitudeModel::Constant(_) | AmplitudeModel::Linear { .. } => 0.0,
            AmplitudeModel::SinusoidalAm {
                depth, rate, phase, ..
            } => -depth * rate * rate * (rate * t + phase).cos(),
        }
    }
}

/// Phase evolution φ(t) of a tone; frequencies in radians per unit
/// normalized time.
#[derive(Debug, Clone, Copy)]
pub enum PhaseModel {
    /// φ = ω·t + φ₀
    Tone { omega: f64, phi0: f64 },
    /// φ = ω·t + φ₀ + rate·t²/2, so φ′ = ω + rate·t
    LinearChirp { omega: f64, phi0: f64, rate: f64 },
    /// φ = ω·t + φ₀ + depth·sin(rate·t + phase)
    SinusoidalFm {
        omega: f64,
        phi0: f64,
        depth: f64,
        rate: f64,
        phase: f64,
    },
}

impl PhaseModel {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            PhaseModel::Tone { omega, phi0 } => omega * t + phi0,
            PhaseModel::LinearChirp { omega, phi0, rate } => omega * t + phi0 + 0.5 * rate * t * t,
            PhaseModel::SinusoidalFm {
                omega,
                phi0,
                depth,
                rate,
                phase,
            } => omega * t + phi0 + depth * (rate * t + phase).sin(),
        }
    }

    /// Instantaneous frequency φ′(t).
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            PhaseModel::Tone { omega, .. } => omega,
            PhaseModel::LinearChirp { omega, rate, .. } => omega + rate * t,
            PhaseModel::SinusoidalFm {
                omega, depth, rate, phase, ..
            } => omega + depth * rate * (rate * t + phase).cos(),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            PhaseModel::Tone { .. } => 0.0,
            PhaseModel::LinearChirp { rate, .. } => rate,
            PhaseModel::SinusoidalFm {
                depth, rate, phase, ..
            } => -depth * rate * rate * (rate * t + phase).sin(),
        }
    }

    pub fn third_derivative(&self, t: f64) -> f64 {
        match *self {
            PhaseModel::Tone { .. } | PhaseModel::LinearChirp { .. } => 0.0,
            PhaseModel::SinusoidalFm {
                depth, rate, phase, ..
            } => -depth * rate * rate * rate * (rate * t + phase).cos(),
        }
    }

    /// Carrier frequency the model oscillates about.
    pub fn carrier(&self) -> f64 {
        match *self {
            PhaseModel::Tone { omega, .. }
            | PhaseModel::LinearChirp { omega, .. }
            | PhaseModel::SinusoidalFm { omega, .. } => omega,
        }
    }
}

/// One evolving sinusoid A(t)·cos(φ(t)) with closed-form derivative
/// evaluators.
#[derive(Debug, Clone, Copy)]
pub struct ToneSpec {
    pub amplitude: AmplitudeModel,
    pub phase: PhaseModel,
}

impl ToneSpec {
    /// Constant-amplitude pure tone.
    pub fn tone(amplitude: f64, omega: f64, phi0: f64) -> Self {
        ToneSpec {
            amplitude: AmplitudeModel::Constant(amplitude),
            phase: PhaseModel::Tone { omega, phi0 },
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.amplitude.at(t) * self.phase.at(t).cos()
    }

    /// |∂_t³ e^{iφ̃(t)}| for the phase deviation φ̃ = φ − ω₀t − φ₀ relative
    /// to a demodulation carrier ω₀. With d1 = φ′−ω₀, d2 = φ″, d3 = φ‴:
    /// ∂³e^{iφ̃} = e^{iφ̃}[i·d3 − 3·d1·d2 − i·d1³], of magnitude
    /// √((3·d1·d2)² + (d3 − d1³)²).
    pub fn third_derivative_magnitude(&self, t: f64, omega0: f64) -> f64 {
        let d1 = self.phase.derivative(t) - omega0;
        let d2 = self.phase.second_derivative(t);
        let d3 = self.phase.third_derivative(t);
        ((3.0 * d1 * d2).powi(2) + (d3 - d1 * d1 * d1).powi(2)).sqrt()
    }
}

/// Per-tone truth on the sample grid.
#[derive(Debug, Clone)]
pub struct ToneTruth {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub frequency: Vec<f64>,
}

/// Ground truth emitted alongside a generated record.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub times: Vec<f64>,
    pub tones: Vec<ToneTruth>,
}

/// Deterministic per-replication RNG derived from a base seed.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(replication.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Generate `Σ_ℓ A_ℓ(t_j) cos(φ_ℓ(t_j)) + e_j` on the grid t_j = j/N with
/// noise drawn from the covariance model, deterministically in the seed.
pub fn generate(
    specs: &[ToneSpec],
    n: usize,
    noise: &CovarianceModel,
    seed: u64,
) -> Result<(SampledSignal, GroundTruth)> {
    if n < 16 {
        return Err(Error::invalid_input("generator needs N ≥ 16"));
    }
    let times: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let mut values = vec![0.0; n];
    let mut tones = Vec::with_capacity(specs.len());
    for spec in specs {
        let amplitude: Vec<f64> = times.iter().map(|&t| spec.amplitude.at(t)).collect();
        let phase: Vec<f64> = times.iter().map(|&t| spec.phase.at(t)).collect();
        let frequency: Vec<f64> = times.iter().map(|&t| spec.phase.derivative(t)).collect();
        for j in 0..n {
            values[j] += amplitude[j] * phase[j].cos();
        }
        tones.push(ToneTruth {
            amplitude,
            phase,
            frequency,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match noise {
        CovarianceModel::White { sigma2 } => {
            let sigma = sigma2.sqrt();
            for v in values.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v += sigma * e;
            }
        }
        CovarianceModel::StationaryLag { .. } | CovarianceModel::Spectral { .. } => {
            let colored = colored_noise(noise, n, &mut rng)?;
            for (v, e) in values.iter_mut().zip(colored) {
                *v += e;
            }
        }
        CovarianceModel::HilbertPhase { .. } => {
            return Err(Error::InvalidCovariance {
                reason: "the Hilbert phase model describes observations, not a noise generator"
                    .into(),
            });
        }
    }

    Ok((SampledSignal::new(values)?, GroundTruth { times, tones }))
}

/// Stationary Gaussian noise via circulant spectral factorization.
fn colored_noise(model: &CovarianceModel, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let density: Vec<f64> = (0..n)
        .map(|k| {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            // fold to [−π, π] for the spectral model convention
            let folded = if omega > std::f64::consts::PI {
                omega - 2.0 * std::f64::consts::PI
            } else {
                omega
            };
            model.local_level(folded)
        })
        .collect();
    if density.iter().any(|s| *s < -1e-9) {
        return Err(Error::InvalidCovariance {
            reason: "lag covariance has a negative spectral density".into(),
        });
    }
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            Complex64::new(e, 0.0)
        })
        .collect();
    crate::analytic::fft_in_place_pub(&mut buf, true);
    for (c, s) in buf.iter_mut().zip(&density) {
        *c *= s.max(0.0).sqrt();
    }
    crate::analytic::fft_in_place_pub(&mut buf, false);
    let scale = 1.0 / n as f64;
    Ok(buf.into_iter().map(|c| c.re * scale).collect())
}

/// Central finite differences of order q with O(step²) accuracy (interior);
/// one-sided O(step) differences fill the record ends.
pub fn oracle_finite_difference_derivative(values: &[f64], q: usize, step: f64) -> Vec<f64> {
    if q == 0 {
        return values.to_vec();
    }
    let n = values.len();
    let (offsets, coeffs) = central_stencil(q);
    let reach = offsets.iter().map(|o| o.unsigned_abs()).max().unwrap() as usize;
    let scale = step.powi(q as i32);
    let mut out = vec![0.0; n];
    for i in 0..n {
        if i >= reach && i + reach < n {
            let mut acc = 0.0;
            for (&o, &c) in offsets.iter().zip(&coeffs) {
                acc += c * values[(i as i64 + o) as usize];
            }
            out[i] = acc / scale;
        } else {
            // one-sided iterated difference
            let forward = i < reach;
            let mut acc = 0.0;
            for k in 0..=q {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let binom = binomial(q, k);
                let idx = if forward {
                    i + (q - k)
                } else {
                    i - (q - k)
                };
                let idx = idx.min(n - 1);
                acc += sign * binom * values[idx];
            }
            if !forward && q % 2 == 1 {
                acc = -acc;
            }
            out[i] = acc / scale;
        }
    }
    out
}

/// Central stencil for the q-th derivative, O(step²): offsets and
/// coefficients (before division by step^q).
fn central_stencil(q: usize) -> (Vec<i64>, Vec<f64>) {
    if q % 2 == 0 {
        let half = (q / 2) as i64;
        let offsets: Vec<i64> = (-half..=half).collect();
        let coeffs: Vec<f64> = (0..=q)
            .map(|k| {
                let sign = if (q - k) % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(q, k)
            })
            .collect();
        (offsets, coeffs)
    } else {
        // convolve the (q−1)-th even stencil with the centered first
        // difference [−1/2, 0, 1/2]
        let (inner_offsets, inner_coeffs) = central_stencil(q - 1);
        let mut map = std::collections::BTreeMap::new();
        for (&o, &c) in inner_offsets.iter().zip(&inner_coeffs) {
            *map.entry(o + 1).or_insert(0.0) += 0.5 * c;
            *map.entry(o - 1).or_insert(0.0) -= 0.5 * c;
        }
        let offsets: Vec<i64> = map.keys().cloned().collect();
        let coeffs: Vec<f64> = map.values().cloned().collect();
        (offsets, coeffs)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
