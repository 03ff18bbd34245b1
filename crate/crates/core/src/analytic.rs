//! Analytic signal, demodulation, phase units, and the covariance
//! structure the Hilbert transform induces on the noise.
//!
//! The analytic signal is `z = x + iH[x]`, computed by the one-sided
//! spectrum method: forward FFT, zero the negative-frequency bins, double
//! the positive ones (DC and Nyquist kept with weight 1), inverse FFT.
//! The real part of the returned series is the input, bit for bit; only
//! the imaginary part comes from the transform.
//!
//! For noise `ε = e + iH[e]` with white `e` of variance σ²:
//!
//! ```text
//!     Cov[ε_j, ε̄_k] = 2σ² (δ_{jk} + i ξ(j−k)),   Cov[ε_j, ε_k] = 0,
//!     ξ(l) = 2/(πl) for odd l, 0 otherwise.
//! ```

use std::cell::RefCell;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::SampledSignal;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], forward: bool) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let fft = if forward {
            planner.plan_fft_forward(buf.len())
        } else {
            planner.plan_fft_inverse(buf.len())
        };
        fft.process(buf);
    });
}

/// Unnormalized FFT shared with the noise synthesizer in [`crate::lab`].
pub(crate) fn fft_in_place_pub(buf: &mut [Complex64], forward: bool) {
    fft_in_place(buf, forward);
}

/// Analytic signal `z = x + iH[x]` of a real record (N ≥ 4).
pub fn analytic(values: &[f64]) -> Result<Vec<Complex64>> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            available: n,
        });
    }
    let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, true);

    // one-sided spectrum; Nyquist (even n) kept with weight 1
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // unchanged
        } else if k < half || (n % 2 == 1 && k <= half) {
            *c *= 2.0;
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }

    fft_in_place(&mut buf, false);
    let scale = 1.0 / n as f64;
    Ok(values
        .iter()
        .zip(&buf)
        .map(|(&x, z)| Complex64::new(x, z.im * scale))
        .collect())
}

/// Discrete Hilbert transform (imaginary part of the analytic signal).
pub fn hilbert(values: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic(values)?.into_iter().map(|z| z.im).collect())
}

/// Analytic signal of a sampled record.
pub fn analytic_signal(signal: &SampledSignal) -> Result<Vec<Complex64>> {
    analytic(signal.values())
}

/// Demodulated complex series `z̃_j = z_j e^{−i(ω₀ t_j + φ₀)}` with its
/// carrier bookkeeping. Frequencies are radians per unit normalized time;
/// `t_j = j/N`.
#[derive(Debug, Clone)]
pub struct AnalyticSeries {
    samples: Vec<Complex64>,
    center_frequency: f64,
    phase_offset: f64,
    source_length: usize,
}

impl AnalyticSeries {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    /// Undo the demodulation: `z_j = z̃_j e^{+i(ω₀ t_j + φ₀)}`.
    pub fn remodulate(&self) -> Vec<Complex64> {
        let n = self.source_length as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(j, z)| {
                z * Complex64::from_polar(
                    1.0,
                    self.center_frequency * j as f64 / n + self.phase_offset,
                )
            })
            .collect()
    }
}

/// Demodulate a complex series about the carrier (ω₀, φ₀).
pub fn demodulate(samples: &[Complex64], omega0: f64, phi0: f64) -> Result<AnalyticSeries> {
    if samples.is_empty() {
        return Err(Error::invalid_input("empty series"));
    }
    if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid_input("non-finite complex samples"));
    }
    let n = samples.len() as f64;
    let demodulated = samples
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, -(omega0 * j as f64 / n + phi0)))
        .collect();
    Ok(AnalyticSeries {
        samples: demodulated,
        center_frequency: omega0,
        phase_offset: phi0,
        source_length: samples.len(),
    })
}

/// Unit-modulus phase observations `u_j = z̃_j/|z̃_j|` with the phase-noise
/// variance `σ_φ² = σ̄²/(A² + σ̄²)`.
#[derive(Debug, Clone)]
pub struct PhaseObservations {
    units: Vec<Complex64>,
    phase_noise_variance: f64,
}

impl PhaseObservations {
    pub fn units(&self) -> &[Complex64] {
        &self.units
    }

    pub fn phase_noise_variance(&self) -> f64 {
        self.phase_noise_variance
    }
}

/// Project demodulated samples onto the unit circle. Errors on any
/// zero-modulus sample, whose phase would be undefined.
pub fn phase_units(
    series: &AnalyticSeries,
    amplitude: f64,
    noise_variance: f64,
) -> Result<PhaseObservations> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid_input("amplitude must be positive"));
    }
    let mut units = Vec::with_capacity(series.samples.len());
    for (index, z) in series.samples.iter().enumerate() {
        let r = z.norm();
        if r == 0.0 {
            return Err(Error::ZeroModulus { index });
        }
        units.push(z / r);
    }
    Ok(PhaseObservations {
        units,
        phase_noise_variance: noise_variance / (amplitude * amplitude + noise_variance),
    })
}

/// Hilbert cross-covariance kernel ξ: `ξ(l) = 2/(πl)` for odd lags, zero
/// for even lags (the zero-lag term is carried by the δ in the covariance).
pub fn hilbert_cross_covariance(lag: i64) -> f64 {
    if lag % 2 == 0 {
        0.0
    } else {
        2.0 / (std::f64::consts::PI * lag as f64)
    }
}

/// One entry of the phase-error covariance
/// `Cov[e_{φ,j}, ē_{φ,k}] = σ_φ² [δ_{jk} − ξ(j−k) e^{i(φ_j−φ_k)} sin(φ_j−φ_k)]`
/// with `σ_φ² = σ²/(A² + σ²)`.
pub fn phase_error_covariance_entry(
    phase_j: f64,
    phase_k: f64,
    lag: i64,
    amplitude: f64,
    sigma2: f64,
) -> Complex64 {
    let sigma_phi2 = sigma2 / (amplitude * amplitude + sigma2);
    let delta = phase_j - phase_k;
    let diag = if lag == 0 { 1.0 } else { 0.0 };
    let cross = Complex64::from_polar(hilbert_cross_covariance(lag) * delta.sin(), delta);
    (Complex64::new(diag, 0.0) - cross) * sigma_phi2
}

/// Full phase-error covariance matrix on a phase track φ(t_j).
pub fn phase_error_covariance(
    phases: &[f64],
    amplitude: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid_input("amplitude must be positive"));
    }
    let n = phases.len();
    Ok(DMatrix::from_fn(n, n, |j, k| {
        phase_error_covariance_entry(phases[j], phases[k], j as i64 - k as i64, amplitude, sigma2)
    }))
}
