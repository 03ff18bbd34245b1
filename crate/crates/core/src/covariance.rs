//! Noise covariance descriptions used by variance prediction, halfwidth
//! selection, and kernel design.
//!
//! Four models are supported: white noise, a stationary lag covariance
//! (correlation sequence times a variance), a spectral density on
//! [−π, π] in radians per sample, and the phase-error structure induced
//! by the Hilbert transform on demodulated phase units.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of quadrature nodes used when a spectral density has to be
/// integrated (exact variance mode, design matrices).
pub const SPECTRAL_QUADRATURE_POINTS: usize = 4096;

/// Noise covariance model.
#[derive(Clone)]
pub enum CovarianceModel {
    /// Independent noise with variance σ².
    White { sigma2: f64 },
    /// Stationary noise: `Cov[e_j, e_k] = σ² R(|j−k|)` with `R(0) = 1`.
    /// Lags beyond the stored sequence are treated as uncorrelated.
    StationaryLag { lags: Vec<f64>, sigma2: f64 },
    /// Stationary noise described by its spectral density S(ω) ≥ 0,
    /// ω in radians per sample on [−π, π], normalized so that
    /// σ² = (1/2π)∫S(ω)dω.
    Spectral {
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// Phase-error covariance of demodulated unit phasors built from the
    /// analytic signal of a tone with amplitude A in white noise σ².
    /// The diagonal level is `σ_φ² = σ²/(A² + σ²)`; off-diagonal entries
    /// carry the Hilbert cross-covariance `ξ`.
    HilbertPhase { amplitude: f64, sigma2: f64 },
}

impl fmt::Debug for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceModel::White { sigma2 } => write!(f, "White {{ sigma2: {sigma2} }}"),
            CovarianceModel::StationaryLag { lags, sigma2 } => write!(
                f,
                "StationaryLag {{ lags: {} entries, sigma2: {sigma2} }}",
                lags.len()
            ),
            CovarianceModel::Spectral { .. } => write!(f, "Spectral {{ .. }}"),
            CovarianceModel::HilbertPhase { amplitude, sigma2 } => {
                write!(f, "HilbertPhase {{ amplitude: {amplitude}, sigma2: {sigma2} }}")
            }
        }
    }
}

impl CovarianceModel {
    /// White noise with variance σ² ≥ 0.
    pub fn white(sigma2: f64) -> Result<Self> {
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(Error::InvalidCovariance {
                reason: format!("white variance must be nonnegative, got {sigma2}"),
            });
        }
        Ok(CovarianceModel::White { sigma2 })
    }

    /// Stationary lag covariance; `lags[0]` must equal 1.
    pub fn stationary(lags: Vec<f64>, sigma2: f64) -> Result<Self> {
        if lags.is_empty() || (lags[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCovariance {
                reason: "lag sequence must start with R(0) = 1".into(),
            });
        }
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(Error::InvalidCovariance {
                reason: format!("variance must be nonnegative, got {sigma2}"),
            });
        }
        if lags.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidCovariance {
                reason: "non-finite lag covariance entry".into(),
            });
        }
        Ok(CovarianceModel::StationaryLag { lags, sigma2 })
    }

    /// Spectral density model; the function is evaluated lazily and must be
    /// nonnegative on [−π, π].
    pub fn spectral(density: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CovarianceModel::Spectral {
            density: Arc::new(density),
        }
    }

    /// Hilbert phase-error model with tone amplitude A > 0 and noise σ² ≥ 0.
    pub fn hilbert_phase(amplitude: f64, sigma2: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidCovariance {
                reason: format!("amplitude must be positive, got {amplitude}"),
            });
        }
        if sigma2 < 0.0 || !sigma2.is_finite() {
            return Err(Error::InvalidCovariance {
                reason: format!("variance must be nonnegative, got {sigma2}"),
            });
        }
        Ok(CovarianceModel::HilbertPhase { amplitude, sigma2 })
    }

    /// Correlation at an integer sample lag (unit variance scale).
    pub fn correlation(&self, lag: i64) -> f64 {
        match self {
            CovarianceModel::White { .. } => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            CovarianceModel::StationaryLag { lags, .. } => {
                let idx = lag.unsigned_abs() as usize;
                lags.get(idx).copied().unwrap_or(0.0)
            }
            CovarianceModel::Spectral { density } => {
                // inverse transform of the symmetrized density
                let s0 = spectral_lag(density, 0);
                if s0 <= 0.0 {
                    0.0
                } else {
                    spectral_lag(density, lag) / s0
                }
            }
            CovarianceModel::HilbertPhase { .. } => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// White-equivalent noise level near a carrier at ω radians per sample:
    /// σ² for white noise, the spectral density S(ω) for colored models,
    /// and the phase-noise variance σ_φ² for the Hilbert phase model.
    pub fn local_level(&self, omega_per_sample: f64) -> f64 {
        match self {
            CovarianceModel::White { sigma2 } => *sigma2,
            CovarianceModel::StationaryLag { lags, sigma2 } => {
                // S(ω) = σ² Σ_l R(l) e^{−iωl}, real by symmetry
                let mut s = lags[0];
                for (l, r) in lags.iter().enumerate().skip(1) {
                    s += 2.0 * r * (omega_per_sample * l as f64).cos();
                }
                (sigma2 * s).max(0.0)
            }
            CovarianceModel::Spectral { density } => density(omega_per_sample),
            CovarianceModel::HilbertPhase { amplitude, sigma2 } => {
                sigma2 / (amplitude * amplitude + sigma2)
            }
        }
    }

    /// Variance scale multiplying the correlation structure: σ² for the
    /// data-space models, σ_φ² for the Hilbert phase model.
    pub fn base_variance(&self) -> f64 {
        match self {
            CovarianceModel::White { sigma2 } | CovarianceModel::StationaryLag { sigma2, .. } => {
                *sigma2
            }
            CovarianceModel::Spectral { density } => spectral_lag(density, 0),
            CovarianceModel::HilbertPhase { amplitude, sigma2 } => {
                sigma2 / (amplitude * amplitude + sigma2)
            }
        }
    }

    /// Real symmetric covariance matrix between kernel taps sitting at the
    /// given positions (in sample units). Used as the quadratic-form matrix
    /// in minimal-loss kernel design; the Hilbert phase model reduces to its
    /// diagonal here (zero slow-phase reference).
    pub fn design_matrix(&self, sample_positions: &[f64]) -> Result<DMatrix<f64>> {
        let n = sample_positions.len();
        let mut r = DMatrix::zeros(n, n);
        let scale = self.base_variance();
        for i in 0..n {
            for j in 0..=i {
                let lag = (sample_positions[i] - sample_positions[j]).round() as i64;
                let v = scale * self.correlation(lag);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        Ok(r)
    }
}

/// σ²R(l) recovered from a spectral density by trapezoid quadrature.
fn spectral_lag(density: &Arc<dyn Fn(f64) -> f64 + Send + Sync>, lag: i64) -> f64 {
    let m = SPECTRAL_QUADRATURE_POINTS;
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        let omega = -std::f64::consts::PI + (k as f64 + 0.5) * step;
        acc += density(omega) * (omega * lag as f64).cos();
    }
    acc * step / (2.0 * std::f64::consts::PI)
}

/// First-difference estimate of the noise variance,
/// `σ̂² = Σ (y_{j+1} − y_j)² / (2(N−1))`, valid when the signal part varies
/// slowly relative to the sampling rate.
pub fn estimate_noise_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let sum: f64 = values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    sum / (2.0 * (values.len() - 1) as f64)
}
