//! Instantaneous-frequency estimation for a slowly evolving sinusoid.
//!
//! Pipeline: analytic signal → demodulation about the center frequency →
//! unit-modulus phase observations u_j = e^{i·arg z̃_j} → kernel estimates
//! of `e^{iφ̃}` (order (0,2)) and `∂_t e^{iφ̃}` (order (1,3)) → combine,
//!
//! ```text
//!     φ̂′(t) = ω₀ + Im[ num(t) / den(t) ]
//! ```
//!
//! computed as `Im[num·conj(den)]/|den|²`, with a low-coherence flag when
//! `|den| < 0.1`. The center frequency is iterated by replacing ω₀ with
//! ω₀ + mean(φ̂′ − ω₀) until the update falls below the configured
//! tolerance. The numerator error dominates, so the shared halfwidth is
//! selected for the (1,3) stage:
//!
//! ```text
//!     h₁,₃ = [ (3/4) σ_φ² m₂ / (C₁,₃² N |∂_t³ e^{iφ̃}|²) ]^{1/7}
//! ```

use num_complex::Complex64;

use crate::adaptive::{median_filter_5, reference_kernel, robust_curvature};
use crate::analytic::{analytic, demodulate, phase_units};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::kernel::KernelOrder;
use crate::signal::SampledSignal;
use crate::smooth::{
    loss_constant, min_halfwidth, optimal_halfwidth, KernelFamily, WindowShape, WindowSmoother,
    MAX_HALFWIDTH,
};

/// Denominator magnitude below which a point is flagged as low-coherence
/// (|den| is near 1 for coherent signals and near 0 for noise).
pub const LOW_COHERENCE_THRESHOLD: f64 = 0.1;

/// Halfwidth selection policy for the pipeline.
#[derive(Debug, Clone, Copy)]
pub enum HalfwidthMode {
    /// One user-chosen halfwidth everywhere.
    Fixed(f64),
    /// Optimal halfwidth from a known third-derivative magnitude
    /// |∂_t³ e^{iφ̃}|.
    Optimal { third_derivative: f64 },
    /// Multistage plug-in: (3,5) pilot of ∂_t³e^{iφ̃}, robustified, then
    /// pointwise optimal halfwidths. `time_scale` seeds the pilot ansatz
    /// (the phase units have unit characteristic amplitude).
    Adaptive { time_scale: f64 },
}

/// Configuration of the instantaneous-frequency estimator. Frequencies are
/// radians per unit normalized time.
#[derive(Debug, Clone, Copy)]
pub struct IfConfig {
    pub center_frequency: f64,
    pub phase_offset: f64,
    pub max_center_iterations: usize,
    pub center_tolerance: f64,
    pub halfwidth: HalfwidthMode,
    /// Known tone amplitude; estimated as the mean analytic modulus when
    /// absent.
    pub amplitude: Option<f64>,
    /// After the center iteration, re-demodulate each window about that
    /// point's own frequency estimate once.
    pub local_recentering: bool,
    /// Use sinusoidal-taper kernels on interior windows (multitone
    /// sidelobe protection).
    pub taper_kernels: bool,
}

impl IfConfig {
    pub fn new(center_frequency: f64, halfwidth: HalfwidthMode) -> Self {
        IfConfig {
            center_frequency,
            phase_offset: 0.0,
            max_center_iterations: 5,
            center_tolerance: 1e-4,
            halfwidth,
            amplitude: None,
            local_recentering: false,
            taper_kernels: false,
        }
    }

    pub fn fixed(center_frequency: f64, halfwidth: f64) -> Self {
        IfConfig::new(center_frequency, HalfwidthMode::Fixed(halfwidth))
    }

    pub fn adaptive(center_frequency: f64) -> Self {
        IfConfig::new(center_frequency, HalfwidthMode::Adaptive { time_scale: 0.25 })
    }

    fn validate(&self) -> Result<()> {
        if self.max_center_iterations == 0 {
            return Err(Error::invalid_input("need at least one center iteration"));
        }
        if !(self.center_tolerance > 0.0) {
            return Err(Error::invalid_input("center tolerance must be positive"));
        }
        if let HalfwidthMode::Fixed(h) = self.halfwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::invalid_input("fixed halfwidth must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-time instantaneous-frequency estimate with its diagnostics.
#[derive(Debug, Clone)]
pub struct IfEstimate {
    pub times: Vec<f64>,
    /// φ̂′(t), radians per unit normalized time.
    pub instantaneous_frequency: Vec<f64>,
    /// Smoothed analytic modulus Â(t).
    pub amplitude: Vec<f64>,
    pub halfwidth_used: Vec<f64>,
    /// Leading-order expected squared error of φ̂′ at the used halfwidth
    /// (variance term only when no curvature estimate is available).
    pub predicted_loss: Vec<f64>,
    /// True where the kernel window was truncated by the record edge.
    pub edge_flags: Vec<bool>,
    /// True where |den| fell below the coherence threshold.
    pub low_coherence_flags: Vec<bool>,
    /// Final center frequency after iteration.
    pub center_frequency: f64,
    /// Whether the center iteration met its tolerance.
    pub center_converged: bool,
    /// Center update magnitudes per iteration (diagnostic).
    pub center_deltas: Vec<f64>,
    /// σ_φ² used by the error model.
    pub phase_noise_variance: f64,
    /// Estimated total phase φ̂(t_mid) at the record midpoint, the anchor
    /// for phase-track reconstruction.
    pub midpoint_phase: f64,
}

/// Optimal halfwidth for the (1,3) phase-derivative stage, clipped to the
/// admissible range; degenerate (zero) curvature falls back to the maximum.
pub fn if_optimal_halfwidth(
    sigma_phi2: f64,
    n: usize,
    third_derivative: f64,
    m2: f64,
    c_13: f64,
) -> f64 {
    let h_min = (4.0 / n as f64).min(MAX_HALFWIDTH);
    if third_derivative == 0.0 {
        return MAX_HALFWIDTH;
    }
    let ratio =
        0.75 * sigma_phi2 * m2 / (c_13 * c_13 * n as f64 * third_derivative * third_derivative);
    ratio.powf(1.0 / 7.0).clamp(h_min, MAX_HALFWIDTH)
}

/// Expected squared error of φ̂′ at the optimal halfwidth:
/// `M₁,₃ |C₁,₃ ∂³e^{iφ̃}|^{6/7} (σ_φ² m₂/N)^{4/7}`.
pub fn if_predicted_loss(
    sigma_phi2: f64,
    n: usize,
    third_derivative: f64,
    m2: f64,
    c_13: f64,
) -> f64 {
    let order = KernelOrder::preferred(1);
    loss_constant(order)
        * (c_13 * third_derivative).abs().powf(6.0 / 7.0)
        * (sigma_phi2 * m2 / n as f64).powf(4.0 / 7.0)
}

/// Share of the φ̂′ variance contributed by the denominator estimate
/// relative to the numerator's, `(m₂⁰²/m₂¹³)·(φ̃′ h)²`. Small whenever the
/// residual rotation over a window stays below a radian.
pub fn denominator_variance_share(phi_tilde_rate: f64, h: f64, m2_02: f64, m2_13: f64) -> f64 {
    (m2_02 / m2_13) * (phi_tilde_rate * h).powi(2)
}

/// Run the instantaneous-frequency pipeline on a sampled record.
pub fn estimate_if(
    signal: &SampledSignal,
    config: &IfConfig,
    noise: &CovarianceModel,
) -> Result<IfEstimate> {
    config.validate()?;
    let n = signal.n();
    let nf = n as f64;
    let z = analytic(signal.values())?;
    let modulus: Vec<f64> = z.iter().map(|c| c.norm()).collect();
    let amplitude_hat = config
        .amplitude
        .unwrap_or_else(|| modulus.iter().sum::<f64>() / nf);
    if !(amplitude_hat > 0.0) {
        return Err(Error::invalid_input("estimated amplitude is zero"));
    }

    let ref13 = reference_kernel(KernelOrder::preferred(1))?;
    let (m2_13, c_13) = (ref13.m2(), ref13.c_qp());

    let shape = if config.taper_kernels {
        WindowShape::SineTaper
    } else {
        WindowShape::MinimalVariance
    };
    let family02 = KernelFamily {
        order: KernelOrder::preferred(0),
        shape,
    };
    let family13 = KernelFamily {
        order: KernelOrder::preferred(1),
        shape,
    };

    let times = signal.times();
    let mut omega = config.center_frequency;
    let mut center_deltas = Vec::new();
    let mut converged = false;

    let mut state: Option<PassState> = None;
    for _ in 0..config.max_center_iterations {
        let sigma_bar2 = noise_level(noise, omega, nf);
        let sigma_phi2 = sigma_bar2 / (amplitude_hat * amplitude_hat + sigma_bar2);
        let series = demodulate(&z, omega, config.phase_offset)?;
        let obs = phase_units(&series, amplitude_hat, sigma_bar2)?;

        let (halfwidths, third_track) = select_halfwidths(
            config,
            obs.units(),
            n,
            sigma_phi2,
            m2_13,
            c_13,
        )?;

        let pass = run_pass(
            obs.units(),
            &times,
            &halfwidths,
            omega,
            family02,
            family13,
            None,
        )?;

        let delta = mean_update(&pass, omega);
        center_deltas.push(delta.abs());
        let next = omega + delta;
        state = Some(PassState {
            pass,
            halfwidths,
            third_track,
            sigma_phi2,
            omega,
        });
        if delta.abs() <= config.center_tolerance {
            converged = true;
            break;
        }
        omega = next;
    }
    let mut state = state.expect("at least one center iteration");

    if config.local_recentering {
        // one extra pass, each window demodulated about its own estimate
        let sigma_bar2 = noise_level(noise, state.omega, nf);
        let series = demodulate(&z, state.omega, config.phase_offset)?;
        let obs = phase_units(&series, amplitude_hat, sigma_bar2)?;
        let detune: Vec<f64> = state
            .pass
            .frequency
            .iter()
            .map(|f| f - state.omega)
            .collect();
        state.pass = run_pass(
            obs.units(),
            &times,
            &state.halfwidths,
            state.omega,
            family02,
            family13,
            Some(&detune),
        )?;
    }

    // amplitude track: (0,2)-smooth of the analytic modulus
    let mut amp_smoother = WindowSmoother::new(n, family02);
    let mut amplitude = Vec::with_capacity(n);
    for (j, &t) in times.iter().enumerate() {
        let (a, _) = amp_smoother.smooth(&modulus, t, state.halfwidths[j])?;
        amplitude.push(a);
    }

    let predicted_loss: Vec<f64> = (0..n)
        .map(|j| {
            let h = state.halfwidths[j];
            let variance = state.sigma_phi2 * m2_13 / (nf * h.powi(3));
            let bias = match &state.third_track {
                Some(track) => c_13 * track[j] * h * h,
                None => 0.0,
            };
            bias * bias + variance
        })
        .collect();

    let mid = times.len() / 2;
    let midpoint_phase =
        state.omega * times[mid] + config.phase_offset + state.pass.den_mid.arg();

    Ok(IfEstimate {
        times,
        instantaneous_frequency: state.pass.frequency,
        amplitude,
        halfwidth_used: state.halfwidths,
        predicted_loss,
        edge_flags: state.pass.edge,
        low_coherence_flags: state.pass.low_coherence,
        center_frequency: state.omega,
        center_converged: converged,
        center_deltas,
        phase_noise_variance: state.sigma_phi2,
        midpoint_phase,
    })
}

struct PassState {
    pass: Pass,
    halfwidths: Vec<f64>,
    third_track: Option<Vec<f64>>,
    sigma_phi2: f64,
    omega: f64,
}

struct Pass {
    frequency: Vec<f64>,
    edge: Vec<bool>,
    low_coherence: Vec<bool>,
    /// (0,2) phase-unit estimate at the record midpoint.
    den_mid: Complex64,
}

/// Effective per-component noise variance of the analytic signal at the
/// carrier (the Hilbert transform preserves the white level; colored models
/// contribute their local spectral level).
fn noise_level(noise: &CovarianceModel, omega: f64, nf: f64) -> f64 {
    match noise {
        CovarianceModel::White { sigma2 } => *sigma2,
        CovarianceModel::HilbertPhase { sigma2, .. } => *sigma2,
        _ => noise.local_level(omega / nf),
    }
}

fn select_halfwidths(
    config: &IfConfig,
    units: &[Complex64],
    n: usize,
    sigma_phi2: f64,
    m2_13: f64,
    c_13: f64,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let nf = n as f64;
    match config.halfwidth {
        HalfwidthMode::Fixed(h) => Ok((vec![h; n], None)),
        HalfwidthMode::Optimal { third_derivative } => {
            let h = if_optimal_halfwidth(sigma_phi2, n, third_derivative, m2_13, c_13);
            Ok((vec![h; n], Some(vec![third_derivative.abs(); n])))
        }
        HalfwidthMode::Adaptive { time_scale } => {
            if !(time_scale > 0.0) {
                return Err(Error::invalid_input("adaptive time scale must be positive"));
            }
            let order35 = KernelOrder::preferred(3);
            let ref35 = reference_kernel(order35)?;
            let ansatz_fifth = 1.0 / time_scale.powi(5);
            let cov = CovarianceModel::White { sigma2: sigma_phi2 };
            let h35 = optimal_halfwidth(
                order35,
                &cov,
                ansatz_fifth,
                n,
                ref35.m2(),
                ref35.c_qp(),
                0.0,
            )
            .value;

            let mut pilot_smoother =
                WindowSmoother::new(n, KernelFamily::minimal_variance(order35));
            let mut theta = Vec::with_capacity(n);
            for j in 0..n {
                let t = j as f64 / nf;
                let (d3, _) = pilot_smoother.smooth(units, t, h35)?;
                theta.push(d3.norm_sqr());
            }

            let raw: Vec<f64> = theta
                .iter()
                .map(|&c2| if_optimal_halfwidth(sigma_phi2, n, c2.sqrt(), m2_13, c_13))
                .collect();
            let h_bar = raw.iter().cloned().fold(0.0_f64, f64::max);
            let g = reference_kernel(KernelOrder::preferred(0))?;
            let smoothed = robust_curvature(&theta, h_bar, &g);
            let third: Vec<f64> = smoothed.iter().map(|c2| c2.sqrt()).collect();
            let mut halfwidths: Vec<f64> = third
                .iter()
                .map(|&d3| if_optimal_halfwidth(sigma_phi2, n, d3, m2_13, c_13))
                .collect();
            halfwidths = median_filter_5(&halfwidths);
            let h_min = min_halfwidth(KernelOrder::preferred(1), n).min(MAX_HALFWIDTH);
            for h in halfwidths.iter_mut() {
                // quantize to the grid so window kernels are shared
                *h = ((*h * nf).round() / nf).clamp(h_min, MAX_HALFWIDTH);
            }
            Ok((halfwidths, Some(third)))
        }
    }
}

/// One estimation pass over all evaluation times at the given halfwidths.
/// `detune[j]`, when present, re-demodulates the window about
/// ω + detune[j] for point j (local recentering).
fn run_pass(
    units: &[Complex64],
    times: &[f64],
    halfwidths: &[f64],
    omega: f64,
    family02: KernelFamily,
    family13: KernelFamily,
    detune: Option<&[f64]>,
) -> Result<Pass> {
    let n = units.len();
    let nf = n as f64;
    let mut s02 = WindowSmoother::new(n, family02);
    let mut s13 = WindowSmoother::new(n, family13);
    let mut frequency = Vec::with_capacity(times.len());
    let mut edge = Vec::with_capacity(times.len());
    let mut low = Vec::with_capacity(times.len());
    let mid = times.len() / 2;
    let mut den_mid = Complex64::new(0.0, 0.0);

    for (j, &t) in times.iter().enumerate() {
        let h = halfwidths[j];
        let local = detune.map(|d| d[j]).unwrap_or(0.0);
        let k02 = s02.kernel_for(t, h)?;
        let k13 = s13.kernel_for(t, h)?;

        let (den, num) = if local == 0.0 {
            (
                crate::smooth::apply_kernel(units, &k02, t)?,
                crate::smooth::apply_kernel(units, &k13, t)?,
            )
        } else {
            (
                apply_detuned(units, &k02, t, local, nf)?,
                apply_detuned(units, &k13, t, local, nf)?,
            )
        };

        let norm2 = den.norm_sqr();
        let ratio_im = if norm2 > 0.0 {
            (num * den.conj()).im / norm2
        } else {
            0.0
        };
        if j == mid {
            den_mid = den;
        }
        frequency.push(omega + local + ratio_im);
        edge.push(s02.is_edge(t, h));
        low.push(den.norm() < LOW_COHERENCE_THRESHOLD);
    }
    Ok(Pass {
        frequency,
        edge,
        low_coherence: low,
        den_mid,
    })
}

/// Kernel application with an extra carrier `e^{−i·detune·(t_j − t)}`
/// removed inside the window.
fn apply_detuned(
    units: &[Complex64],
    kernel: &crate::kernel::Kernel,
    t: f64,
    detune: f64,
    nf: f64,
) -> Result<Complex64> {
    let h = kernel.halfwidth();
    let mut acc = Complex64::new(0.0, 0.0);
    for (&w, &s) in kernel.weights().iter().zip(kernel.offsets()) {
        let x = (t - s * h) * nf;
        let j = x.round();
        if (x - j).abs() > 1e-6 || j < 0.0 || j >= nf {
            return Err(Error::invalid_input(
                "kernel taps do not align with the sample grid",
            ));
        }
        let tj = j / nf;
        let rotated = units[j as usize] * Complex64::from_polar(1.0, -detune * (tj - t));
        acc += rotated * w;
    }
    let q = kernel.order().q();
    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
    Ok(acc * (sign / h.powi(q as i32)))
}

/// Mean φ̂′ − ω over clean points (all points when none are clean).
fn mean_update(pass: &Pass, omega: f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for ((f, &e), &l) in pass
        .frequency
        .iter()
        .zip(&pass.edge)
        .zip(&pass.low_coherence)
    {
        if !e && !l {
            acc += f - omega;
            count += 1;
        }
    }
    if count == 0 {
        let total: f64 = pass.frequency.iter().map(|f| f - omega).sum();
        return total / pass.frequency.len() as f64;
    }
    acc / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{self, PhaseModel, ToneSpec};
    use std::f64::consts::PI;

    fn interior(n: usize, h: f64) -> std::ops::Range<usize> {
        let margin = (h * n as f64).ceil() as usize + 1;
        margin..(n - margin)
    }

    #[test]
    fn constant_tone_recovers_center_frequency() {
        let n = 1024;
        let omega = 2.0 * PI * 50.0;
        let signal = SampledSignal::from_fn(n, |t| (omega * t + 0.4).cos()).unwrap();
        let noise = CovarianceModel::white(0.0).unwrap();
        let mut config = IfConfig::fixed(omega, 0.05);
        config.phase_offset = 0.4;
        config.max_center_iterations = 1;
        let est = estimate_if(&signal, &config, &noise).unwrap();
        for j in interior(n, 0.05) {
            assert!(
                (est.instantaneous_frequency[j] - omega).abs() < 1e-8,
                "j = {j}: {}",
                est.instantaneous_frequency[j]
            );
            assert!((est.amplitude[j] - 1.0).abs() < 1e-6);
            assert!(!est.edge_flags[j]);
            assert!(!est.low_coherence_flags[j]);
        }
        assert!(est.edge_flags[0] && est.edge_flags[n - 1]);
    }

    #[test]
    fn linear_chirp_error_bounded_by_bias_prediction() {
        let n = 4096;
        let omega0 = 2.0 * PI * 300.0;
        let beta = 2.0 * PI * 4.0;
        let spec = ToneSpec {
            amplitude: lab::AmplitudeModel::Constant(1.0),
            phase: PhaseModel::LinearChirp {
                omega: omega0,
                phi0: 0.0,
                rate: beta,
            },
        };
        let noise = CovarianceModel::white(0.0).unwrap();
        let (signal, truth) = lab::generate(&[spec], n, &noise, 0).unwrap();
        let h = 0.01;
        // start centered mid-chirp so the residual rotation is small
        let mut config = IfConfig::fixed(omega0 + beta / 2.0, h);
        config.max_center_iterations = 3;
        config.center_tolerance = 1e-6;
        let est = estimate_if(&signal, &config, &noise).unwrap();

        // leading-order bias bound from the closed-form derivatives
        let max_rate = beta / 2.0;
        let d3 = ((3.0 * max_rate * beta).powi(2) + max_rate.powi(6)).sqrt();
        let d2 = (beta * beta + max_rate.powi(4)).sqrt();
        let bound = 1.5 * h * h * (d3 / 14.0 + 0.1 * d2 * max_rate) + 1e-9;
        for j in interior(n, h) {
            let err = (est.instantaneous_frequency[j] - truth.tones[0].frequency[j]).abs();
            assert!(err <= bound, "j = {j}: err {err:.3e} bound {bound:.3e}");
        }
    }

    #[test]
    fn frequency_shift_equivariance() {
        let n = 2048;
        let omega = 2.0 * PI * 200.0;
        let shift = 2.0 * PI * 64.0;
        let fm = PhaseModel::SinusoidalFm {
            omega,
            phi0: 0.2,
            depth: 1.0,
            rate: 2.0 * PI * 2.0,
            phase: 0.0,
        };
        let base = SampledSignal::from_fn(n, |t| {
            (PhaseModel::at(&fm, t)).cos()
        })
        .unwrap();
        let shifted = SampledSignal::from_fn(n, |t| {
            (PhaseModel::at(&fm, t) + shift * t).cos()
        })
        .unwrap();
        let noise = CovarianceModel::white(0.0).unwrap();
        let mut c1 = IfConfig::fixed(omega, 0.02);
        c1.max_center_iterations = 1;
        let mut c2 = IfConfig::fixed(omega + shift, 0.02);
        c2.max_center_iterations = 1;
        let a = estimate_if(&base, &c1, &noise).unwrap();
        let b = estimate_if(&shifted, &c2, &noise).unwrap();
        for j in interior(n, 0.02) {
            let diff = b.instantaneous_frequency[j] - a.instantaneous_frequency[j];
            assert!(
                (diff - shift).abs() < 1e-9,
                "j = {j}: shift mismatch {:.3e}",
                diff - shift
            );
        }
    }

    #[test]
    fn time_reversal_reflects_the_estimate() {
        // an exactly band-limited two-bin beat: reversal maps the sample
        // grid onto itself and the frequency track reflects
        let n = 1024;
        let k1 = 100.0;
        let signal = SampledSignal::from_fn(n, |t| {
            (2.0 * PI * k1 * t).cos() + 0.4 * (2.0 * PI * (k1 + 2.0) * t).cos()
        })
        .unwrap();
        let mut reversed_values = signal.values().to_vec();
        reversed_values.reverse();
        let reversed = SampledSignal::new(reversed_values).unwrap();
        let noise = CovarianceModel::white(0.0).unwrap();
        let mut config = IfConfig::fixed(2.0 * PI * (k1 + 1.0), 0.03);
        config.max_center_iterations = 1;
        let fwd = estimate_if(&signal, &config, &noise).unwrap();
        let rev = estimate_if(&reversed, &config, &noise).unwrap();
        for j in interior(n, 0.03) {
            let mirrored = rev.instantaneous_frequency[n - 1 - j];
            assert!(
                (fwd.instantaneous_frequency[j] - mirrored).abs() < 1e-9,
                "j = {j}"
            );
        }
    }

    #[test]
    fn center_iteration_contracts_on_chirps() {
        let n = 2048;
        let omega0 = 2.0 * PI * 150.0;
        let beta = 2.0 * PI * 3.0;
        let signal = SampledSignal::from_fn(n, |t| (omega0 * t + 0.5 * beta * t * t).cos())
            .unwrap();
        let noise = CovarianceModel::white(0.0).unwrap();
        // start the center off by a few bins
        let mut config = IfConfig::fixed(omega0 - 2.0 * PI * 5.0, 0.02);
        config.max_center_iterations = 6;
        config.center_tolerance = 1e-10;
        let est = estimate_if(&signal, &config, &noise).unwrap();
        for pair in est.center_deltas.windows(2) {
            assert!(
                pair[1] <= pair[0] * 1.05 + 1e-12,
                "center updates not contracting: {:?}",
                est.center_deltas
            );
        }
        assert!((est.center_frequency - (omega0 + beta / 2.0)).abs() < 0.1);
    }

    #[test]
    fn optimal_halfwidth_formula_scalings() {
        let m2 = 15.0 / 7.0;
        let c = 1.0 / 14.0;
        let sp2 = 9.901e-3;
        let h = if_optimal_halfwidth(sp2, 4096, 100.0, m2, c);
        // arithmetic baseline, evaluated independently
        let expect = (0.75 * sp2 * m2 / (c * c * 4096.0 * 1e4)).powf(1.0 / 7.0);
        assert!((h - expect).abs() < 1e-15);
        assert!((h - 0.0963).abs() < 5e-4, "h = {h}");

        // N scaling: h ∝ N^{−1/7}
        let h2 = if_optimal_halfwidth(sp2, 2 * 4096, 100.0, m2, c);
        assert!((h2 / h - 2.0_f64.powf(-1.0 / 7.0)).abs() < 1e-12);

        // quadrupling |∂³| multiplies h by 4^{−2/7}
        let h3 = if_optimal_halfwidth(sp2, 4096, 400.0, m2, c);
        assert!((h3 / h - 4.0_f64.powf(-2.0 / 7.0)).abs() < 1e-12);

        // degenerate curvature falls back to the cap
        assert_eq!(if_optimal_halfwidth(sp2, 4096, 0.0, m2, c), MAX_HALFWIDTH);
    }

    #[test]
    fn predicted_loss_formula_and_consistency() {
        let m2 = 15.0 / 7.0;
        let c = 1.0 / 14.0;
        let sp2 = 5e-3;
        let third = 40.0;
        assert_eq!(if_predicted_loss(0.0, 4096, third, m2, c), 0.0);
        let l1 = if_predicted_loss(sp2, 1000, third, m2, c);
        let l2 = if_predicted_loss(sp2, 2000, third, m2, c);
        assert!((l1 / l2 - 2.0_f64.powf(4.0 / 7.0)).abs() < 1e-12);

        // equals the generic minimal loss under the §-substitutions
        let order = KernelOrder::preferred(1);
        let cov = CovarianceModel::white(sp2).unwrap();
        let generic =
            crate::smooth::minimal_loss_value(order, &cov, third, 1000, m2, c, 0.0);
        assert!(((l1 - generic) / generic).abs() < 1e-12);

        // and matches bias² + variance at the optimal halfwidth
        let h = if_optimal_halfwidth(sp2, 1000, third, m2, c);
        let bias = c * third * h * h;
        let variance = sp2 * m2 / (1000.0 * h.powi(3));
        assert!(((bias * bias + variance - l1) / l1).abs() < 1e-10);
    }

    #[test]
    fn pure_noise_raises_low_coherence_flags() {
        let noise = CovarianceModel::white(1.0).unwrap();
        let (signal, _) = lab::generate(&[], 2048, &noise, 5).unwrap();
        let mut config = IfConfig::fixed(2.0 * PI * 300.0, 0.01);
        config.max_center_iterations = 1;
        config.amplitude = Some(1.0);
        let est = estimate_if(&signal, &config, &noise).unwrap();
        let flagged = est.low_coherence_flags.iter().filter(|f| **f).count();
        assert!(
            flagged > est.low_coherence_flags.len() / 4,
            "only {flagged} low-coherence points on pure noise"
        );
        assert!(est
            .instantaneous_frequency
            .iter()
            .all(|v| v.is_finite()));
    }

    #[test]
    fn denominator_share_is_small_for_coherent_windows() {
        // advisory diagnostic: |φ̃′|h ≪ 1 keeps the denominator noise
        // below 10% of the numerator's
        let share = denominator_variance_share(5.0, 0.02, 0.6, 15.0 / 7.0);
        assert!(share < 0.1, "share = {share}");
    }

    #[test]
    fn adaptive_mode_tracks_noisy_fm_tone() {
        let n = 4096;
        let omega = 2.0 * PI * 500.0;
        let spec = ToneSpec {
            amplitude: lab::AmplitudeModel::Constant(1.0),
            phase: PhaseModel::SinusoidalFm {
                omega,
                phi0: 0.0,
                depth: 3.0,
                rate: 2.0 * PI * 1.0,
                phase: 0.3,
            },
        };
        let sigma2 = 0.005; // SNR = A²/2σ² = 100 → 20 dB
        let noise = CovarianceModel::white(sigma2).unwrap();
        let (signal, truth) = lab::generate(&[spec], n, &noise, 17).unwrap();
        let mut config = IfConfig::adaptive(omega);
        config.max_center_iterations = 3;
        let est = estimate_if(&signal, &config, &noise).unwrap();
        let mut sq = 0.0;
        let mut count = 0;
        for j in 0..n {
            if !est.edge_flags[j] && !est.low_coherence_flags[j] {
                sq += (est.instantaneous_frequency[j] - truth.tones[0].frequency[j]).powi(2);
                count += 1;
            }
        }
        let rmse = (sq / count as f64).sqrt();
        // FM depth·rate = 6π ≈ 19 rad/time of swing; demand sub-rad/time
        // accuracy, about two orders below the swing
        assert!(rmse < 1.0, "rmse = {rmse}");
    }
}
