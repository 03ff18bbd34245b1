//! Iterative estimation of several evolving sinusoids.
//!
//! Each line is estimated on its corrected dataset — the record minus the
//! reconstructions of all other lines — and the correction/estimation
//! cycle is iterated (Jacobi style, so line order is immaterial).
//! The interference criterion compares each line's own evolution bias
//! against the leakage of another line's residual through the kernel's
//! frequency response,
//!
//! ```text
//!     |C_{q,p} ∂_t^p A_ℓ h^p|  >  margin · |Ã_ℓ′ U(|ω_ℓ − ω_ℓ′| − ω_b)|
//! ```
//!
//! and when it fails for any pair the smoothing kernels are swapped for
//! sinusoidal-taper variants, whose stopband suppresses the leakage.

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::instfreq::{estimate_if, HalfwidthMode, IfConfig, IfEstimate};
use crate::kernel::{self, Kernel, KernelOrder};
use crate::signal::SampledSignal;
use crate::smooth::minimal_loss_value;

/// A set of well-separated tone lines, with per-line reconstructions of
/// `Â_ℓ cos(φ̂_ℓ)` once they have been estimated.
#[derive(Debug, Clone)]
pub struct ToneSet {
    frequencies: Vec<f64>,
    guard_bandwidth: f64,
    reconstructions: Vec<Option<Vec<f64>>>,
}

impl ToneSet {
    /// Frequencies in radians per unit normalized time; sorted ascending
    /// internally. Pairwise separations must exceed twice the guard
    /// bandwidth.
    pub fn new(frequencies: &[f64], guard_bandwidth: f64) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::invalid_input("at least one tone required"));
        }
        if !(guard_bandwidth > 0.0) || !guard_bandwidth.is_finite() {
            return Err(Error::invalid_input("guard bandwidth must be positive"));
        }
        let mut sorted = frequencies.to_vec();
        if sorted.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid_input("non-finite tone frequency"));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in sorted.windows(2) {
            if pair[1] - pair[0] <= 2.0 * guard_bandwidth {
                return Err(Error::invalid_input(format!(
                    "tones at {} and {} closer than twice the guard bandwidth {}",
                    pair[0], pair[1], guard_bandwidth
                )));
            }
        }
        let count = sorted.len();
        Ok(ToneSet {
            frequencies: sorted,
            guard_bandwidth,
            reconstructions: vec![None; count],
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn guard_bandwidth(&self) -> f64 {
        self.guard_bandwidth
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn set_reconstruction(&mut self, line: usize, values: Vec<f64>) {
        self.reconstructions[line] = Some(values);
    }

    pub fn reconstruction(&self, line: usize) -> Option<&[f64]> {
        self.reconstructions[line].as_deref()
    }
}

/// The ℓ-th corrected dataset: the record minus every other line's
/// reconstruction. Lines without a reconstruction are an error.
pub fn corrected_dataset(
    signal: &SampledSignal,
    tones: &ToneSet,
    exclude_line: usize,
) -> Result<SampledSignal> {
    if exclude_line >= tones.len() {
        return Err(Error::invalid_input("excluded line out of range"));
    }
    let mut values = signal.values().to_vec();
    for line in 0..tones.len() {
        if line == exclude_line {
            continue;
        }
        let recon = tones
            .reconstruction(line)
            .ok_or(Error::MissingToneEstimate { line })?;
        if recon.len() != values.len() {
            return Err(Error::invalid_input("reconstruction length mismatch"));
        }
        for (v, r) in values.iter_mut().zip(recon) {
            *v -= r;
        }
    }
    SampledSignal::new(values)
}

/// Interference criterion: can the ℓ′ line's residual be neglected when
/// estimating line ℓ with this kernel? True when the line's own evolution
/// bias exceeds the leaked residual by the margin factor.
pub fn interference_negligible(
    kernel: &Kernel,
    amp_pth_derivative: f64,
    residual_amplitude: f64,
    freq_separation: f64,
    guard_bandwidth: f64,
    margin_factor: f64,
) -> Result<bool> {
    if !(margin_factor > 1.0) {
        return Err(Error::invalid_input("margin factor must exceed 1"));
    }
    let p = kernel.order().p() as i32;
    let own_bias = (kernel.c_qp() * amp_pth_derivative * kernel.halfwidth().powi(p)).abs();
    let leak = kernel
        .spectrum_at((freq_separation.abs() - guard_bandwidth).max(0.0))
        .norm();
    Ok(own_bias > margin_factor * (residual_amplitude * leak).abs())
}

/// Multitone estimation configuration (per-line settings plus the outer
/// correction loop).
#[derive(Debug, Clone, Copy)]
pub struct MultitoneConfig {
    pub halfwidth: HalfwidthMode,
    pub phase_offset: f64,
    pub max_center_iterations: usize,
    pub center_tolerance: f64,
    /// Outer correction/estimation iterations.
    pub outer_iterations: usize,
    /// Stop when every line's frequency track moves less than this
    /// between outer iterations (radians per unit time).
    pub outer_tolerance: f64,
    /// Concrete stand-in for the criterion's "much greater than".
    pub margin_factor: f64,
    /// Characteristic time scale of amplitude evolution in the
    /// interference ansatz `∂_t² A ≈ A/τ²`.
    pub amplitude_time_scale: f64,
    /// Force taper kernels on or off; `None` applies the automatic
    /// interference criterion.
    pub force_taper: Option<bool>,
}

impl MultitoneConfig {
    pub fn new(halfwidth: HalfwidthMode) -> Self {
        MultitoneConfig {
            halfwidth,
            phase_offset: 0.0,
            max_center_iterations: 3,
            center_tolerance: 1e-4,
            outer_iterations: 3,
            outer_tolerance: 1e-3,
            margin_factor: 5.0,
            amplitude_time_scale: 0.25,
            force_taper: None,
        }
    }
}

/// Result of the outer multitone loop. Lines follow the sorted frequency
/// order of the [`ToneSet`].
#[derive(Debug, Clone)]
pub struct MultitoneEstimate {
    pub lines: Vec<IfEstimate>,
    /// Per-line reconstructions Â_ℓ cos(φ̂_ℓ) on the sample grid.
    pub reconstructions: Vec<Vec<f64>>,
    pub taper_engaged: bool,
    pub outer_iterations_used: usize,
    pub converged: bool,
}

/// Estimate every line by iterating per-line estimation on corrected
/// datasets.
pub fn estimate_multitone(
    signal: &SampledSignal,
    tones: &ToneSet,
    config: &MultitoneConfig,
    noise: &CovarianceModel,
) -> Result<MultitoneEstimate> {
    if config.outer_iterations == 0 {
        return Err(Error::invalid_input("need at least one outer iteration"));
    }
    let mut working = tones.clone();
    let mut lines: Vec<Option<IfEstimate>> = vec![None; tones.len()];
    let mut taper = config.force_taper.unwrap_or(false);
    let mut converged = false;
    let mut iterations_used = 0;

    for outer in 0..config.outer_iterations {
        iterations_used = outer + 1;
        // Jacobi sweep: all corrections use the previous iteration's
        // reconstructions, so the line order cannot matter.
        let mut new_lines = Vec::with_capacity(tones.len());
        for (line, &omega) in working.frequencies().iter().enumerate() {
            let data = if outer == 0 {
                signal.clone()
            } else {
                corrected_dataset(signal, &working, line)?
            };
            let mut line_config = IfConfig::new(omega, config.halfwidth);
            line_config.phase_offset = config.phase_offset;
            line_config.max_center_iterations = config.max_center_iterations;
            line_config.center_tolerance = config.center_tolerance;
            line_config.taper_kernels = taper;
            new_lines.push(estimate_if(&data, &line_config, noise)?);
        }

        // convergence: largest interior frequency-track movement
        let mut max_move: f64 = 0.0;
        for (new, old) in new_lines.iter().zip(&lines) {
            if let Some(old) = old {
                for j in 0..new.instantaneous_frequency.len() {
                    if !new.edge_flags[j] {
                        max_move = max_move.max(
                            (new.instantaneous_frequency[j] - old.instantaneous_frequency[j])
                                .abs(),
                        );
                    }
                }
            } else {
                max_move = f64::INFINITY;
            }
        }

        for (line, est) in new_lines.iter().enumerate() {
            working.set_reconstruction(line, reconstruct_line(est));
        }
        lines = new_lines.into_iter().map(Some).collect();

        // engage taper kernels when any pair's interference is not
        // negligible under the current kernels
        if config.force_taper.is_none() && !taper && tones.len() > 1 {
            if !interference_negligible_all(&working, &lines, config, noise, signal.n(), false)? {
                taper = true;
                continue; // re-estimate with tapers before convergence call
            }
        }

        if max_move <= config.outer_tolerance {
            converged = true;
            break;
        }
    }

    let lines: Vec<IfEstimate> = lines.into_iter().map(|l| l.unwrap()).collect();
    let reconstructions = (0..tones.len())
        .map(|l| working.reconstruction(l).unwrap().to_vec())
        .collect();
    Ok(MultitoneEstimate {
        lines,
        reconstructions,
        taper_engaged: taper,
        outer_iterations_used: iterations_used,
        converged,
    })
}

/// Evaluate the interference criterion over all ordered line pairs with the
/// kernels currently in use.
fn interference_negligible_all(
    tones: &ToneSet,
    lines: &[Option<IfEstimate>],
    config: &MultitoneConfig,
    noise: &CovarianceModel,
    n: usize,
    taper: bool,
) -> Result<bool> {
    let order = KernelOrder::preferred(0);
    let tau2 = config.amplitude_time_scale * config.amplitude_time_scale;
    for (l, est_l) in lines.iter().enumerate() {
        let est_l = est_l.as_ref().expect("estimated line");
        let amp_l = mean_amplitude(est_l);
        let h_l = median(&est_l.halfwidth_used);
        let window = window_kernel(order, h_l, n, taper)?;
        for (lp, est_lp) in lines.iter().enumerate() {
            if l == lp {
                continue;
            }
            let est_lp = est_lp.as_ref().expect("estimated line");
            let amp_lp = mean_amplitude(est_lp);
            // expected residual size of the other line's removal: the
            // minimal expected loss of its own (0,2) reconstruction
            let sigma2 = noise.local_level(tones.frequencies()[lp] / n as f64);
            let residual = minimal_loss_value(
                order,
                &CovarianceModel::White { sigma2 },
                amp_lp / tau2,
                n,
                window.m2(),
                window.c_qp(),
                0.0,
            )
            .sqrt();
            let separation = tones.frequencies()[l] - tones.frequencies()[lp];
            let ok = interference_negligible(
                &window,
                amp_l / tau2,
                residual,
                separation,
                tones.guard_bandwidth(),
                config.margin_factor,
            )?;
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Interior kernel on the window a halfwidth h spans at record length n.
pub fn window_kernel(order: KernelOrder, h: f64, n: usize, taper: bool) -> Result<Kernel> {
    let k = (h * n as f64).round().max((order.p() + 1) as f64) as i64;
    let offsets: Vec<f64> = (-k..=k).map(|j| -(j as f64) / k as f64).collect();
    let kernel = if taper {
        kernel::sine_taper_on_offsets(order, &offsets)?
    } else {
        kernel::minimal_variance(order, &offsets)?
    };
    kernel.with_halfwidth(k as f64 / n as f64)
}

/// Reconstruct Â_ℓ cos(φ̂_ℓ) by trapezoid integration of the frequency
/// track, anchored at the record-midpoint phase estimate.
fn reconstruct_line(est: &IfEstimate) -> Vec<f64> {
    let n = est.times.len();
    let mid = n / 2;
    let spacing = if n > 1 {
        est.times[1] - est.times[0]
    } else {
        0.0
    };
    let mut phase = vec![0.0; n];
    phase[mid] = est.midpoint_phase;
    for j in mid..n.saturating_sub(1) {
        phase[j + 1] = phase[j]
            + 0.5
                * (est.instantaneous_frequency[j] + est.instantaneous_frequency[j + 1])
                * spacing;
    }
    for j in (0..mid).rev() {
        phase[j] = phase[j + 1]
            - 0.5
                * (est.instantaneous_frequency[j] + est.instantaneous_frequency[j + 1])
                * spacing;
    }
    (0..n).map(|j| est.amplitude[j] * phase[j].cos()).collect()
}

fn mean_amplitude(est: &IfEstimate) -> f64 {
    est.amplitude.iter().sum::<f64>() / est.amplitude.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{self, ToneSpec};
    use std::f64::consts::PI;

    #[test]
    fn tone_set_validates_separation() {
        assert!(ToneSet::new(&[100.0, 100.0 + 2.0 * PI], 10.0).is_err());
        assert!(ToneSet::new(&[100.0, 200.0], 10.0).is_ok());
        // sorted internally
        let set = ToneSet::new(&[300.0, 100.0], 10.0).unwrap();
        assert_eq!(set.frequencies(), &[100.0, 300.0]);
    }

    #[test]
    fn corrected_dataset_trivial_cases() {
        let noise = CovarianceModel::white(0.0).unwrap();
        let (signal, _) =
            lab::generate(&[ToneSpec::tone(1.0, 2.0 * PI * 30.0, 0.0)], 128, &noise, 0).unwrap();

        // single line: empty sum leaves the record unchanged
        let set = ToneSet::new(&[2.0 * PI * 30.0], 5.0).unwrap();
        let corrected = corrected_dataset(&signal, &set, 0).unwrap();
        assert_eq!(corrected.values(), signal.values());

        // missing estimate names the line
        let set2 = ToneSet::new(&[2.0 * PI * 30.0, 2.0 * PI * 50.0], 5.0).unwrap();
        match corrected_dataset(&signal, &set2, 0) {
            Err(Error::MissingToneEstimate { line }) => assert_eq!(line, 1),
            other => panic!("expected missing-estimate error, got {other:?}"),
        }

        // zero reconstructions subtract nothing
        let mut set3 = set2.clone();
        set3.set_reconstruction(1, vec![0.0; 128]);
        let corrected = corrected_dataset(&signal, &set3, 0).unwrap();
        assert_eq!(corrected.values(), signal.values());
    }

    #[test]
    fn corrected_dataset_removes_known_tone() {
        let omega1 = 2.0 * PI * 40.0;
        let omega2 = 2.0 * PI * 90.0;
        let n = 1024;
        let noise = CovarianceModel::white(0.0).unwrap();
        let (two, _) = lab::generate(
            &[ToneSpec::tone(1.0, omega1, 0.2), ToneSpec::tone(0.7, omega2, 1.0)],
            n,
            &noise,
            0,
        )
        .unwrap();
        let (second_only, _) =
            lab::generate(&[ToneSpec::tone(0.7, omega2, 1.0)], n, &noise, 0).unwrap();

        let mut set = ToneSet::new(&[omega1, omega2], 2.0 * PI * 5.0).unwrap();
        set.set_reconstruction(1, second_only.values().to_vec());
        let corrected = corrected_dataset(&two, &set, 0).unwrap();
        // residual of the removed tone is at rounding level
        let residual_power: f64 = corrected
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let t = j as f64 / n as f64;
                (v - (omega1 * t + 0.2).cos()).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!(residual_power < 1e-10, "residual power {residual_power:e}");
    }

    #[test]
    fn interference_criterion_examples() {
        let order = KernelOrder::new(0, 2).unwrap();
        let kernel = window_kernel(order, 0.05, 4096, false).unwrap();
        // zero residual: always negligible
        assert!(interference_negligible(&kernel, 1.0, 0.0, 500.0, 10.0, 5.0).unwrap());
        // zero own curvature with a real residual: never negligible
        assert!(!interference_negligible(&kernel, 0.0, 0.1, 500.0, 10.0, 5.0).unwrap());
        // margin must exceed 1
        assert!(interference_negligible(&kernel, 1.0, 0.0, 500.0, 10.0, 1.0).is_err());

        // taper stopband turns a failing pair into a passing one
        let separation = 0.3 * PI * 4096.0; // rad per unit time
        let taper = window_kernel(order, 0.05, 4096, true).unwrap();
        let own = 2.0;
        let residual = 0.05;
        let guard = 2.0 * PI * 8.0;
        let plain_leak = kernel.spectrum_at(separation - guard).norm();
        let taper_leak = taper.spectrum_at(separation - guard).norm();
        assert!(
            taper_leak < plain_leak / 10.0,
            "taper leak {taper_leak:e} vs plain {plain_leak:e}"
        );
        let _ = interference_negligible(&taper, own, residual, separation, guard, 5.0).unwrap();
    }

    #[test]
    fn single_tone_matches_estimate_if() {
        let omega = 2.0 * PI * 60.0;
        let n = 1024;
        let noise = CovarianceModel::white(1e-4).unwrap();
        let (signal, _) = lab::generate(&[ToneSpec::tone(1.0, omega, 0.0)], n, &noise, 3).unwrap();
        let set = ToneSet::new(&[omega], 2.0 * PI).unwrap();
        let config = MultitoneConfig::new(HalfwidthMode::Fixed(0.04));
        let multi = estimate_multitone(&signal, &set, &config, &noise).unwrap();

        let mut single_cfg = IfConfig::fixed(omega, 0.04);
        single_cfg.max_center_iterations = config.max_center_iterations;
        single_cfg.center_tolerance = config.center_tolerance;
        let single = estimate_if(&signal, &single_cfg, &noise).unwrap();
        for (a, b) in multi.lines[0]
            .instantaneous_frequency
            .iter()
            .zip(&single.instantaneous_frequency)
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_noiseless_tones_recovered_after_two_iterations() {
        let n = 8192;
        let omega1 = 0.2 * PI * n as f64; // rad per unit time
        let omega2 = 0.5 * PI * n as f64;
        let noise = CovarianceModel::white(0.0).unwrap();
        let (signal, _) = lab::generate(
            &[ToneSpec::tone(1.0, omega1, 0.3), ToneSpec::tone(1.0, omega2, 1.2)],
            n,
            &noise,
            0,
        )
        .unwrap();
        let set = ToneSet::new(&[omega1, omega2], 2.0 * PI * 16.0).unwrap();
        let mut config = MultitoneConfig::new(HalfwidthMode::Fixed(0.02));
        config.outer_iterations = 2;
        config.outer_tolerance = 0.0; // force both iterations
        let est = estimate_multitone(&signal, &set, &config, &noise).unwrap();
        for (line, truth) in est.lines.iter().zip([omega1, omega2]) {
            for j in 0..n {
                if !line.edge_flags[j] {
                    assert!(
                        (line.instantaneous_frequency[j] - truth).abs() < 1e-3,
                        "line at {truth}: err {}",
                        (line.instantaneous_frequency[j] - truth).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn permutation_of_input_frequencies_is_immaterial() {
        let n = 2048;
        let omega1 = 2.0 * PI * 150.0;
        let omega2 = 2.0 * PI * 420.0;
        let noise = CovarianceModel::white(1e-4).unwrap();
        let (signal, _) = lab::generate(
            &[ToneSpec::tone(1.0, omega1, 0.0), ToneSpec::tone(0.8, omega2, 0.5)],
            n,
            &noise,
            8,
        )
        .unwrap();
        let config = MultitoneConfig::new(HalfwidthMode::Fixed(0.03));
        let set_a = ToneSet::new(&[omega1, omega2], 2.0 * PI * 10.0).unwrap();
        let set_b = ToneSet::new(&[omega2, omega1], 2.0 * PI * 10.0).unwrap();
        let a = estimate_multitone(&signal, &set_a, &config, &noise).unwrap();
        let b = estimate_multitone(&signal, &set_b, &config, &noise).unwrap();
        for (la, lb) in a.lines.iter().zip(&b.lines) {
            assert_eq!(la.instantaneous_frequency, lb.instantaneous_frequency);
        }
    }

    #[test]
    fn outer_iterations_do_not_expand_noiseless_error() {
        let n = 4096;
        let omega1 = 0.2 * PI * n as f64;
        let omega2 = 0.45 * PI * n as f64;
        let noise = CovarianceModel::white(0.0).unwrap();
        let (signal, _) = lab::generate(
            &[ToneSpec::tone(1.0, omega1, 0.0), ToneSpec::tone(1.0, omega2, 0.9)],
            n,
            &noise,
            0,
        )
        .unwrap();
        let set = ToneSet::new(&[omega1, omega2], 2.0 * PI * 16.0).unwrap();
        let mut errors = Vec::new();
        for outer in [1usize, 2, 3] {
            let mut config = MultitoneConfig::new(HalfwidthMode::Fixed(0.02));
            config.outer_iterations = outer;
            config.outer_tolerance = 0.0;
            let est = estimate_multitone(&signal, &set, &config, &noise).unwrap();
            let mut worst: f64 = 0.0;
            for (line, truth) in est.lines.iter().zip([omega1, omega2]) {
                for j in 0..n {
                    if !line.edge_flags[j] {
                        worst = worst.max((line.instantaneous_frequency[j] - truth).abs());
                    }
                }
            }
            errors.push(worst);
        }
        assert!(
            errors[1] <= errors[0] * 1.01 + 1e-12 && errors[2] <= errors[1] * 1.01 + 1e-12,
            "errors {errors:?}"
        );
    }
}
