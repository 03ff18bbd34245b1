//! Multistage plug-in halfwidth selection.
//!
//! The optimal halfwidth depends on the unknown p-th derivative, so it is
//! estimated first: a characteristic-scale ansatz `|∂_t^p g| ≈ Ā/τ^p`
//! seeds a pilot kernel of order (p, p+2), the squared pilot derivative is
//! robustified by convolution with a regular kernel, and the result is
//! plugged into the optimal-halfwidth formula pointwise before the final
//! (q, q+2) pass. Ladders: (2,4) → (0,2) for function estimation,
//! (3,5) → (1,3) for derivative estimation.

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::kernel::{self, Kernel, KernelOrder};
use crate::signal::SampledSignal;
use crate::smooth::{
    min_halfwidth, optimal_halfwidth, smooth_series, smooth_series_varying, KernelFamily,
    MAX_HALFWIDTH,
};

/// Characteristic-scale ansatz: the signal has amplitude Ā and varies on a
/// time scale τ, so `|∂_t^p g| ≈ Ā/τ^p`.
#[derive(Debug, Clone, Copy)]
pub struct ScaleAnsatz {
    pub amplitude: f64,
    pub time_scale: f64,
}

impl ScaleAnsatz {
    pub fn new(amplitude: f64, time_scale: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid_input("ansatz amplitude must be positive"));
        }
        if !(time_scale > 0.0) || !time_scale.is_finite() {
            return Err(Error::invalid_input("ansatz time scale must be positive"));
        }
        Ok(ScaleAnsatz {
            amplitude,
            time_scale,
        })
    }

    /// Default when nothing is known: sample standard deviation and a
    /// quarter of the record.
    pub fn default_for(signal: &SampledSignal) -> Self {
        let n = signal.n() as f64;
        let mean = signal.values().iter().sum::<f64>() / n;
        let var = signal
            .values()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        ScaleAnsatz {
            amplitude: var.sqrt().max(1e-12),
            time_scale: 0.25,
        }
    }

    /// The ansatz curvature `Ā/τ^p`.
    pub fn curvature(&self, p: usize) -> f64 {
        self.amplitude / self.time_scale.powi(p as i32)
    }
}

/// Halfwidth from the optimal-halfwidth formula with `Ā/τ^p` substituted
/// for the unknown p-th derivative, clipped to the admissible range.
pub fn characteristic_scale_halfwidth(
    ansatz: &ScaleAnsatz,
    order: KernelOrder,
    sigma2: f64,
    n: usize,
    m2: f64,
    c_qp: f64,
) -> f64 {
    let cov = CovarianceModel::White { sigma2 };
    optimal_halfwidth(order, &cov, ansatz.curvature(order.p()), n, m2, c_qp, 0.0).value
}

/// Pilot estimate of `∂_t^p g` with a kernel of order (p, p+2) at the given
/// halfwidth, evaluated on the sample grid.
pub fn pilot_derivative(
    signal: &SampledSignal,
    target_p: usize,
    pilot_halfwidth: f64,
) -> Result<Vec<f64>> {
    let order = KernelOrder::preferred(target_p);
    let needed = order.p() + 1;
    let available = (2.0 * pilot_halfwidth * signal.n() as f64) as usize + 1;
    if available < needed {
        return Err(Error::InsufficientData { needed, available });
    }
    let family = KernelFamily::minimal_variance(order);
    smooth_series(signal, family, pilot_halfwidth, &signal.times())
}

/// Robustified squared derivative: convolve the squared pilot with the
/// regular kernel G (unit mass, nonnegative) at halfwidth h̄, renormalizing
/// the weights inside truncated boundary windows.
///
/// The shape of G is read off its (offset, weight·Nh) samples by linear
/// interpolation, so any unit-mass (0,2) kernel works as the smoother.
pub fn robust_curvature(squared_pilot: &[f64], h_bar: f64, g: &Kernel) -> Vec<f64> {
    let n = squared_pilot.len();
    let nf = n as f64;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let t = i as f64 / nf;
        let lo = ((t - h_bar) * nf).ceil().max(0.0) as usize;
        let hi = (((t + h_bar) * nf).floor() as usize).min(n - 1);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for k in lo..=hi {
            let s = (t - k as f64 / nf) / h_bar;
            let w = shape_at(g, s).max(0.0);
            acc += w * squared_pilot[k];
            mass += w;
        }
        out[i] = if mass > 0.0 {
            acc / mass
        } else {
            squared_pilot[i]
        };
    }
    out
}

/// Linear interpolation of the kernel's continuous shape K(s) = μ(s)·Nh.
fn shape_at(g: &Kernel, s: f64) -> f64 {
    let offsets = g.offsets();
    let weights = g.weights();
    if s > offsets[0] || s < offsets[offsets.len() - 1] {
        return 0.0;
    }
    // offsets are strictly decreasing
    let mut lo = 0;
    let mut hi = offsets.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if offsets[mid] >= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s0, s1) = (offsets[lo], offsets[hi]);
    let frac = if s1 == s0 { 0.0 } else { (s - s0) / (s1 - s0) };
    (weights[lo] + (weights[hi] - weights[lo]) * frac) * g.nh()
}

/// How the squared pilot derivative is regularized before plug-in.
#[derive(Debug, Clone, Copy)]
pub enum CurvatureSmoothing {
    /// Convolution with the regular kernel G at h̄ = max plug-in halfwidth.
    RobustKernel,
    /// Simpler floor: `max(|∂̂^p g|², ε)`.
    Floor(f64),
}

/// Multistage estimation options.
#[derive(Debug, Clone, Copy)]
pub struct MultistageOptions {
    pub curvature_smoothing: CurvatureSmoothing,
    /// Median-filter the plug-in halfwidths over 5 neighbors to prevent
    /// chatter (plumbing beyond the halfwidth formula itself).
    pub median_filter: bool,
}

impl Default for MultistageOptions {
    fn default() -> Self {
        MultistageOptions {
            curvature_smoothing: CurvatureSmoothing::RobustKernel,
            median_filter: true,
        }
    }
}

/// Output of the multistage plug-in estimator.
#[derive(Debug, Clone)]
pub struct MultistageEstimate {
    /// Final estimate of ∂_t^q g on the sample grid.
    pub estimate: Vec<f64>,
    /// Pointwise plug-in halfwidths used for the final pass.
    pub halfwidths: Vec<f64>,
    /// Pilot estimate of ∂_t^p g.
    pub pilot: Vec<f64>,
    /// Halfwidth used by the pilot pass.
    pub pilot_halfwidth: f64,
    /// Halfwidth h̄ of the curvature robustifier.
    pub robust_halfwidth: f64,
}

/// Pointwise plug-in halfwidths from a squared-curvature track.
pub fn plugin_halfwidths(
    order: KernelOrder,
    covariance: &CovarianceModel,
    curvature_squared: &[f64],
    n: usize,
    m2: f64,
    c_qp: f64,
) -> Vec<f64> {
    curvature_squared
        .iter()
        .map(|&c2| optimal_halfwidth(order, covariance, c2.max(0.0).sqrt(), n, m2, c_qp, 0.0).value)
        .collect()
}

/// Two-stage plug-in kernel estimate of `∂_t^q g`, q ∈ {0, 1}:
/// characteristic-scale pilot halfwidth → pilot derivative of order
/// (q+2, q+4) → robustified squared curvature → pointwise optimal
/// halfwidths → final (q, q+2) smoothing pass.
pub fn multistage_estimate(
    signal: &SampledSignal,
    final_q: usize,
    ansatz: &ScaleAnsatz,
    noise: &CovarianceModel,
    options: &MultistageOptions,
) -> Result<MultistageEstimate> {
    if final_q > 1 {
        return Err(Error::invalid_input(
            "multistage ladders are defined for q = 0 (function) and q = 1 (derivative)",
        ));
    }
    let n = signal.n();
    let final_order = KernelOrder::preferred(final_q);
    let pilot_order = KernelOrder::preferred(final_order.p());
    let sigma2 = noise.local_level(0.0);

    let final_ref = reference_kernel(final_order)?;
    let pilot_ref = reference_kernel(pilot_order)?;

    let pilot_halfwidth = characteristic_scale_halfwidth(
        ansatz,
        pilot_order,
        sigma2,
        n,
        pilot_ref.m2(),
        pilot_ref.c_qp(),
    );
    let pilot = pilot_derivative(signal, final_order.p(), pilot_halfwidth)?;

    let squared: Vec<f64> = pilot.iter().map(|d| d * d).collect();
    let raw_halfwidths = plugin_halfwidths(
        final_order,
        noise,
        &squared,
        n,
        final_ref.m2(),
        final_ref.c_qp(),
    );
    let h_bar = raw_halfwidths.iter().cloned().fold(0.0_f64, f64::max);

    let smoothed = match options.curvature_smoothing {
        CurvatureSmoothing::RobustKernel => {
            let g = reference_kernel(KernelOrder::new(0, 2)?)?;
            robust_curvature(&squared, h_bar, &g)
        }
        CurvatureSmoothing::Floor(eps) => squared.iter().map(|&c| c.max(eps)).collect(),
    };
    let mut halfwidths = plugin_halfwidths(
        final_order,
        noise,
        &smoothed,
        n,
        final_ref.m2(),
        final_ref.c_qp(),
    );
    if options.median_filter {
        halfwidths = median_filter_5(&halfwidths);
    }
    let h_min = min_halfwidth(final_order, n).min(MAX_HALFWIDTH);
    for h in halfwidths.iter_mut() {
        *h = h.clamp(h_min, MAX_HALFWIDTH);
    }

    let estimate = smooth_series_varying(
        signal,
        KernelFamily::minimal_variance(final_order),
        &halfwidths,
        &signal.times(),
    )?;

    Ok(MultistageEstimate {
        estimate,
        halfwidths,
        pilot,
        pilot_halfwidth,
        robust_halfwidth: h_bar,
    })
}

/// Interior reference kernel on a fine grid: supplies the m₂ and C_{q,p}
/// constants entering the halfwidth formulas.
pub fn reference_kernel(order: KernelOrder) -> Result<Kernel> {
    let count = 201;
    let spacing = 2.0 / (count - 1) as f64;
    let offsets: Vec<f64> = (0..count).map(|i| 1.0 - spacing * i as f64).collect();
    kernel::minimal_variance(order, &offsets)
}

/// 5-point sliding median (window shrinks at the ends).
pub fn median_filter_5(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(2);
        let hi = (i + 2).min(n - 1);
        let mut window: Vec<f64> = values[lo..=hi].to_vec();
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(window[window.len() / 2]);
    }
    out
}
