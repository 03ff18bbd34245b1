//! Discrete smoothing kernels of order (q,p) and their moment calculus.
//!
//! A kernel here is a finite weight sequence `μ_j` attached to offsets
//! `s_j = (t − t_j)/h`, where `t` is the estimation point, `t_j` the sample
//! times, and `h` the halfwidth in normalized time. A kernel of order (q,p)
//! estimates the q-th derivative and satisfies the moment conditions
//!
//! ```text
//!     Σ_j μ_j s_j^m = q! δ_{m,q},   m = 0, …, p−1
//! ```
//!
//! The p-th moment defines the bias constant `C_{q,p}` through
//! `Σ_j μ_j s_j^p = p! C_{q,p}`, and the variance functional is
//! `m₂ = ‖μ‖² · Nh`, which converges to `∫K(s)² ds` on refining grids.
//!
//! Weights are stored in sample order (ascending `t_j`), so offsets are
//! strictly decreasing. With the `(t − t_j)/h` sign convention a (1,3)
//! kernel carries positive weights at `t_j < t`; the estimator in
//! [`crate::smooth`] applies the parity factor `(−1)^q` so that the
//! estimate targets `+∂_t^q g`.

mod design;

pub use design::{
    boundary, legendre, legendre_polynomial, minimal_loss, minimal_variance, sine_taper,
    sine_taper_kernel, sine_taper_on_offsets, DesignProblem, CONDITION_LIMIT,
};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kernel order (q,p): the kernel estimates the q-th derivative and its
/// moments vanish up to order p−1 (except the q-th).
///
/// `p − q` even is the preferred configuration (the default family uses
/// `p = q + 2`); constructions reject orders they cannot realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelOrder {
    q: usize,
    p: usize,
}

impl KernelOrder {
    /// Create an order with `0 ≤ q < p`.
    pub fn new(q: usize, p: usize) -> Result<Self> {
        if q >= p {
            return Err(Error::UnsupportedOrder {
                q,
                p,
                reason: "requires q < p".into(),
            });
        }
        Ok(KernelOrder { q, p })
    }

    /// Derivative order estimated.
    pub fn q(&self) -> usize {
        self.q
    }

    /// First unconstrained moment.
    pub fn p(&self) -> usize {
        self.p
    }

    /// The preferred order (q, q+2) for estimating the q-th derivative.
    pub fn preferred(q: usize) -> Self {
        KernelOrder { q, p: q + 2 }
    }
}

impl core::fmt::Display for KernelOrder {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({},{})", self.q, self.p)
    }
}

/// A discrete kernel: weights with their offsets, order, halfwidth, and
/// cached moment functionals.
#[derive(Debug, Clone)]
pub struct Kernel {
    weights: Vec<f64>,
    offsets: Vec<f64>,
    order: KernelOrder,
    halfwidth: f64,
    /// Grid density across the halfwidth, `Nh` (samples per unit `s`).
    nh: f64,
    c_qp: f64,
    m2: f64,
}

impl Kernel {
    /// Assemble a kernel from raw parts. Weights must already satisfy the
    /// moment conditions for the claimed order; this constructor caches
    /// `C_{q,p}` and `m₂` but does not re-derive the weights.
    pub fn from_parts(
        weights: Vec<f64>,
        offsets: Vec<f64>,
        order: KernelOrder,
        halfwidth: f64,
        nh: f64,
    ) -> Result<Self> {
        if weights.len() != offsets.len() {
            return Err(Error::invalid_input("weights/offsets length mismatch"));
        }
        if weights.is_empty() {
            return Err(Error::invalid_input("empty kernel"));
        }
        if !(halfwidth > 0.0) || !halfwidth.is_finite() {
            return Err(Error::invalid_input("halfwidth must be positive and finite"));
        }
        if !(nh > 0.0) || !nh.is_finite() {
            return Err(Error::invalid_input("grid density Nh must be positive"));
        }
        if weights.iter().chain(offsets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite kernel entries"));
        }
        let mut kernel = Kernel {
            weights,
            offsets,
            order,
            halfwidth,
            nh,
            c_qp: 0.0,
            m2: 0.0,
        };
        kernel.c_qp = kernel.moment(order.p()) / factorial(order.p());
        kernel.m2 = kernel.weights.iter().map(|w| w * w).sum::<f64>() * nh;
        Ok(kernel)
    }

    /// Kernel weights `μ_j`, in sample order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Offsets `s_j = (t − t_j)/h`, strictly decreasing.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn order(&self) -> KernelOrder {
        self.order
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    /// Grid density `Nh`: number of sample spacings per halfwidth.
    pub fn nh(&self) -> f64 {
        self.nh
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Re-key the kernel to a new halfwidth. Weights and offsets are
    /// dimensionless and unchanged; only the time scale metadata moves.
    pub fn with_halfwidth(mut self, halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0) || !halfwidth.is_finite() {
            return Err(Error::invalid_input("halfwidth must be positive and finite"));
        }
        self.halfwidth = halfwidth;
        Ok(self)
    }

    /// The m-th discrete moment `Σ_j μ_j s_j^m`.
    ///
    /// For `m < p` this equals `q! δ_{m,q}` by construction; for `m = p`
    /// it equals `p! C_{q,p}`.
    pub fn moment(&self, m: usize) -> f64 {
        self.weights
            .iter()
            .zip(&self.offsets)
            .map(|(w, s)| w * s.powi(m as i32))
            .sum()
    }

    /// Bias constant `C_{q,p}` = (p-th moment)/p!.
    pub fn c_qp(&self) -> f64 {
        self.c_qp
    }

    /// Variance functional `m₂ = ‖μ‖² · Nh`; limits to `∫K²` on fine grids.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Frequency response `U(ω) = Σ_j μ_j e^{−iω(t−t_j)}` with ω in radians
    /// per unit normalized time. `U(0)` equals the zeroth moment
    /// (1 for q = 0, 0 otherwise).
    pub fn spectrum(&self, frequencies: &[f64]) -> Vec<Complex64> {
        frequencies
            .iter()
            .map(|&omega| self.spectrum_at(omega))
            .collect()
    }

    /// Single-frequency response, ω in radians per unit normalized time.
    pub fn spectrum_at(&self, omega: f64) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.offsets)
            .map(|(&w, &s)| Complex64::from_polar(w, -omega * s * self.halfwidth))
            .sum()
    }

    /// Frequency response with ω in radians per sample (tap positions are
    /// `s_j · Nh` sample units from the estimation point).
    pub fn spectrum_at_per_sample(&self, omega: f64) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.offsets)
            .map(|(&w, &s)| Complex64::from_polar(w, -omega * s * self.nh))
            .sum()
    }

    /// Largest violation of the moment conditions `Σ μ s^m = q! δ_{m,q}`,
    /// m = 0..p−1.
    pub fn moment_residual(&self) -> f64 {
        let q = self.order.q();
        (0..self.order.p())
            .map(|m| {
                let target = if m == q { factorial(q) } else { 0.0 };
                (self.moment(m) - target).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_rejects_q_ge_p() {
        assert!(KernelOrder::new(2, 2).is_err());
        assert!(KernelOrder::new(3, 1).is_err());
        assert!(KernelOrder::new(0, 2).is_ok());
    }

    #[test]
    fn single_point_kernel_m2_is_nh() {
        let order = KernelOrder::new(0, 1).unwrap();
        let k = Kernel::from_parts(vec![1.0], vec![0.0], order, 0.1, 25.0).unwrap();
        assert_eq!(k.m2(), 25.0);
    }

    #[test]
    fn factorial_values() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(1), 1.0);
        assert_eq!(factorial(5), 120.0);
    }
}
