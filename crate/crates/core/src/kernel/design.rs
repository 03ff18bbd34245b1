//! Kernel shape design by constrained quadratic minimization.
//!
//! The generic engine minimizes `μᵀ R̄ μ` over weight vectors subject to
//! linear constraints `Cᵀ μ = b` through the Lagrange-multiplier solution
//!
//! ```text
//!     μ = R̄⁻¹ C (Cᵀ R̄⁻¹ C)⁻¹ b
//! ```
//!
//! with redundant constraints removed by a singular value decomposition
//! and a hard refusal when the constraint system condition exceeds
//! [`CONDITION_LIMIT`].
//!
//! The named design paths all produce kernels from the smooth window
//! family: weights that are a polynomial of degree ≤ p in the offset and
//! vanish where the window reaches a full halfwidth. On symmetric windows
//! this family reproduces the limiting shapes γ[P_q − P_{q+2}] (¾(1−s²)
//! for (0,2), (15/4)(s−s³) for (1,3)); on truncated windows it yields the
//! matching edge kernels. The minimal-loss variant applies the rank-one
//! covariance update `R̄ = R + |∂_t^p g|² s⁽ᵖ⁾s⁽ᵖ⁾ᵀ` to the same family.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::kernel::{factorial, Kernel, KernelOrder};

/// Designs whose constraint system condition exceeds this are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative singular-value threshold below which a constraint direction is
/// treated as redundant (and checked for consistency instead).
const RANK_TOLERANCE: f64 = 1e-13;

/// Allowed inconsistency in redundant constraint directions.
const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// A constrained quadratic design problem: minimize `μᵀ gram μ` subject to
/// `constraintsᵀ μ = target`. Columns of `constraints` are the constraint
/// vectors (moment vectors s⁽⁰⁾…s⁽ᵖ⁻¹⁾ in the standard setup).
#[derive(Debug, Clone)]
pub struct DesignProblem {
    gram: DMatrix<f64>,
    constraints: DMatrix<f64>,
    target: DVector<f64>,
}

/// Solution of a [`DesignProblem`].
#[derive(Debug, Clone)]
pub struct DesignSolution {
    /// Minimizing weight vector.
    pub weights: DVector<f64>,
    /// Attained quadratic form value `μᵀ R̄ μ` (the minimal loss).
    pub minimal_loss: f64,
    /// Condition number of the reduced constraint system.
    pub condition: f64,
}

impl DesignProblem {
    pub fn new(
        gram: DMatrix<f64>,
        constraints: DMatrix<f64>,
        target: DVector<f64>,
    ) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::invalid_input("gram matrix must be square"));
        }
        if constraints.nrows() != gram.nrows() {
            return Err(Error::invalid_input(
                "constraint rows must match gram dimension",
            ));
        }
        if constraints.ncols() != target.len() {
            return Err(Error::invalid_input(
                "one target entry required per constraint",
            ));
        }
        Ok(DesignProblem {
            gram,
            constraints,
            target,
        })
    }

    /// Solve by the Lagrange-multiplier formula after removing redundant
    /// constraint directions.
    pub fn solve(&self) -> Result<DesignSolution> {
        let chol = Cholesky::new(self.gram.clone()).ok_or_else(|| Error::InvalidCovariance {
            reason: "design gram matrix is not positive definite".into(),
        })?;

        let svd = self.constraints.clone().svd(true, true);
        let u = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v");
        let sigma = &svd.singular_values;
        let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
        if sigma_max == 0.0 {
            return Err(Error::infeasible("constraint matrix is zero"));
        }

        // Coordinates of the target in the right singular basis; anything
        // outside that basis (or aligned with a null direction) must vanish
        // for the system to be consistent.
        let coords = v_t * &self.target;
        let norm_target = self.target.norm();
        let outside = (&self.target - v_t.transpose() * &coords).norm();
        if outside > FEASIBILITY_TOLERANCE * (1.0 + norm_target) {
            return Err(Error::infeasible(
                "constraint target outside the range of the constraint matrix",
            ));
        }

        let mut kept = Vec::new();
        for i in 0..sigma.len() {
            if sigma[i] > sigma_max * RANK_TOLERANCE {
                kept.push(i);
            } else if coords[i].abs() > FEASIBILITY_TOLERANCE * (1.0 + norm_target) {
                return Err(Error::infeasible(
                    "inconsistent (redundant) constraint directions",
                ));
            }
        }
        let sigma_min = kept
            .iter()
            .map(|&i| sigma[i])
            .fold(f64::INFINITY, f64::min);
        let condition = sigma_max / sigma_min;
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                condition,
                limit: CONDITION_LIMIT,
            });
        }

        // Reduced orthonormal constraints: u_iᵀ μ = coords_i / σ_i.
        let n = self.gram.nrows();
        let r = kept.len();
        let mut u_kept = DMatrix::zeros(n, r);
        let mut rhs = DVector::zeros(r);
        for (col, &i) in kept.iter().enumerate() {
            u_kept.set_column(col, &u.column(i));
            rhs[col] = coords[i] / sigma[i];
        }

        let x = chol.solve(&u_kept); // R̄⁻¹ Ũ
        let g = u_kept.transpose() * &x;
        let g_chol = Cholesky::new(g.clone()).ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
        let alpha = g_chol.solve(&rhs);
        let weights = &x * &alpha;
        let minimal_loss = rhs.dot(&alpha);

        Ok(DesignSolution {
            weights,
            minimal_loss,
            condition,
        })
    }
}

/// Minimal-variance kernel of the smooth window family on the given offsets.
///
/// Offsets are `s_j = (t − t_j)/h`, at most 1 in magnitude; they are sorted
/// into sample order internally. Ends that reach a full halfwidth
/// (|s| ≈ 1) carry a vanishing-weight condition, which on symmetric windows
/// pins the limiting shapes of the preferred kernels exactly.
pub fn minimal_variance(order: KernelOrder, offsets: &[f64]) -> Result<Kernel> {
    let offsets = validate_offsets(order, offsets)?;
    let identity = DMatrix::identity(offsets.len(), offsets.len());
    let (weights, _) = class_solve(order, &offsets, &identity)?;
    finish_kernel(weights, offsets, order, 1.0)
}

/// Minimal-loss kernel: minimal-variance problem with the rank-one update
/// `R̄ = R + curvature² s⁽ᵖ⁾ s⁽ᵖ⁾ᵀ`, where R is the covariance restricted
/// to the window taps and `curvature = |∂_t^p g|`.
pub fn minimal_loss(
    order: KernelOrder,
    offsets: &[f64],
    covariance: &CovarianceModel,
    curvature: f64,
) -> Result<Kernel> {
    if !(curvature >= 0.0) || !curvature.is_finite() {
        return Err(Error::invalid_input("curvature must be nonnegative"));
    }
    let offsets = validate_offsets(order, offsets)?;
    let nh = grid_density(&offsets);
    let positions: Vec<f64> = offsets.iter().map(|s| -s * nh).collect();
    let mut gram = covariance.design_matrix(&positions)?;
    let p = order.p() as i32;
    for i in 0..offsets.len() {
        for j in 0..offsets.len() {
            gram[(i, j)] += curvature * curvature * offsets[i].powi(p) * offsets[j].powi(p);
        }
    }
    let (weights, _) = class_solve(order, &offsets, &gram)?;
    finish_kernel(weights, offsets, order, 1.0)
}

/// Value of the Legendre polynomial P_n at x, by recurrence.
pub fn legendre_polynomial(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p_prev = 1.0;
            let mut p = x;
            for k in 1..n {
                let next = ((2 * k + 1) as f64 * x * p - k as f64 * p_prev) / (k + 1) as f64;
                p_prev = p;
                p = next;
            }
            p
        }
    }
}

/// Closed-form limiting kernel γ[P_q(s) − P_{q+2}(s)] sampled on a uniform
/// grid and then projected (minimum-norm correction) onto the exact discrete
/// moment conditions. Requires p = q + 2.
pub fn legendre(order: KernelOrder, halfwidth: f64, grid_count: usize) -> Result<Kernel> {
    let (q, p) = (order.q(), order.p());
    if p != q + 2 {
        return Err(Error::UnsupportedOrder {
            q,
            p,
            reason: "closed-form limiting kernels exist for p = q + 2".into(),
        });
    }
    if grid_count < p + 1 {
        return Err(Error::infeasible(format!(
            "grid count {grid_count} below p + 1 = {}",
            p + 1
        )));
    }
    let gamma: f64 = (1..=q + 1).map(|k| (q + k) as f64 / 2.0).product();
    let spacing = 2.0 / (grid_count - 1) as f64;
    let offsets: Vec<f64> = (0..grid_count).map(|i| 1.0 - spacing * i as f64).collect();
    let mut weights: Vec<f64> = offsets
        .iter()
        .map(|&s| gamma * (legendre_polynomial(q, s) - legendre_polynomial(q + 2, s)) * spacing)
        .collect();

    // Minimum-norm correction onto Σ μ s^m = q! δ_{m,q}.
    let s_mat = moment_matrix(&offsets, p);
    let mu = DVector::from_column_slice(&weights);
    let mut residual = DVector::zeros(p);
    for m in 0..p {
        let tgt = if m == q { factorial(q) } else { 0.0 };
        residual[m] = tgt - s_mat.column(m).dot(&mu);
    }
    let gram = s_mat.transpose() * &s_mat;
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::infeasible("moment system rank deficient in projection")
    })?;
    let coeff = chol.solve(&residual);
    let correction = &s_mat * coeff;
    for (w, d) in weights.iter_mut().zip(correction.iter()) {
        *w += d;
    }

    finish_kernel(weights, offsets, order, halfwidth)
}

/// Edge kernel for estimation at `t` with the window truncated to [0, 1]:
/// the minimal-variance design on the truncated offset set. At interior
/// points this reduces to the interior kernel.
pub fn boundary(
    order: KernelOrder,
    estimation_point: f64,
    halfwidth: f64,
    n_samples: usize,
) -> Result<Kernel> {
    if !(0.0..=1.0).contains(&estimation_point) {
        return Err(Error::invalid_input("estimation point must lie in [0, 1]"));
    }
    if !(halfwidth > 0.0) || !halfwidth.is_finite() {
        return Err(Error::invalid_input("halfwidth must be positive"));
    }
    let n = n_samples as f64;
    let lo = ((estimation_point - halfwidth) * n - 1e-9).ceil().max(0.0) as usize;
    let hi = (((estimation_point + halfwidth) * n + 1e-9).floor() as usize).min(n_samples - 1);
    if hi < lo || hi - lo < order.p() {
        return Err(Error::infeasible(format!(
            "truncated window holds {} samples, {} needed",
            hi.saturating_sub(lo) + 1,
            order.p() + 1
        )));
    }
    let offsets: Vec<f64> = (lo..=hi)
        .map(|j| (estimation_point - j as f64 / n) / halfwidth)
        .collect();
    let kernel = minimal_variance(order, &offsets)?;
    kernel.with_halfwidth(halfwidth)
}

/// The k-th sinusoidal taper of length n:
/// `v^{(k)}_m = √(2/(n+1)) sin(πkm/(n+1))`, m = 1..n.
pub fn sine_taper(k: usize, n: usize) -> Vec<f64> {
    let norm = (2.0 / (n + 1) as f64).sqrt();
    (1..=n)
        .map(|m| norm * (std::f64::consts::PI * k as f64 * m as f64 / (n + 1) as f64).sin())
        .collect()
}

/// Low-sidelobe kernel built from the first p+1 sinusoidal tapers on its
/// natural symmetric grid (virtual zeros at s = ±1).
pub fn sine_taper_kernel(order: KernelOrder, n_taps: usize) -> Result<Kernel> {
    let offsets: Vec<f64> = (1..=n_taps)
        .map(|m| (n_taps as f64 + 1.0 - 2.0 * m as f64) / (n_taps as f64 + 1.0))
        .collect();
    sine_taper_on_offsets(order, &offsets)
}

/// Taper-combination kernel on explicit window offsets. The combination
/// solves the p moment conditions plus a vanishing condition at the first
/// tap; the last tap then vanishes by the parity structure of the tapers,
/// which is verified and reported as a design failure if violated.
pub fn sine_taper_on_offsets(order: KernelOrder, offsets: &[f64]) -> Result<Kernel> {
    let offsets = validate_offsets(order, offsets)?;
    let n = offsets.len();
    let (q, p) = (order.q(), order.p());
    if n < p + 2 {
        return Err(Error::infeasible(format!(
            "taper kernel needs at least p + 2 = {} taps, got {n}",
            p + 2
        )));
    }
    let tapers: Vec<Vec<f64>> = (1..=p + 1).map(|k| sine_taper(k, n)).collect();

    // (p+1) × (p+1) combination system: p moment rows + first-tap row.
    let mut m = DMatrix::zeros(p + 1, p + 1);
    let mut rhs = DVector::zeros(p + 1);
    for (col, taper) in tapers.iter().enumerate() {
        for row in 0..p {
            m[(row, col)] = taper
                .iter()
                .zip(&offsets)
                .map(|(v, s)| v * s.powi(row as i32))
                .sum();
        }
        m[(p, col)] = taper[0];
    }
    rhs[q] = factorial(q);

    let lu = m.lu();
    let coeff = lu
        .solve(&rhs)
        .ok_or_else(|| Error::infeasible("singular taper combination system"))?;

    let mut weights = vec![0.0; n];
    for (c, taper) in coeff.iter().zip(&tapers) {
        for (w, v) in weights.iter_mut().zip(taper) {
            *w += c * v;
        }
    }

    let peak = weights.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
    if weights[n - 1].abs() > 1e-8 * peak + 1e-14 {
        return Err(Error::infeasible(
            "taper kernel does not vanish at both support ends",
        ));
    }
    finish_kernel(weights, offsets, order, 1.0)
}

// ---------------------------------------------------------------------------
// shared machinery
// ---------------------------------------------------------------------------

/// Sort offsets into sample order (descending s), checking distinctness and
/// the |s| ≤ 1 support bound.
fn validate_offsets(order: KernelOrder, offsets: &[f64]) -> Result<Vec<f64>> {
    if offsets.len() < order.p() + 1 {
        return Err(Error::infeasible(format!(
            "{} offsets given, at least p + 1 = {} required",
            offsets.len(),
            order.p() + 1
        )));
    }
    if offsets.iter().any(|s| !s.is_finite() || s.abs() > 1.0 + 1e-9) {
        return Err(Error::invalid_input("offsets must be finite and lie in [−1, 1]"));
    }
    let mut sorted = offsets.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::infeasible("offsets must be distinct"));
        }
    }
    Ok(sorted)
}

/// Samples per unit offset, Nh, from the mean grid spacing.
fn grid_density(offsets: &[f64]) -> f64 {
    let span = offsets[0] - offsets[offsets.len() - 1];
    (offsets.len() - 1) as f64 / span
}

fn moment_matrix(offsets: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(offsets.len(), p, |j, m| offsets[j].powi(m as i32))
}

fn vandermonde(offsets: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(offsets.len(), degree + 1, |j, c| offsets[j].powi(c as i32))
}

/// Tap indices that sit a full halfwidth from the estimation point
/// (within half a grid spacing); the design pins the weight to zero there.
fn full_end_indices(offsets: &[f64]) -> Vec<usize> {
    let spacing = (offsets[0] - offsets[offsets.len() - 1]) / (offsets.len() - 1) as f64;
    let mut ends = Vec::new();
    if offsets[0] >= 1.0 - 0.5 * spacing {
        ends.push(0);
    }
    if offsets[offsets.len() - 1] <= -1.0 + 0.5 * spacing {
        ends.push(offsets.len() - 1);
    }
    ends
}

/// Solve the smooth-window design: weights polynomial of degree ≤ p in the
/// offset, moment conditions (2.3), vanishing at full-halfwidth ends,
/// minimizing the tap-space quadratic form `μᵀ gram μ`.
fn class_solve(
    order: KernelOrder,
    offsets: &[f64],
    tap_gram: &DMatrix<f64>,
) -> Result<(Vec<f64>, f64)> {
    let (q, p) = (order.q(), order.p());
    let v = vandermonde(offsets, p);
    let gram_c = v.transpose() * tap_gram * &v;

    let ends = full_end_indices(offsets);
    let n_constraints = p + ends.len();
    let mut constraints = DMatrix::zeros(p + 1, n_constraints);
    let mut target = DVector::zeros(n_constraints);
    let s_mat = moment_matrix(offsets, p);
    for m in 0..p {
        let col = v.transpose() * s_mat.column(m);
        constraints.set_column(m, &col);
        if m == q {
            target[m] = factorial(q);
        }
    }
    for (extra, &idx) in ends.iter().enumerate() {
        constraints.set_column(p + extra, &v.row(idx).transpose());
    }

    let solution = DesignProblem::new(gram_c, constraints, target)?.solve()?;
    let mu = &v * &solution.weights;
    Ok((mu.iter().cloned().collect(), solution.minimal_loss))
}

/// Build the kernel and verify the moment conditions actually hold.
fn finish_kernel(
    weights: Vec<f64>,
    offsets: Vec<f64>,
    order: KernelOrder,
    halfwidth: f64,
) -> Result<Kernel> {
    let nh = grid_density(&offsets);
    let kernel = Kernel::from_parts(weights, offsets, order, halfwidth, nh)?;
    let residual = kernel.moment_residual();
    if residual > 1e-9 {
        return Err(Error::infeasible(format!(
            "designed weights violate moment conditions (residual {residual:.3e})"
        )));
    }
    Ok(kernel)
}
