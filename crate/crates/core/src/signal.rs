//! Uniformly sampled real signals on the normalized time grid t_j = j/N.

use crate::error::{Error, Result};

/// A real signal sampled at t_j = j/N, j = 0..N−1, so that N is the number
/// of samples per unit of normalized time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    values: Vec<f64>,
}

impl SampledSignal {
    /// Wrap sample values; at least two finite samples are required.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid_input("signal needs at least 2 samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("signal contains non-finite samples"));
        }
        Ok(SampledSignal { values })
    }

    /// Sample a closure on the grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..n).map(|j| f(j as f64 / n as f64)).collect();
        SampledSignal::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time of the j-th sample.
    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.values.len() as f64
    }

    /// All sample times.
    pub fn times(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.time(j)).collect()
    }
}
