//! Grid functions and the elementary vector-space operations the steppers need.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

/// A real grid function. Its meaning (periodic grid, truncated box, stacked
/// wave pair) and its norms are fixed by the owning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        StateVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        StateVector(vec![0.0; len])
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        StateVector((0..len).map(f).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &StateVector) {
        debug_assert_eq!(self.len(), x.len());
        for (y, xi) in self.0.iter_mut().zip(x.iter()) {
            *y += a * xi;
        }
    }

    pub fn scaled(&self, a: f64) -> StateVector {
        StateVector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.len(), other.len());
        StateVector(self.0.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.len(), other.len());
        StateVector(self.0.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

/// States sampled at increasing times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl TimeSeries {
    pub fn push(&mut self, t: f64, state: StateVector) {
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// The stored state at time `t` (matched to a relative tolerance of 1e-9).
    pub fn at(&self, t: f64) -> Option<&StateVector> {
        let idx = self.times.partition_point(|&s| s < t);
        let tol = 1e-9 * (1.0 + t.abs());
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.times.len() && (self.times[i] - t).abs() <= tol)
            .map(|i| &self.states[i])
            .next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_time() {
        let mut ts = TimeSeries::default();
        for n in 0..=10 {
            ts.push(n as f64 * 0.1, StateVector::new(vec![n as f64]));
        }
        assert_eq!(ts.at(0.3).unwrap()[0], 3.0);
        assert_eq!(ts.at(1.0).unwrap()[0], 10.0);
        assert_eq!(ts.at(0.0).unwrap()[0], 0.0);
        assert!(ts.at(0.35).is_none());
    }
}
