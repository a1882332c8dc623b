use std::sync::Arc;

use num_complex::Complex64;

use super::{
    check_len, check_stage_inputs, weight_row, Propagator, SmoothingProfile, StageTarget,
    WeightCache,
};
use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;
use crate::norms::{AbsNorm, CoupleNorms, Geometry, WChoice};
use crate::state::StateVector;

/// `A = diag(lambda_1, ..., lambda_n)` with real, non-positive eigenvalues, measured in the
/// max-norm on both sides of the couple. Used for scalar and small ODE systems.
#[derive(Debug)]
pub struct DiagonalPropagator {
    name: String,
    lambdas: Vec<f64>,
    geometry: Geometry,
    cache: WeightCache,
    norms: CoupleNorms,
    t_max: f64,
}

impl DiagonalPropagator {
    pub fn new(lambdas: Vec<f64>, t_max: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return validation("diagonal propagator needs at least one eigenvalue");
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l <= 0.0)) {
            return validation("diagonal eigenvalues must be finite and non-positive");
        }
        let norm = Arc::new(AbsNorm);
        Ok(DiagonalPropagator {
            name: "diagonal".to_string(),
            geometry: Geometry::Points { n: lambdas.len() },
            cache: WeightCache::new(lambdas.iter().map(|&l| Complex64::new(l, 0.0)).collect()),
            lambdas,
            norms: CoupleNorms::new(norm.clone(), norm, WChoice::V),
            t_max,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

impl Propagator for DiagonalPropagator {
    fn name(&self) -> &str {
        &self.name
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn apply(&self, t: f64, v: &[f64]) -> Result<StateVector> {
        check_len(&self.name, self.lambdas.len(), v.len())?;
        if t == 0.0 {
            return Ok(StateVector::new(v.to_vec()));
        }
        Ok(StateVector::from_fn(v.len(), |i| (t * self.lambdas[i]).exp() * v[i]))
    }

    fn stage_convolve_many(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        targets: &[StageTarget],
    ) -> Result<Vec<StateVector>> {
        check_stage_inputs(&self.name, self.len(), h, lag, g, targets)?;
        let table = self.cache.get(h, lag);
        Ok(targets
            .iter()
            .map(|&target| {
                StateVector::from_fn(self.len(), |m| {
                    weight_row(&table[m], target)
                        .iter()
                        .zip(g)
                        .map(|(w, gj)| w.re * gj[m])
                        .sum()
                })
            })
            .collect())
    }

    fn norms(&self) -> &CoupleNorms {
        &self.norms
    }

    fn profile_x(&self) -> SmoothingProfile {
        SmoothingProfile::constant(1.0, self.t_max)
    }

    fn bound_m(&self) -> f64 {
        1.0
    }
}
