//! A semilinear problem: propagator, nonlinearity, initial value and horizon.

use std::fmt;
use std::sync::Arc;

use crate::error::{validation, Result};
use crate::nonlinearities::{estimate_bound, estimate_lipschitz, BallSampling, Nonlinearity};
use crate::propagators::Propagator;
use crate::state::StateVector;

#[derive(Clone)]
pub struct Problem {
    pub id: String,
    pub propagator: Arc<dyn Propagator>,
    pub g: Arc<dyn Nonlinearity>,
    pub u0: StateVector,
    pub horizon: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("propagator", &self.propagator.name())
            .field("g", &self.g.name())
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// How the Lipschitz constant and the bound of `g` are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            n_samples: 400,
            seed: 0,
        }
    }
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        propagator: Arc<dyn Propagator>,
        g: Arc<dyn Nonlinearity>,
        u0: StateVector,
        horizon: f64,
    ) -> Result<Self> {
        let id = id.into();
        if u0.len() != propagator.len() {
            return validation(format!(
                "{id}: initial value has {} entries, grid has {}",
                u0.len(),
                propagator.len()
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return validation(format!("{id}: horizon must be positive, got {horizon}"));
        }
        Ok(Problem {
            id,
            propagator,
            g,
            u0,
            horizon,
        })
    }

    /// `e^{tA} u_0` at `count + 1` equispaced times, used as ball centres before any
    /// nonlinear trajectory is known.
    pub fn linear_flow_samples(&self, count: usize) -> Result<Vec<StateVector>> {
        (0..=count)
            .map(|k| {
                self.propagator
                    .apply(self.horizon * k as f64 / count as f64, &self.u0)
            })
            .collect()
    }

    pub fn sampling<'a>(
        &'a self,
        centers: &'a [StateVector],
        radius: f64,
        opts: SamplingOptions,
    ) -> BallSampling<'a> {
        BallSampling {
            norms: self.propagator.norms(),
            geometry: self.propagator.geometry(),
            centers,
            radius,
            t_range: (0.0, self.horizon),
            n_samples: opts.n_samples,
            seed: opts.seed,
        }
    }

    /// Sampled `L` on the `V`-ball of `radius` around `centers`.
    pub fn lipschitz(
        &self,
        centers: &[StateVector],
        radius: f64,
        opts: SamplingOptions,
    ) -> Result<f64> {
        estimate_lipschitz(self.g.as_ref(), &self.sampling(centers, radius, opts))
    }

    /// Sampled `max ||g||_X` on the same ball.
    pub fn g_bound(&self, centers: &[StateVector], radius: f64, opts: SamplingOptions) -> Result<f64> {
        estimate_bound(self.g.as_ref(), &self.sampling(centers, radius, opts))
    }

    /// The largest `V`-norm among `states`.
    pub fn max_v_norm(&self, states: &[StateVector]) -> f64 {
        let norms = self.propagator.norms();
        states.iter().map(|s| norms.v_norm(s)).fold(0.0, f64::max)
    }
}
