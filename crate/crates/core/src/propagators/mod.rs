//! Linear propagators `e^{tA}` on the couple `(X, V)` and their stage convolutions.

mod diagonal;
mod heat;
mod ou;
mod wave;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use diagonal::DiagonalPropagator;
pub use heat::{HeatSpec, HeatTorus, HeatVSpace};
pub use ou::{OuProblem, OuSpec};
pub use wave::{WaveDirichlet, WaveSpec};

use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;
use crate::norms::{CoupleNorms, Geometry, WChoice};
use crate::phi::{stage_weights_diagonal, StageWeights};
use crate::state::StateVector;

/// Which convolution integral to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageTarget {
    /// `int_0^{c_i h} e^{(c_i h - tau) A} sum_j ell_j(tau) g_j dtau` (0-based `i`).
    Stage(usize),
    /// The same over `[0, h]`.
    Final,
}

impl StageTarget {
    pub fn node(&self, lag: &LagrangeData) -> f64 {
        match *self {
            StageTarget::Stage(i) => lag.nodes()[i],
            StageTarget::Final => 1.0,
        }
    }
}

/// `rho(t) = c t^{-alpha}` on `(0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProfile {
    pub c: f64,
    pub alpha: f64,
    pub t_max: f64,
}

impl SmoothingProfile {
    pub fn new(c: f64, alpha: f64, t_max: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return validation(format!("smoothing constant must be positive, got {c}"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return validation(format!(
                "smoothing exponent must lie in [0, 1) for rho to be integrable, got {alpha}"
            ));
        }
        if !(t_max > 0.0) {
            return validation(format!("profile horizon must be positive, got {t_max}"));
        }
        Ok(SmoothingProfile { c, alpha, t_max })
    }

    /// `rho = M`, the profile of `W = V`.
    pub fn constant(m: f64, t_max: f64) -> Self {
        SmoothingProfile {
            c: m,
            alpha: 0.0,
            t_max,
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.c * t.powf(-self.alpha)
    }

    /// `Omega(h) = int_0^h rho = c h^{1 - alpha} / (1 - alpha)`.
    pub fn omega(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        self.c * h.powf(1.0 - self.alpha) / (1.0 - self.alpha)
    }

    /// The `h` with `Omega(h) = value`.
    pub fn omega_inverse(&self, value: f64) -> f64 {
        (value * (1.0 - self.alpha) / self.c).powf(1.0 / (1.0 - self.alpha))
    }
}

/// The linear part of a semilinear problem.
pub trait Propagator: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn geometry(&self) -> &Geometry;

    fn len(&self) -> usize {
        self.geometry().len()
    }

    /// `e^{tA} v`; `t = 0` returns `v` unchanged.
    fn apply(&self, t: f64, v: &[f64]) -> Result<StateVector>;

    fn stage_convolve(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        target: StageTarget,
    ) -> Result<StateVector> {
        Ok(self.stage_convolve_many(h, lag, g, &[target])?.remove(0))
    }

    /// Several targets sharing the same `g` values.
    fn stage_convolve_many(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        targets: &[StageTarget],
    ) -> Result<Vec<StateVector>>;

    fn norms(&self) -> &CoupleNorms;

    /// Bound for `||e^{tA}||_{L(X, V)}`.
    fn profile_x(&self) -> SmoothingProfile;

    /// Bound for `||e^{tA}||_{L(W, V)}`.
    fn profile_w(&self) -> SmoothingProfile {
        match self.norms().w_choice {
            WChoice::X => self.profile_x(),
            WChoice::V => SmoothingProfile::constant(self.bound_m(), self.profile_x().t_max),
        }
    }

    /// `M >= sup_{t <= T} ||e^{tA}||` on `X` and on `V`.
    fn bound_m(&self) -> f64;

    /// Width of the smoothing kernel at time `t`, if the propagator has one.
    fn kernel_width(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Counters of degenerate evaluations (e.g. kernel fallbacks).
    fn diagnostics(&self) -> Vec<(String, u64)> {
        Vec::new()
    }
}

pub(crate) fn check_len(name: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return validation(format!(
            "{name}: state has {got} entries, grid expects {expected}"
        ));
    }
    Ok(())
}

pub(crate) fn check_stage_inputs(
    name: &str,
    len: usize,
    h: f64,
    lag: &LagrangeData,
    g: &[StateVector],
    targets: &[StageTarget],
) -> Result<()> {
    if !(h > 0.0) {
        return validation(format!("{name}: step size must be positive, got {h}"));
    }
    if g.len() != lag.stages() {
        return validation(format!(
            "{name}: expected {} stage values, got {}",
            lag.stages(),
            g.len()
        ));
    }
    for gj in g {
        check_len(name, len, gj.len())?;
    }
    for t in targets {
        if let StageTarget::Stage(i) = *t {
            if i >= lag.stages() {
                return validation(format!("{name}: stage index {i} out of range"));
            }
        }
    }
    Ok(())
}

type WeightKey = (u64, Vec<u64>);

/// Per-eigenvalue convolution weights, computed once per `(h, nodes)`.
#[derive(Debug)]
pub(crate) struct WeightCache {
    lambdas: Vec<Complex64>,
    tables: RwLock<HashMap<WeightKey, Arc<Vec<StageWeights>>>>,
}

const WEIGHT_CACHE_LIMIT: usize = 64;

impl WeightCache {
    pub fn new(lambdas: Vec<Complex64>) -> Self {
        WeightCache {
            lambdas,
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, h: f64, lag: &LagrangeData) -> Arc<Vec<StageWeights>> {
        let key = (h.to_bits(), lag.nodes().iter().map(|c| c.to_bits()).collect());
        if let Some(t) = self.tables.read().expect("weight cache poisoned").get(&key) {
            return t.clone();
        }
        let table: Arc<Vec<StageWeights>> = Arc::new(
            self.lambdas
                .iter()
                .map(|&l| stage_weights_diagonal(l, h, lag))
                .collect(),
        );
        let mut tables = self.tables.write().expect("weight cache poisoned");
        if tables.len() >= WEIGHT_CACHE_LIMIT {
            tables.clear();
        }
        tables.entry(key).or_insert(table).clone()
    }
}

/// The row of a weight table that belongs to `target`.
pub(crate) fn weight_row(w: &StageWeights, target: StageTarget) -> &[Complex64] {
    match target {
        StageTarget::Stage(i) => &w.stage[i],
        StageTarget::Final => &w.last,
    }
}

/// Logarithmically spaced sample times in `[lo, hi]`.
pub(crate) fn geometric_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// `q` with `1/q = 1 + 1/r - 1/p` (Young's inequality), `inf` when the sum vanishes.
pub fn young_exponent(p: f64, r: f64) -> f64 {
    let inv = 1.0 + 1.0 / r - 1.0 / p;
    if inv <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv
    }
}

/// `||g_t||_q = c t^{-alpha}` for the whole-space heat kernel
/// `g_t = (4 pi t)^{-d/2} e^{-|x|^2 / 4t}` and `1/q = 1 + 1/r - 1/p`.
pub fn heat_young_constant(dim: usize, p: f64, r: f64) -> (f64, f64) {
    let d = dim as f64;
    let alpha = 0.5 * d * (1.0 / p - 1.0 / r);
    let q = young_exponent(p, r);
    let qf = if q.is_infinite() {
        1.0
    } else {
        q.powf(-d / (2.0 * q))
    };
    ((4.0 * std::f64::consts::PI).powf(-alpha) * qf, alpha)
}
