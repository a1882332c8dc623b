//! Nonlinearities `g(t, u)`, sampled Lipschitz constants on balls, and the strip monitor.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, Error, Result};
use crate::norms::{CoupleNorms, Geometry};
use crate::spectral::PeriodicFft;
use crate::state::{StateVector, TimeSeries};

/// Safety factor applied to sampled Lipschitz constants and bounds.
pub const SAFETY_FACTOR: f64 = 1.5;

pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, t: f64, v: &[f64]) -> StateVector;

    /// `true` when `g` vanishes identically, which lets callers short-circuit.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNonlinearity;

impl Nonlinearity for ZeroNonlinearity {
    fn name(&self) -> &str {
        "zero"
    }

    fn eval(&self, _t: f64, v: &[f64]) -> StateVector {
        StateVector::zeros(v.len())
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `coeff |u|^{alpha - 1} u` pointwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerNonlinearity {
    pub alpha: f64,
    pub coeff: f64,
}

impl PowerNonlinearity {
    pub fn new(alpha: f64, coeff: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) || !coeff.is_finite() {
            return validation(format!("power nonlinearity needs alpha > 1, got {alpha}"));
        }
        Ok(PowerNonlinearity { alpha, coeff })
    }

    pub fn scalar(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        self.coeff * u.abs().powf(self.alpha - 1.0) * u
    }

    /// The same map on a complex value.
    pub fn complex(&self, u: Complex64) -> Complex64 {
        if u == Complex64::new(0.0, 0.0) {
            return u;
        }
        u * (self.coeff * u.norm().powf(self.alpha - 1.0))
    }

    /// `alpha |coeff| R^{alpha - 1}`, the Lipschitz constant on the sup-norm ball of radius `R`.
    pub fn sup_ball_lipschitz(&self, radius: f64) -> f64 {
        self.alpha * self.coeff.abs() * radius.powf(self.alpha - 1.0)
    }
}

impl Nonlinearity for PowerNonlinearity {
    fn name(&self) -> &str {
        "power"
    }

    fn eval(&self, _t: f64, v: &[f64]) -> StateVector {
        StateVector::from_fn(v.len(), |i| self.scalar(v[i]))
    }
}

/// `coeff * u u_x` on the 1D periodic grid with a spectral derivative.
#[derive(Debug, Clone)]
pub struct AdvectionNonlinearity {
    pub coeff: f64,
    fft: PeriodicFft,
}

impl AdvectionNonlinearity {
    pub fn new(n: usize, coeff: f64) -> Self {
        AdvectionNonlinearity {
            coeff,
            fft: PeriodicFft::new(n, 1),
        }
    }

    /// Hölder: `||u u' - w w'||_p <= (||u||_{W^{1,r}} + ||w||_s) ||u - w||_{L^s ∩ W^{1,r}}`,
    /// so `2 |coeff| R` bounds the Lipschitz constant on a ball of norms at most `R`.
    pub fn holder_lipschitz(&self, radius: f64) -> f64 {
        2.0 * self.coeff.abs() * radius
    }
}

impl Nonlinearity for AdvectionNonlinearity {
    fn name(&self) -> &str {
        "advection"
    }

    fn eval(&self, _t: f64, v: &[f64]) -> StateVector {
        let d = self.fft.derivative(v, 0);
        StateVector::from_fn(v.len(), |i| self.coeff * v[i] * d[i])
    }
}

/// `(w, v) -> (0, -alpha_w w^3)` for the stacked wave state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCubic {
    pub alpha_w: f64,
}

impl WaveCubic {
    /// On `(0, pi)`, `||w||_inf^2 <= (pi/4) ||w'||_2^2` and `||w||_2 <= ||w'||_2`, hence
    /// `||a^3 - b^3||_2 <= 3 (pi/4) R^2 ||a' - b'||_2` on the energy ball of radius `R`.
    pub fn energy_ball_lipschitz(&self, radius: f64) -> f64 {
        3.0 * self.alpha_w.abs() * std::f64::consts::FRAC_PI_4 * radius * radius
    }
}

impl Nonlinearity for WaveCubic {
    fn name(&self) -> &str {
        "wave-cubic"
    }

    fn eval(&self, _t: f64, v: &[f64]) -> StateVector {
        let n = v.len() / 2;
        StateVector::from_fn(v.len(), |i| {
            if i < n {
                0.0
            } else {
                -self.alpha_w * v[i - n].powi(3)
            }
        })
    }

    fn is_zero(&self) -> bool {
        self.alpha_w == 0.0
    }
}

/// `g(v) = factor * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    pub factor: f64,
}

impl Nonlinearity for LinearMap {
    fn name(&self) -> &str {
        "linear"
    }

    fn eval(&self, _t: f64, v: &[f64]) -> StateVector {
        StateVector::from_fn(v.len(), |i| self.factor * v[i])
    }

    fn is_zero(&self) -> bool {
        self.factor == 0.0
    }
}

type PointFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// `g(t, v)_i = f(t, v_i)` for an arbitrary scalar function.
#[derive(Clone)]
pub struct Pointwise {
    name: String,
    f: Arc<PointFn>,
}

impl Pointwise {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Pointwise {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Pointwise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pointwise").field("name", &self.name).finish()
    }
}

impl Nonlinearity for Pointwise {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, t: f64, v: &[f64]) -> StateVector {
        StateVector::from_fn(v.len(), |i| (self.f)(t, v[i]))
    }
}

/// Where and how densely to sample a ball.
#[derive(Debug, Clone)]
pub struct BallSampling<'a> {
    pub norms: &'a CoupleNorms,
    pub geometry: &'a Geometry,
    /// Ball centres; samples cycle through them.
    pub centers: &'a [StateVector],
    pub radius: f64,
    pub t_range: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
}

fn random_direction(rng: &mut ChaCha8Rng, geometry: &Geometry, len: usize) -> Vec<f64> {
    match rng.gen_range(0..4) {
        0 => (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        1 => vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }; len],
        _ => {
            // A few low trigonometric modes in each coordinate.
            let terms: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(1..5) as f64,
                        rng.gen_range(0..4) as f64,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            (0..len)
                .map(|i| {
                    let x = geometry.point(i);
                    terms
                        .iter()
                        .map(|&(a, kx, ky, ph)| a * (kx * x[0] + ky * x[1] + ph).sin())
                        .sum()
                })
                .collect()
        }
    }
}

/// A point `center + d` with `||d||_V = rho`.
fn point_at(center: &StateVector, dir: &[f64], v_norm: f64, rho: f64) -> StateVector {
    let scale = if v_norm > 0.0 { rho / v_norm } else { 0.0 };
    StateVector::from_fn(center.len(), |i| center[i] + scale * dir[i])
}

/// Sampled pairs `(v, w)` in the `V`-ball together with a time.
fn sample_pairs(
    spec: &BallSampling<'_>,
) -> Result<Vec<(f64, StateVector, StateVector)>> {
    if spec.n_samples < 100 {
        return validation(format!("need at least 100 samples, got {}", spec.n_samples));
    }
    if spec.centers.is_empty() {
        return validation("need at least one ball centre");
    }
    if !(spec.radius > 0.0) {
        return validation(format!("ball radius must be positive, got {}", spec.radius));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = spec.centers[0].len();
    let rho = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            spec.radius
        } else {
            spec.radius * rng.gen_range(0.0..1.0)
        }
    };
    let mut out = Vec::with_capacity(spec.n_samples);
    for k in 0..spec.n_samples {
        let center = &spec.centers[k % spec.centers.len()];
        let (t0, t1) = spec.t_range;
        let t = if t1 > t0 { rng.gen_range(t0..=t1) } else { t0 };
        let d1 = random_direction(&mut rng, spec.geometry, len);
        let n1 = spec.norms.v_norm(&d1);
        let r1 = rho(&mut rng);
        let v = point_at(center, &d1, n1, r1);
        let w = if rng.gen_bool(0.5) {
            let d2 = random_direction(&mut rng, spec.geometry, len);
            let n2 = spec.norms.v_norm(&d2);
            let r2 = rho(&mut rng);
            point_at(center, &d2, n2, r2)
        } else {
            // A close pair probes the derivative; shrink towards the centre to stay inside.
            let d2 = random_direction(&mut rng, spec.geometry, len);
            let n2 = spec.norms.v_norm(&d2);
            let eps = 1e-3 * spec.radius;
            let pulled = point_at(center, &d1, n1, (r1 - eps).max(0.0));
            StateVector::from_fn(len, |i| {
                pulled[i] + if n2 > 0.0 { eps / n2 * d2[i] } else { 0.0 }
            })
        };
        out.push((t, v, w));
    }
    Ok(out)
}

/// Largest sampled ratio `||g(t,v) - g(t,w)||_X / ||v - w||_V` (before the safety factor).
pub fn sampled_lipschitz_ratio(g: &dyn Nonlinearity, spec: &BallSampling<'_>) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for (t, v, w) in sample_pairs(spec)? {
        let dv = spec.norms.v_norm(&v.sub(&w));
        if dv == 0.0 {
            continue;
        }
        let dg = spec.norms.x_norm(&g.eval(t, &v).sub(&g.eval(t, &w)));
        best = best.max(dg / dv);
    }
    Ok(best)
}

/// The sampled Lipschitz constant of `g` on the `V`-ball, inflated by [`SAFETY_FACTOR`].
pub fn estimate_lipschitz(g: &dyn Nonlinearity, spec: &BallSampling<'_>) -> Result<f64> {
    Ok(SAFETY_FACTOR * sampled_lipschitz_ratio(g, spec)?)
}

/// Sampled `sup ||g(t, v)||_X` over the ball, inflated by [`SAFETY_FACTOR`].
pub fn estimate_bound(g: &dyn Nonlinearity, spec: &BallSampling<'_>) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for (t, v, _) in sample_pairs(spec)? {
        best = best.max(spec.norms.x_norm(&g.eval(t, &v)));
    }
    for c in spec.centers {
        best = best.max(spec.norms.x_norm(&g.eval(spec.t_range.0, c)));
    }
    Ok(SAFETY_FACTOR * best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripEvent {
    pub step: usize,
    pub t: f64,
    pub distance: f64,
}

/// Tracks `||u_n - u(t_n)||_V <= r` against a reference trajectory.
#[derive(Debug, Clone)]
pub struct StripMonitor {
    pub radius: f64,
    reference: TimeSeries,
    pub violations: Vec<StripEvent>,
    pub max_distance: f64,
    pub checks: usize,
}

impl StripMonitor {
    pub fn new(radius: f64, reference: TimeSeries) -> Result<Self> {
        if !(radius > 0.0) {
            return validation(format!("strip radius must be positive, got {radius}"));
        }
        Ok(StripMonitor {
            radius,
            reference,
            violations: Vec::new(),
            max_distance: 0.0,
            checks: 0,
        })
    }

    pub fn reference(&self) -> &TimeSeries {
        &self.reference
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Records the distance at `(step, t)`; a violation is logged and returned as an error.
    pub fn check(
        &mut self,
        step: usize,
        t: f64,
        state: &[f64],
        norms: &CoupleNorms,
    ) -> Result<f64> {
        let Some(reference) = self.reference.at(t) else {
            return validation(format!("strip monitor has no reference state at t = {t}"));
        };
        let distance = norms.v_norm(&StateVector::new(state.to_vec()).sub(reference));
        self.checks += 1;
        self.max_distance = self.max_distance.max(distance);
        if !(distance <= self.radius) {
            self.violations.push(StripEvent { step, t, distance });
            return Err(Error::StripViolation {
                step,
                t,
                distance,
                radius: self.radius,
            });
        }
        Ok(distance)
    }
}
