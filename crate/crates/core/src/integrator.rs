//! The `s`-stage exponential Runge-Kutta collocation method.
//!
//! Internal stages solve
//! `U_i = e^{c_i h A} u_n + int_0^{c_i h} e^{(c_i h - tau) A} sum_j ell_j(tau) g(t_n + c_j h, U_j) dtau`
//! by plain fixed-point iteration, and
//! `u_{n+1} = e^{hA} u_n + int_0^h e^{(h - tau) A} sum_j ell_j(tau) g(t_n + c_j h, U_j) dtau`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::lagrange::{build_lagrange, LagrangeData, NodeSet};
use crate::nonlinearities::{Nonlinearity, StripMonitor};
use crate::propagators::{Propagator, SmoothingProfile, StageTarget};
use crate::state::{StateVector, TimeSeries};

/// Node set plus its Lagrange data.
#[derive(Debug, Clone)]
pub struct Scheme {
    lag: LagrangeData,
}

impl Scheme {
    pub fn new(nodes: NodeSet) -> Self {
        Scheme {
            lag: build_lagrange(&nodes),
        }
    }

    /// Equispaced nodes (`c = 0.5` for `s = 1`).
    pub fn equispaced(s: usize) -> Result<Self> {
        Ok(Scheme::new(NodeSet::equispaced(s)?))
    }

    /// `s = 1`, `c_1 = 0`: the exponential Euler method.
    pub fn exponential_euler() -> Self {
        Scheme::new(NodeSet::new(vec![0.0]).expect("valid node"))
    }

    pub fn lag(&self) -> &LagrangeData {
        &self.lag
    }

    pub fn stages(&self) -> usize {
        self.lag.stages()
    }

    pub fn nodes(&self) -> &[f64] {
        self.lag.nodes()
    }
}

/// Quantities that decide whether a step may be attempted and when the stage solve stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepGuards {
    pub lipschitz: f64,
    pub c_ell: f64,
    pub omega: SmoothingProfile,
    pub m_bound: f64,
    /// Fixed stage-solve tolerance; see [`StepGuards::tolerance`] when absent.
    pub fp_tol: Option<f64>,
    pub fp_max_iter: usize,
}

pub const DEFAULT_MAX_ITER: usize = 100;

impl StepGuards {
    pub fn new(propagator: &dyn Propagator, scheme: &Scheme, lipschitz: f64) -> Self {
        StepGuards {
            lipschitz,
            c_ell: scheme.lag().c_ell(),
            omega: propagator.profile_x(),
            m_bound: propagator.bound_m(),
            fp_tol: None,
            fp_max_iter: DEFAULT_MAX_ITER,
        }
    }

    /// `kappa(h) = Omega(h) C_ell s L`.
    pub fn kappa(&self, h: f64, s: usize) -> f64 {
        self.omega.omega(h) * self.c_ell * s as f64 * self.lipschitz
    }

    pub fn check(&self, h: f64, s: usize) -> Result<f64> {
        let kappa = self.kappa(h, s);
        if kappa >= 1.0 || !kappa.is_finite() {
            return Err(Error::Contraction {
                h,
                kappa,
                omega: self.omega.omega(h),
                c_ell: self.c_ell,
                s,
                lipschitz: self.lipschitz,
            });
        }
        Ok(kappa)
    }

    /// `min(1e-12, h^{s+1})`, floored at a few ulps of the iterate size `scale`
    /// since smaller increments are not observable in double precision.
    pub fn tolerance(&self, h: f64, s: usize, scale: f64) -> f64 {
        self.fp_tol.unwrap_or_else(|| {
            1e-12_f64
                .min(h.powi(s as i32 + 1))
                .max(64.0 * f64::EPSILON * scale)
        })
    }
}

/// Result of one internal-stage solve.
#[derive(Debug, Clone)]
pub struct StageSolve {
    pub stages: Vec<StateVector>,
    pub iterations: usize,
    pub increments: Vec<f64>,
    /// Ratios of successive increments, where both are above rounding level.
    pub ratios: Vec<f64>,
    pub kappa: f64,
    pub tolerance: f64,
    /// `kappa / (1 - kappa)` times the last increment.
    pub residual_bound: f64,
}

impl StageSolve {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Store every `stride`-th state (the final state is always stored).
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepStats {
    pub n: usize,
    pub t: f64,
    pub iterations: usize,
    pub max_ratio: f64,
    pub residual_bound: f64,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StripStatus {
    pub radius: f64,
    pub max_distance: f64,
    pub violations: usize,
}

/// Everything a run produced, including partial results of an aborted run.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub h: f64,
    pub kappa: f64,
    pub series: TimeSeries,
    pub steps: Vec<StepStats>,
    pub terminal: StateVector,
    pub strip: Option<StripStatus>,
    /// Step index at which the run aborted, with the reason.
    pub failure: Option<(usize, Error)>,
}

impl TrajectoryRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<TrajectoryRecord> {
        match &self.failure {
            Some((_, e)) => Err(e.clone()),
            None => Ok(self),
        }
    }

    pub fn max_ratio(&self) -> f64 {
        self.steps.iter().map(|s| s.max_ratio).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

/// A scheme bound to a problem.
pub struct ExpRk<'a> {
    pub scheme: &'a Scheme,
    pub propagator: &'a dyn Propagator,
    pub g: &'a dyn Nonlinearity,
    pub guards: StepGuards,
}

impl<'a> ExpRk<'a> {
    pub fn new(
        scheme: &'a Scheme,
        propagator: &'a dyn Propagator,
        g: &'a dyn Nonlinearity,
        guards: StepGuards,
    ) -> Self {
        ExpRk {
            scheme,
            propagator,
            g,
            guards,
        }
    }

    fn stage_targets(&self) -> Vec<StageTarget> {
        (0..self.scheme.stages()).map(StageTarget::Stage).collect()
    }

    fn g_values(&self, t_n: f64, h: f64, xs: &[StateVector]) -> Vec<StateVector> {
        self.scheme
            .nodes()
            .iter()
            .zip(xs)
            .map(|(c, x)| self.g.eval(t_n + c * h, x))
            .collect()
    }

    pub fn internal_stages(&self, u_n: &StateVector, t_n: f64, h: f64) -> Result<StageSolve> {
        let s = self.scheme.stages();
        if !(h > 0.0) {
            return validation(format!("step size must be positive, got {h}"));
        }
        if !u_n.is_finite() {
            return validation("stage solve started from a non-finite state");
        }
        let kappa = if self.g.is_zero() {
            0.0
        } else {
            self.guards.check(h, s)?
        };
        let norms = self.propagator.norms();
        let lag = self.scheme.lag();
        let lin: Vec<StateVector> = self
            .scheme
            .nodes()
            .iter()
            .map(|c| self.propagator.apply(c * h, u_n))
            .collect::<Result<_>>()?;
        let scale = lin.iter().map(|x| norms.v_norm(x)).fold(0.0, f64::max);
        let tol = self.guards.tolerance(h, s, scale);
        let floor = 1e3 * f64::EPSILON * scale;
        let targets = self.stage_targets();

        let mut x = lin.clone();
        let mut increments = Vec::new();
        let mut ratios = Vec::new();
        for it in 1..=self.guards.fp_max_iter {
            let conv = self
                .propagator
                .stage_convolve_many(h, lag, &self.g_values(t_n, h, &x), &targets)?;
            let next: Vec<StateVector> = lin.iter().zip(&conv).map(|(l, c)| l.add(c)).collect();
            let inc = next
                .iter()
                .zip(&x)
                .map(|(a, b)| norms.v_norm(&a.sub(b)))
                .fold(0.0, f64::max);
            if !inc.is_finite() {
                return Err(Error::Divergence {
                    iterations: it,
                    last_increment: inc,
                    tolerance: tol,
                });
            }
            if let Some(&prev) = increments.last() {
                if prev >= floor && inc >= floor {
                    ratios.push(inc / prev);
                }
            }
            increments.push(inc);
            x = next;
            if inc <= tol {
                return Ok(StageSolve {
                    stages: x,
                    iterations: it,
                    residual_bound: if kappa > 0.0 { kappa / (1.0 - kappa) * inc } else { 0.0 },
                    increments,
                    ratios,
                    kappa,
                    tolerance: tol,
                });
            }
        }
        Err(Error::Divergence {
            iterations: self.guards.fp_max_iter,
            last_increment: increments.last().copied().unwrap_or(f64::NAN),
            tolerance: tol,
        })
    }

    pub fn step(&self, u_n: &StateVector, t_n: f64, h: f64) -> Result<(StateVector, StageSolve)> {
        let solve = self.internal_stages(u_n, t_n, h)?;
        let mut next = self.propagator.apply(h, u_n)?;
        if !self.g.is_zero() {
            let conv = self.propagator.stage_convolve(
                h,
                self.scheme.lag(),
                &self.g_values(t_n, h, &solve.stages),
                StageTarget::Final,
            )?;
            next.axpy(1.0, &conv);
        }
        if !next.is_finite() {
            return Err(Error::Divergence {
                iterations: solve.iterations,
                last_increment: f64::NAN,
                tolerance: solve.tolerance,
            });
        }
        Ok((next, solve))
    }

    /// `n_steps` steps of size `t_end / n_steps` from `u0` at `t = 0`.
    pub fn run(
        &self,
        u0: &StateVector,
        t_end: f64,
        n_steps: usize,
        opts: &RunOptions,
        mut monitor: Option<&mut StripMonitor>,
    ) -> TrajectoryRecord {
        let h = if n_steps == 0 { 0.0 } else { t_end / n_steps as f64 };
        let mut series = TimeSeries::default();
        series.push(0.0, u0.clone());
        let mut record = TrajectoryRecord {
            h,
            kappa: if self.g.is_zero() {
                0.0
            } else {
                self.guards.kappa(h, self.scheme.stages())
            },
            series,
            steps: Vec::with_capacity(n_steps),
            terminal: u0.clone(),
            strip: None,
            failure: None,
        };
        let norms = self.propagator.norms();
        let stride = opts.record_stride.max(1);
        let finish = |record: &mut TrajectoryRecord, monitor: &Option<&mut StripMonitor>| {
            if let Some(m) = monitor {
                record.strip = Some(StripStatus {
                    radius: m.radius,
                    max_distance: m.max_distance,
                    violations: m.violations.len(),
                });
            }
        };
        if let Some(m) = monitor.as_deref_mut() {
            if let Err(e) = m.check(0, 0.0, u0, norms) {
                record.failure = Some((0, e));
                finish(&mut record, &monitor);
                return record;
            }
        }
        let mut u = u0.clone();
        for n in 0..n_steps {
            let t_n = n as f64 * h;
            let started = Instant::now();
            let (next, solve) = match self.step(&u, t_n, h) {
                Ok(v) => v,
                Err(e) => {
                    record.failure = Some((n, e));
                    break;
                }
            };
            let t_next = (n + 1) as f64 * h;
            record.steps.push(StepStats {
                n: n + 1,
                t: t_next,
                iterations: solve.iterations,
                max_ratio: solve.max_ratio(),
                residual_bound: solve.residual_bound,
                seconds: started.elapsed().as_secs_f64(),
            });
            u = next;
            if (n + 1) % stride == 0 || n + 1 == n_steps {
                record.series.push(t_next, u.clone());
            }
            record.terminal = u.clone();
            if let Some(m) = monitor.as_deref_mut() {
                if let Err(e) = m.check(n + 1, t_next, &u, norms) {
                    record.failure = Some((n + 1, e));
                    break;
                }
            }
        }
        finish(&mut record, &monitor);
        record
    }
}
