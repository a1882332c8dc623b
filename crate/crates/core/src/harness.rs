//! Reference solutions, convergence studies and smoothing measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{validation, Error, Result};
use crate::gronwall::{
    apriori_error_bound, choose_h0, strip_condition, AprioriConstants, AprioriInputs,
};
use crate::integrator::{ExpRk, RunOptions, Scheme, StepGuards, TrajectoryRecord, DEFAULT_MAX_ITER};
use crate::nonlinearities::StripMonitor;
use crate::norms::{Geometry, WChoice};
use crate::problem::{Problem, SamplingOptions};
use crate::propagators::{geometric_times, Propagator};
use crate::state::{StateVector, TimeSeries};

/// Stage count of the scheme used for reference trajectories.
pub const REFERENCE_STAGES: usize = 4;

/// Order of `||u_n - u(t_n)||_V`: `s` for `W = V`, `s - alpha` for `W = X`.
pub fn order_prediction(s: usize, alpha: f64, w: WChoice) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return validation(format!(
            "smoothing exponent must lie in [0, 1), got {alpha}"
        ));
    }
    if s == 0 {
        return validation("stage count must be positive");
    }
    Ok(match w {
        WChoice::V => s as f64,
        WChoice::X => s as f64 - alpha,
    })
}

/// A high-resolution stand-in for the exact mild solution.
#[derive(Debug, Clone)]
pub struct Reference {
    pub h_ref: f64,
    pub series: TimeSeries,
    /// `V`-distance between the terminal states at `h_ref` and `h_ref / 2`.
    pub self_diff: f64,
    pub exact_linear: bool,
    pub lipschitz: f64,
}

impl Reference {
    /// The self-consistency contract: refining once more moves the terminal state by less
    /// than 1% of the smallest error it is used to measure.
    pub fn accept(&self, min_error: f64) -> Result<()> {
        let limit = (1e-2 * min_error).max(1e-13);
        if self.exact_linear || self.self_diff < limit {
            Ok(())
        } else {
            Err(Error::Reference(format!(
                "refinement h_ref -> h_ref/2 changed the terminal state by {:e}, limit {:e}",
                self.self_diff, limit
            )))
        }
    }

    pub fn terminal(&self) -> &StateVector {
        self.series.last().expect("reference holds at least the initial state")
    }
}

fn steps_for(horizon: f64, h: f64) -> Result<usize> {
    let n = (horizon / h).round();
    if n < 1.0 || ((n * h - horizon).abs() > 1e-9 * horizon) {
        return validation(format!("step size {h} does not divide the horizon {horizon}"));
    }
    Ok(n as usize)
}

/// Sampled `L` on the `V`-ball around `e^{tA} u_0` whose radius is half the flow's largest
/// `V`-norm; returns `(L, radius)`.
pub fn linear_flow_lipschitz(problem: &Problem, sampling: SamplingOptions) -> Result<(f64, f64)> {
    let centers = problem.linear_flow_samples(8)?;
    let radius = match 0.5 * problem.max_v_norm(&centers) {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    Ok((problem.lipschitz(&centers, radius, sampling)?, radius))
}

/// Runs the `s = 4` equispaced scheme at `h_ref`, storing every `stride`-th state, and
/// repeats the run at `h_ref / 2` for the self-consistency check.
///
/// Linear problems short-circuit to `e^{tA} u_0`. The Lipschitz constant guarding the
/// reference run is sampled around the linear flow with radius half its largest `V`-norm.
pub fn reference_solution(
    problem: &Problem,
    h_ref: f64,
    stride: usize,
    sampling: SamplingOptions,
) -> Result<Reference> {
    let n_ref = steps_for(problem.horizon, h_ref)?;
    let stride = stride.max(1);
    let prop = problem.propagator.as_ref();
    if problem.g.is_zero() {
        let mut series = TimeSeries::default();
        for n in (0..=n_ref).step_by(stride) {
            let t = n as f64 * h_ref;
            series.push(t, prop.apply(t, &problem.u0)?);
        }
        if n_ref % stride != 0 {
            series.push(problem.horizon, prop.apply(problem.horizon, &problem.u0)?);
        }
        return Ok(Reference {
            h_ref,
            series,
            self_diff: 0.0,
            exact_linear: true,
            lipschitz: 0.0,
        });
    }
    let (lipschitz, _) = linear_flow_lipschitz(problem, sampling)?;
    let scheme = Scheme::equispaced(REFERENCE_STAGES)?;
    let guards = StepGuards::new(prop, &scheme, lipschitz);
    let rk = ExpRk::new(&scheme, prop, problem.g.as_ref(), guards);
    let run = rk
        .run(
            &problem.u0,
            problem.horizon,
            n_ref,
            &RunOptions {
                record_stride: stride,
            },
            None,
        )
        .into_result()
        .map_err(|e| Error::Reference(format!("reference run at h = {h_ref:e} failed: {e}")))?;
    let fine = rk
        .run(
            &problem.u0,
            problem.horizon,
            2 * n_ref,
            &RunOptions {
                record_stride: 2 * n_ref,
            },
            None,
        )
        .into_result()
        .map_err(|e| Error::Reference(format!("refined reference run failed: {e}")))?;
    let norms = prop.norms();
    Ok(Reference {
        h_ref,
        self_diff: norms.v_norm(&run.terminal.sub(&fine.terminal)),
        series: run.series,
        exact_linear: false,
        lipschitz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub steps: usize,
    pub record_stride: usize,
    pub sampling: SamplingOptions,
    pub fp_max_iter: usize,
    /// Monitors the strip of this fraction of the reference's largest `V`-norm, against a
    /// reference at `h / 64`.
    pub strip_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub id: String,
    pub problem: String,
    pub nonlinearity: String,
    pub nodes: Vec<f64>,
    pub horizon: f64,
    pub h: f64,
    pub steps: usize,
    pub seed: u64,
    pub lipschitz: f64,
    pub lipschitz_radius: f64,
    pub c_ell: f64,
    pub omega_h: f64,
    pub kappa: f64,
    pub iterations: usize,
    pub max_ratio: f64,
    pub terminal_v_norm: f64,
    /// `||u_N - e^{TA} u_0||_V` when `g = 0`.
    pub linear_error: Option<f64>,
    pub strip_radius: Option<f64>,
    pub strip_max_distance: Option<f64>,
    pub completed_steps: usize,
    pub status: String,
    #[serde(skip)]
    pub failure: Option<Error>,
}

/// One trajectory with guards derived from a Lipschitz estimate along the linear flow.
pub fn single_run(
    problem: &Problem,
    scheme: &Scheme,
    settings: &RunSettings,
) -> Result<(TrajectoryRecord, RunSummary)> {
    if settings.steps == 0 {
        return validation("a run needs at least one step");
    }
    let prop = problem.propagator.as_ref();
    let (lipschitz, radius) = if problem.g.is_zero() {
        (0.0, 0.0)
    } else {
        linear_flow_lipschitz(problem, settings.sampling)?
    };
    let mut guards = StepGuards::new(prop, scheme, lipschitz);
    guards.fp_max_iter = settings.fp_max_iter;
    let rk = ExpRk::new(scheme, prop, problem.g.as_ref(), guards);
    let h = problem.horizon / settings.steps as f64;
    let mut monitor = match settings.strip_fraction {
        Some(fraction) => {
            let reference = reference_solution(problem, h / 64.0, 64, settings.sampling)?;
            let radius = match fraction * problem.max_v_norm(&reference.series.states) {
                r if r > 0.0 => r,
                _ => fraction,
            };
            Some(StripMonitor::new(radius, reference.series)?)
        }
        None => None,
    };
    let record = rk.run(
        &problem.u0,
        problem.horizon,
        settings.steps,
        &RunOptions {
            record_stride: settings.record_stride,
        },
        monitor.as_mut(),
    );
    let norms = prop.norms();
    let linear_error = if problem.g.is_zero() && record.is_ok() {
        let exact = prop.apply(problem.horizon, &problem.u0)?;
        Some(norms.v_norm(&record.terminal.sub(&exact)))
    } else {
        None
    };
    let failure = record.failure.as_ref().map(|(_, e)| e.clone());
    let summary = RunSummary {
        id: problem.id.clone(),
        problem: prop.name().to_string(),
        nonlinearity: problem.g.name().to_string(),
        nodes: scheme.nodes().to_vec(),
        horizon: problem.horizon,
        h,
        steps: settings.steps,
        seed: settings.sampling.seed,
        lipschitz,
        lipschitz_radius: radius,
        c_ell: guards.c_ell,
        omega_h: guards.omega.omega(h),
        kappa: record.kappa,
        iterations: record.total_iterations(),
        max_ratio: record.max_ratio(),
        terminal_v_norm: norms.v_norm(&record.terminal),
        linear_error,
        strip_radius: monitor.as_ref().map(|m| m.radius),
        strip_max_distance: monitor.as_ref().map(|m| m.max_distance),
        completed_steps: record.steps.len(),
        status: match &record.failure {
            None => "ok".to_string(),
            Some((step, e)) => format!("aborted at step {step}: {e}"),
        },
        failure,
    };
    Ok((record, summary))
}

/// `||f^{(s)}||_{L^1([0,T], W)}` for `f(t) = g(t, u(t))` sampled at uniform spacing `dt`:
/// `s`-fold second-order finite differences, then the trapezoid rule.
pub fn derivative_l1_norm(
    problem: &Problem,
    series: &TimeSeries,
    order: usize,
) -> Result<f64> {
    let m = series.len();
    if m < order + 2 {
        return validation("too few reference samples for the derivative of f");
    }
    let dt = series.times[1] - series.times[0];
    let uniform = series
        .times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1e-300));
    if !uniform {
        return validation("reference samples are not uniformly spaced");
    }
    let mut f: Vec<StateVector> = series
        .times
        .iter()
        .zip(&series.states)
        .map(|(&t, u)| problem.g.eval(t, u))
        .collect();
    for _ in 0..order {
        f = gradient(&f, dt);
    }
    let norms = problem.propagator.norms();
    let vals: Vec<f64> = f.iter().map(|v| norms.w_norm(v)).collect();
    let inner: f64 = vals[1..m - 1].iter().sum();
    Ok(dt * (inner + 0.5 * (vals[0] + vals[m - 1])))
}

/// Central differences inside, second-order one-sided differences at the ends.
fn gradient(f: &[StateVector], dt: f64) -> Vec<StateVector> {
    let m = f.len();
    let len = f[0].len();
    (0..m)
        .map(|k| {
            StateVector::from_fn(len, |i| {
                if k == 0 {
                    (-3.0 * f[0][i] + 4.0 * f[1][i] - f[2][i]) / (2.0 * dt)
                } else if k == m - 1 {
                    (3.0 * f[m - 1][i] - 4.0 * f[m - 2][i] + f[m - 3][i]) / (2.0 * dt)
                } else {
                    (f[k + 1][i] - f[k - 1][i]) / (2.0 * dt)
                }
            })
        })
        .collect()
}

/// Cross-check of the declared smoothing exponent before a `W = X` study.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingCheck {
    pub p: f64,
    pub r: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyPlan {
    pub id: String,
    pub problem: Problem,
    pub scheme: Scheme,
    /// Step counts from coarse to fine, each twice the previous.
    pub steps: Vec<usize>,
    /// `h_ref = h_min / reference_factor`; at least 64 and a multiple of 8.
    pub reference_factor: usize,
    /// Accepted range of the median EOC; `predicted +- 0.3` when absent.
    pub order_window: Option<(f64, f64)>,
    pub require_monotone: bool,
    /// Strip radius as a fraction of the reference's largest `V`-norm.
    pub strip_fraction: f64,
    pub sampling: SamplingOptions,
    pub fp_max_iter: usize,
    pub smoothing_check: Option<SmoothingCheck>,
    pub jobs: Option<usize>,
}

impl StudyPlan {
    pub fn new(id: impl Into<String>, problem: Problem, scheme: Scheme, steps: Vec<usize>) -> Self {
        StudyPlan {
            id: id.into(),
            problem,
            scheme,
            steps,
            reference_factor: 64,
            order_window: None,
            require_monotone: true,
            strip_fraction: 0.25,
            sampling: SamplingOptions::default(),
            fp_max_iter: DEFAULT_MAX_ITER,
            smoothing_check: None,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return validation("a study needs at least one step size");
        }
        if self.steps[0] == 0 {
            return validation("step counts must be positive");
        }
        if self.steps.windows(2).any(|w| w[1] != 2 * w[0]) {
            return validation(format!(
                "step counts must double from one level to the next, got {:?}",
                self.steps
            ));
        }
        if self.reference_factor < 64 || self.reference_factor % 8 != 0 {
            return validation(format!(
                "reference factor must be a multiple of 8 and at least 64, got {}",
                self.reference_factor
            ));
        }
        if !(self.strip_fraction > 0.0) {
            return validation("strip fraction must be positive");
        }
        Ok(())
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|&n| self.problem.horizon / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub h: f64,
    pub n: usize,
    /// Terminal `V`-norm error.
    pub error: f64,
    pub max_error: f64,
    pub eoc: Option<f64>,
    pub bound: f64,
    pub kappa: f64,
    pub iterations: usize,
    pub max_ratio: f64,
    /// Left side of the step-size condition; compare with `strip_radius`.
    pub threshold_lhs: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSummary {
    pub h_ref: f64,
    pub stages: usize,
    pub self_diff: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub id: String,
    pub problem: String,
    pub nonlinearity: String,
    pub nodes: Vec<f64>,
    pub horizon: f64,
    pub w_choice: WChoice,
    pub alpha: f64,
    pub predicted_order: f64,
    pub median_eoc: Option<f64>,
    pub order_window: (f64, f64),
    pub lipschitz: f64,
    pub strip_radius: f64,
    pub g_bound: f64,
    pub f_norm: f64,
    pub constants: Option<AprioriConstants>,
    pub reference: Option<ReferenceSummary>,
    pub smoothing_alpha: Option<f64>,
    pub rows: Vec<StudyRow>,
    pub exact_linear: bool,
    pub passed: bool,
    pub reasons: Vec<String>,
    #[serde(skip)]
    pub first_error: Option<Error>,
}

impl ConvergenceReport {
    fn failed(plan: &StudyPlan, alpha: f64, predicted: f64, window: (f64, f64), err: Error) -> Self {
        ConvergenceReport {
            id: plan.id.clone(),
            problem: plan.problem.id.clone(),
            nonlinearity: plan.problem.g.name().to_string(),
            nodes: plan.scheme.nodes().to_vec(),
            horizon: plan.problem.horizon,
            w_choice: plan.problem.propagator.norms().w_choice,
            alpha,
            predicted_order: predicted,
            median_eoc: None,
            order_window: window,
            lipschitz: f64::NAN,
            strip_radius: f64::NAN,
            g_bound: f64::NAN,
            f_norm: f64::NAN,
            constants: None,
            reference: None,
            smoothing_alpha: None,
            rows: Vec::new(),
            exact_linear: false,
            passed: false,
            reasons: vec![err.to_string()],
            first_error: Some(err),
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc).collect()
    }

    /// `h,N,error,EOC,bound` plus the secondary columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "h,N,error,EOC,bound,max_error,kappa,iterations,max_ratio,threshold_lhs,status\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:e},{},{:e},{},{:e},{:e},{:e},{},{:e},{:e},{}\n",
                r.h,
                r.n,
                r.error,
                r.eoc.map(|e| format!("{e:.6}")).unwrap_or_default(),
                r.bound,
                r.max_error,
                r.kappa,
                r.iterations,
                r.max_ratio,
                r.threshold_lhs,
                r.status
            ));
        }
        out
    }
}

/// Median of the last three entries (fewer if unavailable).
pub fn median_of_finest(eocs: &[f64]) -> Option<f64> {
    if eocs.is_empty() {
        return None;
    }
    let mut tail: Vec<f64> = eocs[eocs.len().saturating_sub(3)..].to_vec();
    tail.sort_by(|a, b| a.total_cmp(b));
    let m = tail.len();
    Some(if m % 2 == 1 {
        tail[m / 2]
    } else {
        0.5 * (tail[m / 2 - 1] + tail[m / 2])
    })
}

struct Cell {
    record: TrajectoryRecord,
    max_error: f64,
}

fn run_cell(
    plan: &StudyPlan,
    n: usize,
    guards: StepGuards,
    reference: &Reference,
    radius: f64,
) -> Cell {
    let problem = &plan.problem;
    let rk = ExpRk::new(&plan.scheme, problem.propagator.as_ref(), problem.g.as_ref(), guards);
    let mut monitor = StripMonitor::new(radius, reference.series.clone())
        .expect("strip radius validated by the caller");
    let record = rk.run(
        &problem.u0,
        problem.horizon,
        n,
        &RunOptions { record_stride: n },
        Some(&mut monitor),
    );
    Cell {
        record,
        max_error: monitor.max_distance,
    }
}

/// Sweeps the plan's step sizes against a reference and assembles the report.
pub fn convergence_study(plan: &StudyPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let problem = &plan.problem;
    let prop = problem.propagator.as_ref();
    let s = plan.scheme.stages();
    let profile_x = prop.profile_x();
    let w_choice = prop.norms().w_choice;
    let alpha = profile_x.alpha;
    let predicted = order_prediction(s, alpha, w_choice)?;
    let window = plan
        .order_window
        .unwrap_or((predicted - 0.3, predicted + 0.3));

    let mut smoothing_alpha = None;
    if let Some(check) = &plan.smoothing_check {
        let rep = measure_smoothing(prop, check.p, check.r, &check.times, plan.sampling.seed)?;
        let fitted = rep.fitted_alpha.ok_or_else(|| {
            Error::Validation("smoothing cross-check has fewer than two resolved times".into())
        })?;
        smoothing_alpha = Some(fitted);
        if (fitted - alpha).abs() > 0.1 {
            let err = Error::Validation(format!(
                "declared smoothing exponent {alpha} disagrees with the measured {fitted:.4}"
            ));
            let mut rep = ConvergenceReport::failed(plan, alpha, predicted, window, err);
            rep.smoothing_alpha = smoothing_alpha;
            return Ok(rep);
        }
    }

    let hs = plan.step_sizes();
    let n_max = *plan.steps.last().expect("validated");
    let h_min = problem.horizon / n_max as f64;
    let h_ref = h_min / plan.reference_factor as f64;
    let reference = match reference_solution(problem, h_ref, plan.reference_factor / 8, plan.sampling) {
        Ok(r) => r,
        Err(e) => return Ok(ConvergenceReport::failed(plan, alpha, predicted, window, e)),
    };

    let ref_states: Vec<StateVector> = {
        let coarse = problem.horizon / plan.steps[0] as f64;
        let count = plan.steps[0].min(16);
        (0..=count)
            .filter_map(|k| reference.series.at(coarse * (k * plan.steps[0] / count) as f64))
            .cloned()
            .collect()
    };
    let radius = match plan.strip_fraction * problem.max_v_norm(&reference.series.states) {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    let lipschitz = problem.lipschitz(&ref_states, radius, plan.sampling)?;
    let g_bound = problem.g_bound(&ref_states, radius, plan.sampling)?;
    let f_norm = if problem.g.is_zero() {
        0.0
    } else {
        derivative_l1_norm(problem, &reference.series, s)?
    };

    let mut guards = StepGuards::new(prop, &plan.scheme, lipschitz);
    guards.fp_max_iter = plan.fp_max_iter;
    let h0 = choose_h0(&profile_x, guards.c_ell, s, lipschitz, &hs);
    let profile_w = prop.profile_w();

    let cells: Vec<Cell> = {
        let work = || -> Vec<Cell> {
            plan.steps
                .par_iter()
                .map(|&n| run_cell(plan, n, guards, &reference, radius))
                .collect()
        };
        match plan.jobs {
            Some(j) => rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
                .install(work),
            None => work(),
        }
    };

    let u_ref_t = reference.terminal();
    let norms = prop.norms();
    let mut reasons = Vec::new();
    let mut first_error = None;
    let mut rows = Vec::with_capacity(cells.len());
    let mut constants = None;
    for (k, (cell, &h)) in cells.iter().zip(&hs).enumerate() {
        let consts = AprioriConstants::assemble(&AprioriInputs {
            m: prop.bound_m(),
            c_ell: guards.c_ell,
            lipschitz,
            nodes: plan.scheme.nodes(),
            profile_x: &profile_x,
            profile_w: &profile_w,
            horizon: problem.horizon,
            h,
            h0,
        });
        let bound = apriori_error_bound(&consts, h, f_norm);
        let threshold_lhs = strip_condition(&consts, f_norm, g_bound);
        if k + 1 == cells.len() {
            constants = Some(consts);
        }
        let (error, status) = match &cell.record.failure {
            Some((step, e)) => {
                reasons.push(format!("h = {h:e}: aborted at step {step}: {e}"));
                if first_error.is_none() {
                    first_error = Some(e.clone());
                }
                (f64::NAN, format!("aborted: {e}"))
            }
            None => (
                norms.v_norm(&cell.record.terminal.sub(u_ref_t)),
                "ok".to_string(),
            ),
        };
        rows.push(StudyRow {
            h,
            n: plan.steps[k],
            error,
            max_error: cell.max_error,
            eoc: None,
            bound,
            kappa: cell.record.kappa,
            iterations: cell.record.total_iterations(),
            max_ratio: cell.record.max_ratio(),
            threshold_lhs,
            status,
        });
    }
    for k in 1..rows.len() {
        let (a, b) = (rows[k - 1].error, rows[k].error);
        if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
            rows[k].eoc = Some((a / b).log2());
        }
    }

    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let all_ok = first_error.is_none();
    let exact_linear = problem.g.is_zero();
    let mut passed = all_ok;
    let min_error = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let accepted = reference.accept(min_error);
    if let Err(e) = &accepted {
        passed = false;
        reasons.push(e.to_string());
        first_error.get_or_insert(e.clone());
    }
    let eocs: Vec<f64> = rows.iter().filter_map(|r| r.eoc).collect();
    let median_eoc = median_of_finest(&eocs);
    if exact_linear {
        if let Some(e) = errors.iter().find(|e| !(**e <= 1e-11)) {
            passed = false;
            reasons.push(format!("linear problem error {e:e} exceeds 1e-11"));
        }
    } else if all_ok {
        match median_eoc {
            Some(m) if m >= window.0 && m <= window.1 => {}
            Some(m) => {
                passed = false;
                reasons.push(format!(
                    "median EOC {m:.4} outside [{:.3}, {:.3}]",
                    window.0, window.1
                ));
            }
            None if rows.len() > 1 => {
                passed = false;
                reasons.push("no empirical order could be computed".to_string());
            }
            None => {}
        }
        if plan.require_monotone && errors.windows(2).any(|w| !(w[1] < w[0])) {
            passed = false;
            reasons.push("terminal errors are not strictly decreasing".to_string());
        }
        for r in &rows {
            if !(r.error <= r.bound) {
                passed = false;
                reasons.push(format!(
                    "h = {:e}: error {:e} exceeds the a-priori bound {:e}",
                    r.h, r.error, r.bound
                ));
            }
        }
    }

    Ok(ConvergenceReport {
        id: plan.id.clone(),
        problem: problem.id.clone(),
        nonlinearity: problem.g.name().to_string(),
        nodes: plan.scheme.nodes().to_vec(),
        horizon: problem.horizon,
        w_choice,
        alpha,
        predicted_order: predicted,
        median_eoc: if exact_linear { None } else { median_eoc },
        order_window: window,
        lipschitz,
        strip_radius: radius,
        g_bound,
        f_norm,
        constants,
        reference: Some(ReferenceSummary {
            h_ref,
            stages: if reference.exact_linear { 0 } else { REFERENCE_STAGES },
            self_diff: reference.self_diff,
            accepted: accepted.is_ok(),
        }),
        smoothing_alpha,
        rows,
        exact_linear,
        passed,
        reasons,
        first_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingRow {
    pub t: f64,
    pub proxy: f64,
    pub width: Option<f64>,
    pub resolved: bool,
    pub probe: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub p: f64,
    pub r: f64,
    pub rows: Vec<SmoothingRow>,
    /// Least-squares slope of `log proxy` against `log t` over resolved rows.
    pub slope: Option<f64>,
    pub fitted_alpha: Option<f64>,
    /// `exp` of the fitted intercept, an estimate of `c` in `c t^{-alpha}`.
    pub fitted_c: Option<f64>,
    pub excluded: usize,
}

impl SmoothingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,proxy,kernel_width,resolved,probe\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:e},{:e},{},{},{}\n",
                r.t,
                r.proxy,
                r.width.map(|w| format!("{w:e}")).unwrap_or_default(),
                r.resolved,
                r.probe
            ));
        }
        out.push_str(&format!(
            "# slope,{}\n",
            self.slope.map(|s| format!("{s:.6}")).unwrap_or_default()
        ));
        out
    }
}

fn probe_set(geometry: &Geometry, seed: u64) -> Vec<(String, Vec<f64>)> {
    let len = geometry.len();
    let mut probes = Vec::new();
    let mut delta = vec![0.0; len];
    delta[geometry.centre_index()] = 1.0;
    probes.push(("delta".to_string(), delta));
    probes.push(("constant".to_string(), vec![1.0; len]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..3 {
        probes.push((
            format!("random-sign-{k}"),
            (0..len)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
        ));
    }
    let dx = geometry.spacing();
    let scale = match *geometry {
        Geometry::Periodic { .. } => std::f64::consts::PI,
        Geometry::Box { half_width, .. } => half_width,
        Geometry::SinePair { .. } => std::f64::consts::FRAC_PI_2,
        Geometry::Points { .. } => 1.0,
    };
    let (lo, hi) = (0.25 * dx * dx, scale * scale / 40.0);
    let mut tau = lo;
    while tau <= hi {
        probes.push((
            format!("gaussian-{tau:.3e}"),
            (0..len)
                .map(|i| (-geometry.dist_sq_to_centre(i) / (4.0 * tau)).exp())
                .collect(),
        ));
        tau *= 2f64.powf(0.25);
    }
    probes
}

/// Estimates `||e^{tA}||_{L^p -> L^r}` from below on a probe set and fits `t^{-alpha}`.
///
/// Rows whose kernel width is below two grid spacings are flagged and left out of the fit.
pub fn measure_smoothing(
    prop: &dyn Propagator,
    p: f64,
    r: f64,
    times: &[f64],
    seed: u64,
) -> Result<SmoothingReport> {
    if times.iter().any(|t| !(*t > 0.0)) {
        return validation("smoothing times must be positive");
    }
    let geometry = prop.geometry();
    let probes = probe_set(geometry, seed);
    let dx = geometry.spacing();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let mut best = (0.0, String::new());
        for (name, f) in &probes {
            let out = prop.apply(t, f)?;
            let ratio = geometry.lp_norm(&out, r) / geometry.lp_norm(f, p);
            if ratio > best.0 {
                best = (ratio, name.clone());
            }
        }
        let width = prop.kernel_width(t);
        rows.push(SmoothingRow {
            t,
            proxy: best.0,
            width,
            resolved: width.is_none_or(|w| w >= 2.0 * dx),
            probe: best.1,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.resolved)
        .map(|r| (r.t.ln(), r.proxy.ln()))
        .collect();
    let excluded = rows.len() - pts.len();
    let (slope, intercept) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (Some(slope), Some(my - slope * mx))
    } else {
        (None, None)
    };
    Ok(SmoothingReport {
        p,
        r,
        rows,
        slope,
        fitted_alpha: slope.map(|s| -s),
        fitted_c: intercept.map(f64::exp),
        excluded,
    })
}

/// `count` log-spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    geometric_times(lo, hi, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions() {
        assert_eq!(order_prediction(2, 0.0, WChoice::X).unwrap(), 2.0);
        assert_eq!(order_prediction(2, 0.25, WChoice::X).unwrap(), 1.75);
        assert_eq!(order_prediction(3, 0.4, WChoice::V).unwrap(), 3.0);
        assert!(order_prediction(2, 1.0, WChoice::X).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median_of_finest(&[5.0, 1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median_of_finest(&[1.0, 2.0]), Some(1.5));
        assert_eq!(median_of_finest(&[]), None);
    }
}
