//! TOML run and study descriptions, and their translation into problems and plans.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{log_times, RunSettings, SmoothingCheck, StudyPlan};
use crate::integrator::{Scheme, DEFAULT_MAX_ITER};
use crate::lagrange::NodeSet;
use crate::nonlinearities::{
    AdvectionNonlinearity, Nonlinearity, PowerNonlinearity, WaveCubic, ZeroNonlinearity,
};
use crate::norms::{exponent, Geometry, WChoice};
use crate::problem::{Problem, SamplingOptions};
use crate::propagators::{
    HeatSpec, HeatTorus, HeatVSpace, OuProblem, OuSpec, Propagator, WaveDirichlet, WaveSpec,
};
use crate::state::StateVector;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_samples() -> usize {
    400
}
fn default_strip() -> f64 {
    0.25
}
fn default_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_factor() -> usize {
    64
}
fn default_count() -> usize {
    12
}
fn yes() -> bool {
    true
}
fn is_zero_f(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VSpaceConfig {
    Lebesgue {
        #[serde(with = "exponent")]
        r: f64,
    },
    Sobolev {
        #[serde(with = "exponent")]
        r: f64,
    },
    Intersection {
        #[serde(with = "exponent")]
        s: f64,
        #[serde(with = "exponent")]
        r: f64,
    },
}

impl From<VSpaceConfig> for HeatVSpace {
    fn from(v: VSpaceConfig) -> Self {
        match v {
            VSpaceConfig::Lebesgue { r } => HeatVSpace::Lebesgue { r },
            VSpaceConfig::Sobolev { r } => HeatVSpace::Sobolev { r },
            VSpaceConfig::Intersection { s, r } => HeatVSpace::Intersection { s, r },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    HeatTorus {
        #[serde(default = "one_usize")]
        dim: usize,
        n: usize,
        #[serde(default = "two", with = "exponent")]
        p: f64,
        v: VSpaceConfig,
        #[serde(default)]
        w: WChoice,
        /// `[c, alpha]` replacing the computed smoothing profile.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothing: Option<[f64; 2]>,
    },
    Ou {
        b: f64,
        q: f64,
        half_width: f64,
        n: usize,
        #[serde(default = "two", with = "exponent")]
        p: f64,
        #[serde(default = "two", with = "exponent")]
        r: f64,
        #[serde(default)]
        w: WChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quad_nodes: Option<usize>,
    },
    WaveDirichlet {
        n: usize,
    },
}

impl ProblemConfig {
    pub fn grid(&self) -> usize {
        match *self {
            ProblemConfig::HeatTorus { n, .. }
            | ProblemConfig::Ou { n, .. }
            | ProblemConfig::WaveDirichlet { n } => n,
        }
    }

    fn set_grid(&mut self, value: usize) {
        match self {
            ProblemConfig::HeatTorus { n, .. }
            | ProblemConfig::Ou { n, .. }
            | ProblemConfig::WaveDirichlet { n } => *n = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    #[default]
    Zero,
    /// `coeff |u|^{alpha-1} u`.
    Power { alpha: f64, coeff: f64 },
    /// `coeff u u_x`.
    Advection { coeff: f64 },
    /// `(0, -alpha_w w^3)` on the displacement-velocity pair.
    WaveCubic { alpha_w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amp: f64,
    /// Wave vector, one entry per space dimension.
    pub k: Vec<i64>,
    #[serde(default, skip_serializing_if = "is_zero_f")]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `constant + sum amp sin(k . x + phase)`.
    Trig {
        #[serde(default, skip_serializing_if = "is_zero_f")]
        constant: f64,
        terms: Vec<TrigTerm>,
    },
    /// `amp exp(-|x - centre|^2 / (2 sigma^2))` around the domain centre.
    Gaussian { amp: f64, sigma: f64 },
    /// Sine modes `[k, amp]` of the displacement and of the velocity.
    WaveModes {
        #[serde(default)]
        displacement: Vec<[f64; 2]>,
        #[serde(default)]
        velocity: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// Equispaced nodes with this many stages; `s = 1` means exponential Euler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
}

impl SchemeConfig {
    pub fn build(&self) -> Result<Scheme> {
        match (&self.s, &self.nodes) {
            (Some(_), Some(_)) => config_err("scheme: give either s or nodes, not both"),
            (_, Some(nodes)) => Ok(Scheme::new(NodeSet::new(nodes.clone())?)),
            (Some(0), None) => config_err("scheme: s must be positive"),
            (Some(1), None) | (None, None) => Ok(Scheme::exponential_euler()),
            (Some(s), None) => Scheme::equispaced(*s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub lipschitz_samples: usize,
    #[serde(default = "default_strip")]
    pub strip_fraction: f64,
    #[serde(default = "default_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    /// Check single runs against a reference inside the strip.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strip_check: bool,
}

/// `horizon / h` when it is an integer.
pub fn steps_from_h(horizon: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return config_err(format!("step size must be positive, got {h}"));
    }
    let n = horizon / h;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return config_err(format!(
            "step size h = {h} does not divide the horizon T = {horizon} (T/h = {n})"
        ));
    }
    Ok(rounded as usize)
}

impl RunSection {
    pub fn steps(&self) -> Result<usize> {
        match (self.steps, self.h) {
            (Some(_), Some(_)) => config_err("run: give either steps or h, not both"),
            (Some(0), None) => config_err("run: steps must be positive"),
            (Some(n), None) => Ok(n),
            (None, Some(h)) => steps_from_h(self.horizon, h),
            (None, None) => config_err("run: one of steps or h is required"),
        }
    }

    pub fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            n_samples: self.lipschitz_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl SmoothingSection {
    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match (&self.times, self.t_min, self.t_max) {
            (Some(t), None, None) => t.clone(),
            (None, Some(lo), Some(hi)) if lo > 0.0 && hi > lo => log_times(lo, hi, self.count),
            (None, Some(_), Some(_)) => {
                return config_err("smoothing: need 0 < t_min < t_max");
            }
            _ => return config_err("smoothing: give either times or both t_min and t_max"),
        };
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
            return config_err("smoothing: times must be positive");
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default = "default_factor")]
    pub reference_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_window: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub require_monotone: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_check: Option<SmoothingSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingSection>,
}

/// Command-line replacements for file values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<f64>,
    pub horizon: Option<f64>,
    pub s: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
}

fn fill_trig(geometry: &Geometry, constant: f64, terms: &[TrigTerm]) -> Result<StateVector> {
    let dim = geometry.dim();
    if let Some(t) = terms.iter().find(|t| t.k.len() != dim) {
        return config_err(format!(
            "initial: wave vector {:?} has {} entries, the domain has {dim} dimensions",
            t.k,
            t.k.len()
        ));
    }
    Ok(StateVector::from_fn(geometry.len(), |i| {
        let x = geometry.point(i);
        constant
            + terms
                .iter()
                .map(|t| {
                    let arg: f64 = t.k.iter().zip(x).map(|(&k, xa)| k as f64 * xa).sum();
                    t.amp * (arg + t.phase).sin()
                })
                .sum::<f64>()
    }))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise")
    }

    /// Applies overrides and re-runs validation.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if let Some(t) = o.horizon {
            self.run.horizon = t;
        }
        if let Some(h) = o.h {
            self.run.h = Some(h);
            self.run.steps = None;
        }
        if let Some(s) = o.s {
            self.scheme = SchemeConfig {
                s: Some(s),
                nodes: None,
            };
        }
        if let Some(n) = o.grid {
            self.problem.set_grid(n);
        }
        if let Some(seed) = o.seed {
            self.run.seed = seed;
        }
        self.validate()?;
        Ok(self)
    }

    /// Checks every rule the builders enforce, without running anything expensive.
    pub fn validate(&self) -> Result<()> {
        let to_config = |e: Error| match e {
            Error::Validation(m) => Error::Config(m),
            other => other,
        };
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            return config_err(format!("run: horizon must be positive, got {}", self.run.horizon));
        }
        self.run.steps()?;
        if self.run.record_stride == 0 {
            return config_err("run: record_stride must be positive");
        }
        if !(self.run.strip_fraction > 0.0) {
            return config_err("run: strip_fraction must be positive");
        }
        if self.run.lipschitz_samples == 0 || self.run.fp_max_iter == 0 {
            return config_err("run: lipschitz_samples and fp_max_iter must be positive");
        }
        self.scheme.build().map_err(to_config)?;
        self.build_problem().map_err(to_config)?;
        if let Some(study) = &self.study {
            self.study_steps(study)?;
            if let Some(check) = &study.smoothing_check {
                check.times()?;
            }
            if let Some([lo, hi]) = study.order_window {
                if !(lo <= hi) {
                    return config_err("study: order_window must be [low, high]");
                }
            }
        }
        if let Some(sm) = &self.smoothing {
            sm.times()?;
        }
        Ok(())
    }

    fn study_steps(&self, study: &StudySection) -> Result<Vec<usize>> {
        let steps = match (&study.steps, &study.h) {
            (Some(_), Some(_)) => return config_err("study: give either steps or h, not both"),
            (Some(s), None) => s.clone(),
            (None, Some(hs)) => hs
                .iter()
                .map(|&h| steps_from_h(self.run.horizon, h))
                .collect::<Result<_>>()?,
            (None, None) => return config_err("study: one of steps or h is required"),
        };
        if steps.is_empty() || steps.contains(&0) {
            return config_err("study: step counts must be positive and non-empty");
        }
        if steps.windows(2).any(|w| w[1] != 2 * w[0]) {
            return config_err(format!(
                "study: step sizes must halve from one level to the next, got N = {steps:?}"
            ));
        }
        if study.reference_factor < 64 || study.reference_factor % 8 != 0 {
            return config_err("study: reference_factor must be a multiple of 8 and at least 64");
        }
        Ok(steps)
    }

    pub fn build_propagator(&self) -> Result<Arc<dyn Propagator>> {
        Ok(self.build_parts()?.0)
    }

    fn build_parts(&self) -> Result<(Arc<dyn Propagator>, StateVector)> {
        let horizon = self.run.horizon;
        let (prop, wave): (Arc<dyn Propagator>, Option<Arc<WaveDirichlet>>) = match &self.problem {
            ProblemConfig::HeatTorus {
                dim,
                n,
                p,
                v,
                w,
                smoothing,
            } => (
                Arc::new(HeatTorus::new(HeatSpec {
                    dim: *dim,
                    n: *n,
                    p: *p,
                    v: v.clone().into(),
                    w: *w,
                    horizon,
                    smoothing: smoothing.map(|[c, a]| (c, a)),
                })?),
                None,
            ),
            ProblemConfig::Ou {
                b,
                q,
                half_width,
                n,
                p,
                r,
                w,
                quad_nodes,
            } => (
                Arc::new(OuProblem::new(OuSpec {
                    b: *b,
                    q: *q,
                    half_width: *half_width,
                    n: *n,
                    p: *p,
                    r: *r,
                    w: *w,
                    horizon,
                    quad_nodes: *quad_nodes,
                })?),
                None,
            ),
            ProblemConfig::WaveDirichlet { n } => {
                let wave = Arc::new(WaveDirichlet::new(WaveSpec { n: *n, horizon })?);
                (wave.clone(), Some(wave))
            }
        };
        let geometry = prop.geometry();
        let u0 = match (&self.initial, &wave) {
            (InitialConfig::WaveModes { displacement, velocity }, Some(wave)) => {
                let m = wave.modes();
                let mut wm = vec![0.0; m];
                let mut vm = vec![0.0; m];
                for (target, list) in [(&mut wm, displacement), (&mut vm, velocity)] {
                    for &[k, amp] in list {
                        if k < 1.0 || k.fract() != 0.0 || k as usize > m {
                            return config_err(format!("initial: sine mode {k} outside 1..={m}"));
                        }
                        target[k as usize - 1] = amp;
                    }
                }
                wave.from_modes(&wm, &vm)
            }
            (InitialConfig::WaveModes { .. }, None) => {
                return config_err("initial: wave-modes data needs the wave-dirichlet problem")
            }
            (_, Some(_)) => return config_err("initial: the wave problem takes wave-modes data"),
            (InitialConfig::Trig { constant, terms }, None) => {
                fill_trig(geometry, *constant, terms)?
            }
            (InitialConfig::Gaussian { amp, sigma }, None) => {
                if !(*sigma > 0.0) {
                    return config_err("initial: gaussian sigma must be positive");
                }
                StateVector::from_fn(geometry.len(), |i| {
                    amp * (-geometry.dist_sq_to_centre(i) / (2.0 * sigma * sigma)).exp()
                })
            }
        };
        Ok((prop, u0))
    }

    pub fn build_nonlinearity(&self) -> Result<Arc<dyn Nonlinearity>> {
        Ok(match (&self.nonlinearity, &self.problem) {
            (NonlinearityConfig::Zero, _) => Arc::new(ZeroNonlinearity),
            (NonlinearityConfig::Power { .. }, ProblemConfig::WaveDirichlet { .. }) => {
                return config_err("nonlinearity: use wave-cubic for the wave problem");
            }
            (NonlinearityConfig::Power { alpha, coeff }, _) => {
                Arc::new(PowerNonlinearity::new(*alpha, *coeff)?)
            }
            (NonlinearityConfig::Advection { coeff }, ProblemConfig::HeatTorus { dim: 1, n, .. }) => {
                Arc::new(AdvectionNonlinearity::new(*n, *coeff))
            }
            (NonlinearityConfig::Advection { .. }, _) => {
                return config_err("nonlinearity: advection needs the 1D heat problem")
            }
            (NonlinearityConfig::WaveCubic { alpha_w }, ProblemConfig::WaveDirichlet { .. }) => {
                Arc::new(WaveCubic { alpha_w: *alpha_w })
            }
            (NonlinearityConfig::WaveCubic { .. }, _) => {
                return config_err("nonlinearity: wave-cubic needs the wave problem")
            }
        })
    }

    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| match self.problem {
            ProblemConfig::HeatTorus { dim, .. } => format!("heat-torus-{dim}d"),
            ProblemConfig::Ou { .. } => "ou-1d".to_string(),
            ProblemConfig::WaveDirichlet { .. } => "wave-dirichlet-1d".to_string(),
        })
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let (prop, u0) = self.build_parts()?;
        let g = self.build_nonlinearity()?;
        Problem::new(self.id(), prop, g, u0, self.run.horizon)
    }

    pub fn build_scheme(&self) -> Result<Scheme> {
        self.scheme.build()
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        Ok(RunSettings {
            steps: self.run.steps()?,
            record_stride: self.run.record_stride,
            sampling: self.run.sampling(),
            fp_max_iter: self.run.fp_max_iter,
            strip_fraction: self.run.strip_check.then_some(self.run.strip_fraction),
        })
    }

    pub fn build_plan(&self, jobs: Option<usize>) -> Result<StudyPlan> {
        let Some(study) = &self.study else {
            return config_err("config has no [study] section");
        };
        let steps = self.study_steps(study)?;
        let mut plan = StudyPlan::new(self.id(), self.build_problem()?, self.build_scheme()?, steps);
        plan.reference_factor = study.reference_factor;
        plan.order_window = study.order_window.map(|[a, b]| (a, b));
        plan.require_monotone = study.require_monotone;
        plan.strip_fraction = self.run.strip_fraction;
        plan.sampling = self.run.sampling();
        plan.fp_max_iter = self.run.fp_max_iter;
        plan.jobs = jobs;
        plan.smoothing_check = match &study.smoothing_check {
            Some(sc) => Some(SmoothingCheck {
                p: sc.p,
                r: sc.r,
                times: sc.times()?,
            }),
            None => None,
        };
        Ok(plan)
    }
}
