//! Exponential Runge-Kutta integrators for semilinear evolution equations
//! `u' = A u + g(t, u)` whose linear part smooths from `X` into `V`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod gronwall;
pub mod harness;
pub mod integrator;
pub mod lagrange;
pub mod nonlinearities;
pub mod norms;
pub mod phi;
pub mod problem;
pub mod propagators;
pub mod quadrature;
pub mod registry;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use integrator::{ExpRk, RunOptions, Scheme, StepGuards, TrajectoryRecord};
pub use lagrange::{build_lagrange, LagrangeData, NodeSet};
pub use norms::{CoupleNorms, Geometry, Norm, WChoice};
pub use propagators::{Propagator, SmoothingProfile, StageTarget};
pub use nonlinearities::Nonlinearity;
pub use harness::{convergence_study, measure_smoothing, ConvergenceReport, SmoothingReport, StudyPlan};
pub use problem::{Problem, SamplingOptions};
pub use state::{StateVector, TimeSeries};
