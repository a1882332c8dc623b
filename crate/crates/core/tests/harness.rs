use std::sync::Arc;

use expsplit::harness::{
    convergence_study, derivative_l1_norm, measure_smoothing, order_prediction,
    reference_solution, single_run, RunSettings, StudyPlan,
};
use expsplit::nonlinearities::{Pointwise, PowerNonlinearity, ZeroNonlinearity};
use expsplit::propagators::{DiagonalPropagator, HeatSpec, HeatTorus, Propagator};
use expsplit::registry;
use expsplit::{Error, Problem, SamplingOptions, Scheme, StateVector, WChoice};

fn logistic_problem() -> Problem {
    let prop = DiagonalPropagator::new(vec![-1.0], 1.0).unwrap();
    let g = Pointwise::new("square", |_t, u| u * u);
    Problem::new("logistic", Arc::new(prop), Arc::new(g), StateVector::new(vec![0.1]), 1.0)
        .unwrap()
}

fn heat_cubic(n: usize, horizon: f64) -> Problem {
    let prop = HeatTorus::new(HeatSpec::lebesgue(1, n, 2.0, 2.0, WChoice::V, horizon)).unwrap();
    let u0 = StateVector::from_fn(n, |i| (i as f64 * std::f64::consts::TAU / n as f64).sin());
    let g = PowerNonlinearity::new(3.0, -1.0).unwrap();
    Problem::new("heat", Arc::new(prop), Arc::new(g), u0, horizon).unwrap()
}

#[test]
fn reference_matches_logistic_closed_form() {
    let p = logistic_problem();
    let r = reference_solution(&p, 1.0 / 1024.0, 64, SamplingOptions::default()).unwrap();
    let u0 = 0.1;
    for (t, u) in r.series.times.iter().zip(&r.series.states) {
        let exact = u0 * (-t).exp() / (1.0 - u0 + u0 * (-t).exp());
        assert!((u[0] - exact).abs() < 1e-10, "t = {t}: {} vs {exact}", u[0]);
    }
    assert_eq!(r.series.len(), 17);
    assert!(r.self_diff < 1e-12);
}

#[test]
fn linear_reference_short_circuits() {
    let prop = Arc::new(DiagonalPropagator::new(vec![-1.0, -3.0], 1.0).unwrap());
    let u0 = StateVector::new(vec![1.0, -2.0]);
    let p = Problem::new("lin", prop.clone(), Arc::new(ZeroNonlinearity), u0.clone(), 1.0).unwrap();
    let r = reference_solution(&p, 1.0 / 128.0, 8, SamplingOptions::default()).unwrap();
    assert!(r.exact_linear);
    assert_eq!(r.terminal(), &prop.apply(1.0, &u0).unwrap());
}

#[test]
fn reference_rejected_when_not_self_consistent() {
    let p = heat_cubic(32, 0.5);
    let r = reference_solution(&p, 0.5 / 64.0, 1, SamplingOptions::default()).unwrap();
    assert!(r.accept(1.0).is_ok());
    assert!(matches!(r.accept(1e-14), Err(Error::Reference(_))));
}

#[test]
fn errors_independent_of_reference_refinement() {
    let run = |factor| {
        let mut plan = StudyPlan::new("ind", heat_cubic(32, 0.25), Scheme::equispaced(2).unwrap(), vec![10, 20, 40]);
        plan.reference_factor = factor;
        convergence_study(&plan).unwrap()
    };
    let (a, b) = (run(64), run(128));
    for (x, y) in a.errors().iter().zip(b.errors()) {
        assert!((x - y).abs() < 1e-2 * x, "{x} vs {y}");
    }
}

#[test]
fn linear_study_is_exact() {
    let plan = registry::find("heat-linear").unwrap().config().unwrap().build_plan(None).unwrap();
    let r = convergence_study(&plan).unwrap();
    assert!(r.exact_linear && r.passed);
    assert!(r.errors().iter().all(|e| *e <= 1e-11));
    assert!(r.rows.iter().all(|row| row.bound == 0.0));
}

#[test]
fn plan_validation() {
    let p = heat_cubic(32, 0.5);
    let bad = StudyPlan::new("x", p.clone(), Scheme::exponential_euler(), vec![10, 30]);
    assert!(matches!(convergence_study(&bad), Err(Error::Validation(_))));
    let mut bad = StudyPlan::new("x", p, Scheme::exponential_euler(), vec![10, 20]);
    bad.reference_factor = 60;
    assert!(convergence_study(&bad).is_err());
}

#[test]
fn strip_violation_fails_the_study() {
    let mut plan = StudyPlan::new("strip", heat_cubic(32, 0.5), Scheme::exponential_euler(), vec![10, 20]);
    plan.strip_fraction = 1e-6;
    let r = convergence_study(&plan).unwrap();
    assert!(!r.passed);
    assert!(matches!(r.first_error, Some(Error::StripViolation { .. })));
    assert!(r.rows.iter().all(|row| row.status.starts_with("aborted")));
}

#[test]
fn jobs_do_not_change_results() {
    let make = |jobs| {
        let mut plan = StudyPlan::new("j", heat_cubic(32, 0.25), Scheme::equispaced(2).unwrap(), vec![10, 20, 40]);
        plan.jobs = jobs;
        convergence_study(&plan).unwrap().to_csv()
    };
    assert_eq!(make(Some(1)), make(Some(3)));
}

#[test]
fn csv_columns() {
    let plan = registry::find("heat-linear").unwrap().config().unwrap().build_plan(None).unwrap();
    let csv = convergence_study(&plan).unwrap().to_csv();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("h,N,error,EOC,bound"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn predictions_follow_w_choice() {
    assert_eq!(order_prediction(2, 0.0, WChoice::X).unwrap(), 2.0);
    assert_eq!(order_prediction(2, 0.25, WChoice::X).unwrap(), 1.75);
    assert_eq!(order_prediction(3, 0.5, WChoice::V).unwrap(), 3.0);
    assert!(matches!(order_prediction(1, 1.0, WChoice::X), Err(Error::Validation(_))));
}

#[test]
fn derivative_norm_of_quadratic_forcing() {
    // g(t, u) = u with u(t) = t^2 has f'' = 2, so ||f''||_{L^1(0,1)} = 2.
    let prop = DiagonalPropagator::new(vec![0.0], 1.0).unwrap();
    let g = Pointwise::new("id", |_t, u| u);
    let p = Problem::new("q", Arc::new(prop), Arc::new(g), StateVector::new(vec![0.0]), 1.0).unwrap();
    let mut series = expsplit::TimeSeries::default();
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        series.push(t, StateVector::new(vec![t * t]));
    }
    assert!((derivative_l1_norm(&p, &series, 2).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn under_resolved_rows_are_excluded() {
    let heat = HeatTorus::new(HeatSpec::lebesgue(1, 64, 1.0, 2.0, WChoice::V, 1.0)).unwrap();
    let times = [1e-5, 1e-4, 4e-2, 8e-2, 1.6e-1];
    let r = measure_smoothing(&heat, 1.0, 2.0, &times, 0).unwrap();
    assert!(!r.rows[0].resolved && !r.rows[1].resolved);
    assert_eq!(r.excluded, 2);
    assert!(r.slope.is_some());
}

#[test]
fn contraction_abort_in_single_run() {
    let p = heat_cubic(32, 0.5);
    let scheme = Scheme::equispaced(2).unwrap();
    let settings = RunSettings {
        steps: 2,
        record_stride: 1,
        sampling: SamplingOptions::default(),
        fp_max_iter: 100,
        strip_fraction: None,
    };
    let (record, summary) = single_run(&p, &scheme, &settings).unwrap();
    assert!(record.steps.is_empty());
    let Some(Error::Contraction { h, kappa, omega, c_ell, s, lipschitz }) = summary.failure else {
        panic!("expected a contraction failure");
    };
    assert_eq!(h, 0.25);
    assert!((kappa - omega * c_ell * s as f64 * lipschitz).abs() < 1e-12 * kappa);
    assert!(kappa >= 1.0);
}
