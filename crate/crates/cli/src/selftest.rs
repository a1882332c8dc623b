//! Fast checks of the building blocks, one line per check.

use expsplit::gronwall::{gronwall_bound, greedy_extremal};
use expsplit::harness::{convergence_study, single_run, RunSettings};
use expsplit::lagrange::{build_lagrange, NodeSet};
use expsplit::phi::phi;
use expsplit::quadrature::gauss_legendre_interval;
use expsplit::registry;
use expsplit::{Error, StateVector};
use num_complex::Complex64;

type Check = (&'static str, fn() -> Result<String, String>);

fn lagrange_identities() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for s in 1..=6 {
        let lag = build_lagrange(&NodeSet::equispaced(s).map_err(|e| e.to_string())?);
        for k in 0..=20 {
            let sigma = k as f64 / 20.0;
            let sum: f64 = lag.basis_at(sigma).iter().sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    if worst < 1e-12 {
        Ok(format!("partition of unity residual {worst:.1e}"))
    } else {
        Err(format!("partition of unity residual {worst:.1e}"))
    }
}

fn phi_quadrature() -> Result<String, String> {
    let (x, w) = gauss_legendre_interval(64, 0.0, 1.0);
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        for z in [Complex64::new(-3.0, 0.0), Complex64::new(0.5, 2.0), Complex64::new(-20.0, 5.0)] {
            let fact: f64 = (1..k).map(|j| j as f64).product();
            let q: Complex64 = x
                .iter()
                .zip(&w)
                .map(|(&th, &wt)| ((1.0 - th) * z).exp() * th.powi(k as i32 - 1) / fact * wt)
                .sum();
            let v = phi(k, z).map_err(|e| e.to_string())?;
            worst = worst.max((v - q).norm() / q.norm());
        }
    }
    if worst < 1e-10 {
        Ok(format!("max relative error {worst:.1e}"))
    } else {
        Err(format!("max relative error {worst:.1e}"))
    }
}

fn gronwall() -> Result<String, String> {
    let b = gronwall_bound(&[1.0; 4], &[1.0; 3]).map_err(|e| e.to_string())?;
    let z = greedy_extremal(&[1.0; 4], &[1.0; 3]);
    if b[3] == 8.0 && z == b {
        Ok("doubling sequence reproduced".into())
    } else {
        Err(format!("bound {b:?}, extremal {z:?}"))
    }
}

fn heat_semigroup() -> Result<String, String> {
    let cfg = registry::find("heat-torus-1d").unwrap().config().map_err(|e| e.to_string())?;
    let prop = cfg.build_propagator().map_err(|e| e.to_string())?;
    let u = StateVector::from_fn(prop.len(), |i| ((i * 7919) % 13) as f64 - 6.0);
    let a = prop.apply(0.05, &prop.apply(0.02, &u).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let b = prop.apply(0.07, &u).map_err(|e| e.to_string())?;
    let d = a.sub(&b).max_abs();
    if d < 1e-11 {
        Ok(format!("composition defect {d:.1e}"))
    } else {
        Err(format!("composition defect {d:.1e}"))
    }
}

fn linear_study() -> Result<String, String> {
    let plan = registry::find("heat-linear")
        .unwrap()
        .config()
        .and_then(|c| c.build_plan(None))
        .map_err(|e| e.to_string())?;
    let rep = convergence_study(&plan).map_err(|e| e.to_string())?;
    let worst = rep.errors().into_iter().fold(0.0, f64::max);
    if rep.passed && rep.exact_linear {
        Ok(format!("exact linear, max error {worst:.1e}"))
    } else {
        Err(format!("{:?}", rep.reasons))
    }
}

fn contraction_guard() -> Result<String, String> {
    let cfg = registry::find("heat-cubic-s2").unwrap().config().map_err(|e| e.to_string())?;
    let problem = cfg.build_problem().map_err(|e| e.to_string())?;
    let scheme = cfg.build_scheme().map_err(|e| e.to_string())?;
    let settings = RunSettings {
        steps: 2,
        ..cfg.run_settings().map_err(|e| e.to_string())?
    };
    let (_, summary) = single_run(&problem, &scheme, &settings).map_err(|e| e.to_string())?;
    match summary.failure {
        Some(Error::Contraction { kappa, .. }) => Ok(format!("h = 0.25 refused, kappa = {kappa:.3}")),
        other => Err(format!("expected a contraction failure, got {other:?}")),
    }
}

pub const CHECKS: &[Check] = &[
    ("lagrange", lagrange_identities),
    ("phi", phi_quadrature),
    ("gronwall", gronwall),
    ("heat-semigroup", heat_semigroup),
    ("linear-study", linear_study),
    ("contraction-guard", contraction_guard),
];

pub fn run() -> i32 {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        crate::EXIT_OK
    } else {
        crate::EXIT_STUDY_FAILED
    }
}
