//! Lagrange basis polynomials on scaled collocation nodes `c_i h`.
//!
//! Everything is stored on the reference interval `[0, 1]`: the basis on
//! `[0, h]` is `ell_j(tau) = ell_j^ref(tau / h)`, so the monomial
//! coefficients and the uniform bound `C_ell` do not depend on `h`.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Pairwise distinct, strictly increasing collocation nodes in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NodeSet {
    nodes: Vec<f64>,
}

impl NodeSet {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return validation("node set must contain at least one node");
        }
        for (i, c) in nodes.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 || *c > 1.0 {
                return validation(format!("node c_{} = {c} lies outside [0, 1]", i + 1));
            }
        }
        for w in nodes.windows(2) {
            if w[1] == w[0] {
                return validation(format!("duplicate node {}", w[0]));
            }
            if w[1] < w[0] {
                return validation(format!("nodes must be strictly increasing ({} after {})", w[1], w[0]));
            }
        }
        Ok(NodeSet { nodes })
    }

    /// The shipped default: `c_i = (i-1)/(s-1)` for `s >= 2`, `c_1 = 1/2` for `s = 1`.
    pub fn equispaced(s: usize) -> Result<Self> {
        match s {
            0 => validation("stage count must be positive"),
            1 => NodeSet::new(vec![0.5]),
            _ => NodeSet::new((0..s).map(|i| i as f64 / (s - 1) as f64).collect()),
        }
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

impl TryFrom<Vec<f64>> for NodeSet {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        NodeSet::new(v)
    }
}

impl From<NodeSet> for Vec<f64> {
    fn from(n: NodeSet) -> Self {
        n.nodes
    }
}

/// Monomial form of the Lagrange basis together with its uniform bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeData {
    node_set: NodeSet,
    /// `coeffs[j][k]`: `ell_j(sigma) = sum_k coeffs[j][k] * sigma^k`.
    coeffs: Vec<Vec<f64>>,
    c_ell: f64,
}

const SAMPLES: usize = 4096;

/// Expands each basis polynomial and determines `C_ell = max_j max_{[0,1]} |ell_j|`.
pub fn build_lagrange(node_set: &NodeSet) -> LagrangeData {
    let c = node_set.nodes();
    let s = c.len();
    let mut coeffs = Vec::with_capacity(s);
    for j in 0..s {
        // Multiply out prod_{m != j} (sigma - c_m) / (c_j - c_m).
        let mut poly = vec![1.0];
        for (m, &cm) in c.iter().enumerate() {
            if m == j {
                continue;
            }
            let denom = c[j] - cm;
            let mut next = vec![0.0; poly.len() + 1];
            for (k, &a) in poly.iter().enumerate() {
                next[k + 1] += a / denom;
                next[k] -= a * cm / denom;
            }
            poly = next;
        }
        coeffs.push(poly);
    }

    let mut c_ell: f64 = 0.0;
    for poly in &coeffs {
        c_ell = c_ell.max(max_abs_on_unit_interval(poly));
    }
    LagrangeData {
        node_set: node_set.clone(),
        coeffs,
        c_ell,
    }
}

fn horner(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn derivative(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

/// Dense sampling, then Newton on `p'` around every sampled local extremum.
fn max_abs_on_unit_interval(poly: &[f64]) -> f64 {
    let dp = derivative(poly);
    let ddp = derivative(&dp);
    let vals: Vec<f64> = (0..=SAMPLES)
        .map(|i| horner(poly, i as f64 / SAMPLES as f64).abs())
        .collect();
    let mut best = vals[0].max(vals[SAMPLES]);
    for i in 1..SAMPLES {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            best = best.max(vals[i]);
            let lo = (i - 1) as f64 / SAMPLES as f64;
            let hi = (i + 1) as f64 / SAMPLES as f64;
            let mut x = i as f64 / SAMPLES as f64;
            for _ in 0..50 {
                let d2 = horner(&ddp, x);
                if d2 == 0.0 {
                    break;
                }
                let step = horner(&dp, x) / d2;
                x = (x - step).clamp(lo, hi);
                if step.abs() < 1e-16 {
                    break;
                }
            }
            best = best.max(horner(poly, x).abs());
        }
    }
    best
}

impl LagrangeData {
    pub fn node_set(&self) -> &NodeSet {
        &self.node_set
    }

    pub fn nodes(&self) -> &[f64] {
        self.node_set.nodes()
    }

    pub fn stages(&self) -> usize {
        self.node_set.stages()
    }

    /// Monomial coefficients of the basis on the reference interval.
    pub fn monomial_coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// `max_j sup_{tau in [0,h]} |ell_j(tau)|`, the same for every `h > 0`.
    pub fn c_ell(&self) -> f64 {
        self.c_ell
    }

    /// `ell_j(tau)` for the nodes `c_1 h, ..., c_s h` (`j` is zero-based).
    pub fn eval_basis(&self, j: usize, tau: f64, h: f64) -> Result<f64> {
        if j >= self.stages() {
            return validation(format!("basis index {j} out of range for s = {}", self.stages()));
        }
        if !(h > 0.0) {
            return validation("step size must be positive");
        }
        Ok(horner(&self.coeffs[j], tau / h))
    }

    /// All basis values at `sigma = tau / h`.
    pub fn basis_at(&self, sigma: f64) -> Vec<f64> {
        self.coeffs.iter().map(|p| horner(p, sigma)).collect()
    }

    /// `sum_j ell_j(tau) (c_j h - tau)^k` minus its exact value (1 for `k = 0`, else 0).
    pub fn moment_residual(&self, tau: f64, h: f64, k: usize) -> Result<f64> {
        let s = self.stages();
        if k >= s {
            return validation(format!("moment identity only holds for k <= s - 1 = {}", s - 1));
        }
        if !(h > 0.0) {
            return validation("step size must be positive");
        }
        let sigma = tau / h;
        let sum: f64 = self
            .nodes()
            .iter()
            .zip(self.coeffs.iter())
            .map(|(c, p)| horner(p, sigma) * (c * h - tau).powi(k as i32))
            .sum();
        Ok(if k == 0 { sum - 1.0 } else { sum })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product_formula(c: &[f64], j: usize, sigma: f64) -> f64 {
        c.iter()
            .enumerate()
            .filter(|(m, _)| *m != j)
            .map(|(_, cm)| (sigma - cm) / (c[j] - cm))
            .product()
    }

    #[test]
    fn single_node_is_constant_one() {
        let data = build_lagrange(&NodeSet::new(vec![0.5]).unwrap());
        assert_eq!(data.monomial_coeffs(), &[vec![1.0]]);
        assert_eq!(data.c_ell(), 1.0);
        assert_eq!(data.eval_basis(0, 0.37, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn two_endpoint_nodes_give_linear_basis() {
        let data = build_lagrange(&NodeSet::new(vec![0.0, 1.0]).unwrap());
        assert_eq!(data.monomial_coeffs()[0], vec![1.0, -1.0]);
        assert_eq!(data.monomial_coeffs()[1], vec![0.0, 1.0]);
        assert_eq!(data.c_ell(), 1.0);
        let h = 0.3;
        assert_eq!(data.eval_basis(0, h, h).unwrap(), 0.0);
        assert!((data.eval_basis(1, h / 2.0, h).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_equispaced_nodes_bound_matches_dense_sampling() {
        let nodes = NodeSet::new(vec![0.0, 0.5, 1.0]).unwrap();
        let data = build_lagrange(&nodes);
        // Oracle: 1e5 samples of the product formula, then a parabola through the
        // best sample and its neighbours.
        let n = 100_000;
        let mut best: f64 = 0.0;
        for j in 0..3 {
            let vals: Vec<f64> = (0..=n)
                .map(|i| product_formula(nodes.nodes(), j, i as f64 / n as f64).abs())
                .collect();
            let (imax, _) = vals
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
            let mut m = vals[imax];
            if imax > 0 && imax < n {
                let (a, b, c) = (vals[imax - 1], vals[imax], vals[imax + 1]);
                let denom = a - 2.0 * b + c;
                if denom != 0.0 {
                    m = b - (a - c) * (a - c) / (8.0 * denom);
                }
            }
            best = best.max(m);
        }
        assert!((data.c_ell() - 1.0).abs() < 1e-12);
        assert!((data.c_ell() - best).abs() < 1e-9);
    }

    #[test]
    fn middle_basis_at_quarter() {
        let data = build_lagrange(&NodeSet::new(vec![0.0, 0.5, 1.0]).unwrap());
        let h = 0.01;
        let got = data.eval_basis(1, 0.25 * h, h).unwrap();
        let oracle = product_formula(&[0.0, 0.5, 1.0], 1, 0.25);
        assert!((got - 0.75).abs() < 1e-14);
        assert!((got - oracle).abs() < 1e-14);
    }

    #[test]
    fn bound_for_clustered_nodes_exceeds_one() {
        let data = build_lagrange(&NodeSet::new(vec![0.0, 0.1, 0.2]).unwrap());
        // |ell_2(1)| = (1)(0.8)/(0.1*0.1) = 80 dominates ell_1(1) = 36 and ell_3(1) = 45.
        assert!((data.c_ell() - 80.0).abs() < 1e-10);
    }

    #[test]
    fn moments_vanish_for_random_tau() {
        let data = build_lagrange(&NodeSet::new(vec![0.2, 0.6, 0.9]).unwrap());
        let h = 0.7;
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let tau = h * ((i as f64 * 0.618_033_988_7) % 1.0);
            for k in 0..3 {
                worst = worst.max(data.moment_residual(tau, h, k).unwrap().abs());
            }
        }
        assert!(worst < 1e-10, "{worst}");
        assert!(data.moment_residual(0.3 * h, h, 0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn linear_moment_exact_for_two_nodes() {
        let data = build_lagrange(&NodeSet::new(vec![0.0, 1.0]).unwrap());
        assert!(data.moment_residual(0.3, 1.0, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(NodeSet::new(vec![]).is_err());
        assert!(NodeSet::new(vec![0.3, 0.3]).is_err());
        assert!(NodeSet::new(vec![0.0, 1.2]).is_err());
        assert!(NodeSet::new(vec![-0.1, 0.5]).is_err());
        assert!(NodeSet::new(vec![0.6, 0.2]).is_err());
        let data = build_lagrange(&NodeSet::equispaced(2).unwrap());
        assert!(data.moment_residual(0.1, 1.0, 2).is_err());
        assert!(data.eval_basis(2, 0.1, 1.0).is_err());
        assert!(data.eval_basis(0, 0.1, 0.0).is_err());
    }

    #[test]
    fn default_nodes() {
        assert_eq!(NodeSet::equispaced(1).unwrap().nodes(), &[0.5]);
        assert_eq!(NodeSet::equispaced(3).unwrap().nodes(), &[0.0, 0.5, 1.0]);
        assert!(NodeSet::equispaced(0).is_err());
    }

    #[test]
    fn node_set_serde_validates() {
        let ok: NodeSet = serde_json::from_str("[0.0, 1.0]").unwrap();
        assert_eq!(ok.stages(), 2);
        assert!(serde_json::from_str::<NodeSet>("[0.5, 0.5]").is_err());
    }
}
