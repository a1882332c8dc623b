//! φ-functions and exact stage-convolution weights for scalar (diagonal) generators.
//!
//! `phi_0(z) = e^z`, `phi_{k+1}(z) = (phi_k(z) - 1/k!) / z`, `phi_k(0) = 1/k!`, and
//! `h^k phi_k(h lambda) = int_0^h e^{(h - tau) lambda} tau^{k-1} / (k-1)! dtau`.

use num_complex::Complex64;

use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;

/// Evaluation parameters for φ-functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiTable {
    pub max_order: usize,
    pub taylor_terms: usize,
    pub switch_radius: f64,
}

impl Default for PhiTable {
    fn default() -> Self {
        PhiTable {
            max_order: 12,
            taylor_terms: 30,
            switch_radius: 0.5,
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl PhiTable {
    /// `phi_k(z)`.
    pub fn phi(&self, k: usize, z: Complex64) -> Result<Complex64> {
        if k > self.max_order {
            return validation(format!("phi order {k} exceeds max_order {}", self.max_order));
        }
        Ok(self.phi_all(k, z)[k])
    }

    /// `[phi_0(z), ..., phi_kmax(z)]`.
    ///
    /// Order `k` uses the Taylor series `sum_m z^m / (m+k)!` when
    /// `|z| < switch_radius * max(1, k)` and the upward recurrence from `e^z` otherwise.
    pub fn phi_all(&self, kmax: usize, z: Complex64) -> Vec<Complex64> {
        let r = z.norm();
        let mut out = Vec::with_capacity(kmax + 1);
        let mut rec = z.exp();
        let mut inv_fact = 1.0;
        for k in 0..=kmax {
            if k > 0 {
                rec = (rec - inv_fact) / z;
                inv_fact /= k as f64;
            }
            if r < self.switch_radius * (k.max(1) as f64) {
                out.push(self.taylor(k, z));
            } else {
                out.push(rec);
            }
        }
        out
    }

    fn taylor(&self, k: usize, z: Complex64) -> Complex64 {
        // Horner in z with coefficients 1/(m+k)!.
        let n = self.taylor_terms;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut coeff = 1.0 / factorial(k + n - 1);
        for m in (0..n).rev() {
            acc = acc * z + coeff;
            coeff *= (m + k) as f64;
        }
        acc
    }
}

/// `phi_k(z)` with the default table.
pub fn phi(k: usize, z: Complex64) -> Result<Complex64> {
    PhiTable::default().phi(k, z)
}

/// Exact convolution weights for one scalar eigenvalue.
///
/// `stage[i][j] = int_0^{c_i h} e^{(c_i h - tau) lambda} ell_j(tau) dtau` and
/// `last[j] = int_0^h e^{(h - tau) lambda} ell_j(tau) dtau`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights {
    pub stage: Vec<Vec<Complex64>>,
    pub last: Vec<Complex64>,
}

/// Expands each `ell_j` in monomials of `tau / h`; a monomial `(tau/h)^k` convolved over
/// `[0, c h]` gives `h c^{k+1} k! phi_{k+1}(c h lambda)`.
pub fn stage_weights_diagonal(lambda: Complex64, h: f64, lag: &LagrangeData) -> StageWeights {
    let table = PhiTable::default();
    let s = lag.stages();
    let coeffs = lag.monomial_coeffs();
    let row = |c: f64| -> Vec<Complex64> {
        if c == 0.0 {
            return vec![Complex64::new(0.0, 0.0); s];
        }
        let phis = table.phi_all(s, lambda * (c * h));
        // moments[k] = int_0^{ch} e^{(ch - tau) lambda} (tau/h)^k dtau
        let mut moments = Vec::with_capacity(s);
        let mut ck = c; // c^{k+1}
        let mut kf = 1.0; // k!
        for k in 0..s {
            if k > 0 {
                kf *= k as f64;
                ck *= c;
            }
            moments.push(phis[k + 1] * (h * ck * kf));
        }
        coeffs
            .iter()
            .map(|poly| {
                poly.iter()
                    .zip(moments.iter())
                    .map(|(a, m)| m * *a)
                    .sum::<Complex64>()
            })
            .collect()
    };
    StageWeights {
        stage: lag.nodes().iter().map(|&c| row(c)).collect(),
        last: row(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrange::{build_lagrange, NodeSet};
    use crate::quadrature::gauss_legendre_interval;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// int_0^1 e^{(1-theta) z} theta^{k-1}/(k-1)! dtheta by an n-point rule.
    fn phi_quadrature(k: usize, z: Complex64, n: usize) -> Complex64 {
        if k == 0 {
            return z.exp();
        }
        let (x, w) = gauss_legendre_interval(n, 0.0, 1.0);
        let kf = factorial(k - 1);
        x.iter()
            .zip(&w)
            .map(|(t, wt)| (z * (1.0 - t)).exp() * (wt * t.powi(k as i32 - 1) / kf))
            .sum()
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(phi(0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(phi(1, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(phi(2, c(0.0, 0.0)).unwrap(), c(0.5, 0.0));
        assert!((phi(5, c(0.0, 0.0)).unwrap().re - 1.0 / 120.0).abs() < 1e-18);
    }

    #[test]
    fn phi1_at_one() {
        let v = phi(1, c(1.0, 0.0)).unwrap();
        assert!((v.re - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn phi3_against_fine_quadrature() {
        let z = c(-2.7, 0.0);
        let oracle = phi_quadrature(3, z, 10_000);
        let v = phi(3, z).unwrap();
        assert!(((v - oracle) / oracle).norm() < 1e-12, "{v} vs {oracle}");
    }

    #[test]
    fn order_beyond_table_is_rejected() {
        assert!(phi(13, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn high_orders_stay_accurate_near_switch() {
        for &r in &[0.4, 0.6, 1.0, 2.0, 3.9, 4.1, 6.0] {
            for z in [c(r, 0.0), c(-r, 0.0), c(0.0, r)] {
                for k in 0..=8 {
                    let v = phi(k, z).unwrap();
                    let q = phi_quadrature(k, z, 64);
                    assert!(((v - q) / q).norm() < 1e-12, "k={k} z={z}: {v} vs {q}");
                }
            }
        }
    }

    #[test]
    fn weights_trivial_cases() {
        let lag1 = build_lagrange(&NodeSet::new(vec![0.5]).unwrap());
        let h = 0.2;
        let w = stage_weights_diagonal(c(0.0, 0.0), h, &lag1);
        assert!((w.stage[0][0].re - 0.5 * h).abs() < 1e-16);
        assert!((w.last[0].re - h).abs() < 1e-16);

        let lag2 = build_lagrange(&NodeSet::new(vec![0.0, 1.0]).unwrap());
        let w = stage_weights_diagonal(c(0.0, 0.0), h, &lag2);
        assert!((w.last[0].re - h / 2.0).abs() < 1e-16);
        assert!((w.last[1].re - h / 2.0).abs() < 1e-16);
        assert_eq!(w.stage[0], vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn weights_match_direct_quadrature_for_stiff_mode() {
        let lag = build_lagrange(&NodeSet::new(vec![0.0, 1.0]).unwrap());
        let (lambda, h) = (c(-10.0, 0.0), 0.1);
        let w = stage_weights_diagonal(lambda, h, &lag);
        let (x, wq) = gauss_legendre_interval(64, 0.0, h);
        for j in 0..2 {
            let q: Complex64 = x
                .iter()
                .zip(&wq)
                .map(|(tau, wt)| (lambda * (h - tau)).exp() * (wt * lag.basis_at(tau / h)[j]))
                .sum();
            assert!((w.last[j] - q).norm() < 1e-12 * q.norm().max(1e-3));
        }
    }

    #[test]
    fn row_sums_reduce_to_phi1() {
        let lag = build_lagrange(&NodeSet::new(vec![0.1, 0.4, 0.8]).unwrap());
        let (lambda, h) = (c(-3.0, 2.0), 0.37);
        let w = stage_weights_diagonal(lambda, h, &lag);
        for (i, &ci) in lag.nodes().iter().enumerate() {
            let sum: Complex64 = w.stage[i].iter().sum();
            let expected = phi(1, lambda * (ci * h)).unwrap() * (ci * h);
            assert!((sum - expected).norm() < 1e-11);
        }
    }
}
