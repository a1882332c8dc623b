use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::{
    check_len, check_stage_inputs, geometric_times, heat_young_constant, weight_row,
    young_exponent, Propagator, SmoothingProfile, StageTarget, WeightCache,
};
use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;
use crate::norms::{
    fmt_exponent, lp_norm, CoupleNorms, Geometry, IntersectionNorm, LpNorm, Norm, SobolevNorm,
    WChoice,
};
use crate::spectral::PeriodicFft;
use crate::state::StateVector;

/// The space `V` of a heat problem; `X` is always `L^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatVSpace {
    Lebesgue { r: f64 },
    Sobolev { r: f64 },
    /// `L^s ∩ W^{1,r}`, the space of the advection example.
    Intersection { s: f64, r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatSpec {
    pub dim: usize,
    pub n: usize,
    pub p: f64,
    pub v: HeatVSpace,
    pub w: WChoice,
    pub horizon: f64,
    /// Declared `(c, alpha)`; computed from the discrete kernel when absent.
    pub smoothing: Option<(f64, f64)>,
}

impl HeatSpec {
    pub fn lebesgue(dim: usize, n: usize, p: f64, r: f64, w: WChoice, horizon: f64) -> Self {
        HeatSpec {
            dim,
            n,
            p,
            v: HeatVSpace::Lebesgue { r },
            w,
            horizon,
            smoothing: None,
        }
    }
}

/// `u_t = Laplace u` on the torus `[0, 2 pi)^d`, diagonal in the discrete Fourier basis.
#[derive(Debug)]
pub struct HeatTorus {
    name: String,
    spec: HeatSpec,
    geometry: Geometry,
    fft: PeriodicFft,
    /// Index into `cache`'s eigenvalue list for every spectral index.
    class_of: Vec<usize>,
    lambdas: Vec<f64>,
    cache: WeightCache,
    norms: CoupleNorms,
    profile_x: SmoothingProfile,
    m_bound: f64,
}

fn smoothing_exponent(dim: usize, p: f64, v: HeatVSpace) -> f64 {
    let a = |r: f64| 0.5 * dim as f64 * (1.0 / p - 1.0 / r);
    match v {
        HeatVSpace::Lebesgue { r } => a(r),
        HeatVSpace::Sobolev { r } => a(r) + 0.5,
        HeatVSpace::Intersection { s, r } => a(s).max(a(r) + 0.5),
    }
}

impl HeatTorus {
    pub fn new(spec: HeatSpec) -> Result<Self> {
        let HeatSpec { dim, n, p, v, .. } = spec;
        if dim != 1 && dim != 2 {
            return validation(format!("heat problem supports d = 1, 2, got {dim}"));
        }
        if n < 4 || !n.is_power_of_two() {
            return validation(format!("grid size must be a power of two >= 4, got {n}"));
        }
        if !(spec.horizon > 0.0) {
            return validation("horizon must be positive");
        }
        let exps: Vec<f64> = match v {
            HeatVSpace::Lebesgue { r } | HeatVSpace::Sobolev { r } => vec![r],
            HeatVSpace::Intersection { s, r } => vec![s, r],
        };
        if p < 1.0 || exps.iter().any(|&r| r < p) {
            return validation(format!(
                "need 1 <= p <= r, got p = {p}, V exponents {exps:?}"
            ));
        }
        let alpha = smoothing_exponent(dim, p, v);
        if alpha >= 1.0 {
            return validation(format!(
                "smoothing exponent alpha = {alpha} >= 1: rho is not integrable"
            ));
        }

        let geometry = Geometry::Periodic { dim, n };
        let fft = PeriodicFft::new(n, dim);
        let mut classes: HashMap<u64, usize> = HashMap::new();
        let mut lambdas = Vec::new();
        let class_of = (0..fft.len())
            .map(|idx| {
                let k2 = fft.mode_sq(idx);
                *classes.entry(k2 as u64).or_insert_with(|| {
                    lambdas.push(-k2);
                    lambdas.len() - 1
                })
            })
            .collect();
        let cache = WeightCache::new(lambdas.iter().map(|&l| Complex64::new(l, 0.0)).collect());

        let cell = geometry.cell_volume();
        let sobolev = |r: f64| SobolevNorm {
            r,
            cell,
            fft: fft.clone(),
        };
        let x: Arc<dyn Norm> = Arc::new(LpNorm { p, cell });
        let vn: Arc<dyn Norm> = match v {
            HeatVSpace::Lebesgue { r } => Arc::new(LpNorm { p: r, cell }),
            HeatVSpace::Sobolev { r } => Arc::new(sobolev(r)),
            HeatVSpace::Intersection { s, r } => Arc::new(IntersectionNorm {
                s,
                sobolev: sobolev(r),
            }),
        };
        let name = match dim {
            1 => "heat-torus-1d",
            _ => "heat-torus-2d",
        };
        let mut heat = HeatTorus {
            name: name.to_string(),
            norms: CoupleNorms::new(x, vn, spec.w),
            spec,
            geometry,
            fft,
            class_of,
            lambdas,
            cache,
            profile_x: SmoothingProfile::constant(1.0, 1.0),
            m_bound: 1.0,
        };
        let (c, m) = heat.kernel_constants(alpha);
        heat.m_bound = m;
        heat.profile_x = match heat.spec.smoothing {
            Some((c, a)) => SmoothingProfile::new(c, a, heat.spec.horizon)?,
            None => SmoothingProfile::new(c, alpha, heat.spec.horizon)?,
        };
        Ok(heat)
    }

    pub fn spec(&self) -> &HeatSpec {
        &self.spec
    }

    /// `e^{tA}` applied to the normalised delta at the domain centre.
    pub fn kernel(&self, t: f64) -> Vec<f64> {
        let mut delta = vec![0.0; self.len()];
        delta[self.geometry.centre_index()] = 1.0 / self.geometry.cell_volume();
        self.multiply(t, &delta)
    }

    fn gradient_norm(&self, k: &[f64], q: f64) -> f64 {
        let cell = self.geometry.cell_volume();
        let grad: Vec<f64> = if self.spec.dim == 1 {
            self.fft.derivative(k, 0)
        } else {
            let dx = self.fft.derivative(k, 0);
            let dy = self.fft.derivative(k, 1);
            dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect()
        };
        lp_norm(&grad, q, cell)
    }

    /// Smoothing constant `c` and uniform bound `M` from the discrete kernel.
    ///
    /// The discrete propagator is convolution with `K_t` on the grid group, so the discrete
    /// Young inequality gives `||e^{tA}||_{L^p -> L^r} <= ||K_t||_q` exactly. `c` is the
    /// sampled `sup_t t^alpha ||K_t||_q` (never below the whole-space constant), `M` the
    /// sampled `sup_t ||K_t||_1`.
    fn kernel_constants(&self, alpha: f64) -> (f64, f64) {
        let p = self.spec.p;
        let cell = self.geometry.cell_volume();
        let dx = self.geometry.spacing();
        let times = geometric_times(dx * dx / 16.0, self.spec.horizon, 48);
        let mut c: f64 = match self.spec.v {
            HeatVSpace::Lebesgue { r } => heat_young_constant(self.spec.dim, p, r).0,
            _ => 0.0,
        };
        let mut m: f64 = 1.0;
        let all_two = p == 2.0
            && match self.spec.v {
                HeatVSpace::Lebesgue { r } | HeatVSpace::Sobolev { r } => r == 2.0,
                HeatVSpace::Intersection { s, r } => s == 2.0 && r == 2.0,
            };
        if all_two && matches!(self.spec.v, HeatVSpace::Lebesgue { .. }) {
            // Parseval: every multiplier e^{-t|k|^2} is at most one.
            return (1.0, 1.0);
        }
        for &t in &times {
            let k = self.kernel(t);
            let lq = |r: f64| lp_norm(&k, young_exponent(p, r), cell);
            let val = match self.spec.v {
                HeatVSpace::Lebesgue { r } => lq(r),
                HeatVSpace::Sobolev { r } => lq(r) + self.gradient_norm(&k, young_exponent(p, r)),
                HeatVSpace::Intersection { s, r } => {
                    lq(s).max(lq(r) + self.gradient_norm(&k, young_exponent(p, r)))
                }
            };
            c = c.max(val * t.powf(alpha));
            if !all_two {
                m = m.max(lp_norm(&k, 1.0, cell));
            }
        }
        (c, m)
    }

    fn multiply(&self, t: f64, v: &[f64]) -> Vec<f64> {
        let mut spec = self.fft.forward(v);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= (t * self.lambdas[self.class_of[idx]]).exp();
        }
        self.fft.inverse_real(spec)
    }

    pub fn describe_couple(&self) -> String {
        format!(
            "X = L^{}, V = {}, W = {}",
            fmt_exponent(self.spec.p),
            self.norms.v.describe(),
            self.norms.w_choice
        )
    }
}

impl Propagator for HeatTorus {
    fn name(&self) -> &str {
        &self.name
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn apply(&self, t: f64, v: &[f64]) -> Result<StateVector> {
        check_len(&self.name, self.len(), v.len())?;
        if t < 0.0 {
            return validation(format!("heat semigroup needs t >= 0, got {t}"));
        }
        if t == 0.0 {
            return Ok(StateVector::new(v.to_vec()));
        }
        Ok(StateVector::new(self.multiply(t, v)))
    }

    fn stage_convolve_many(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        targets: &[StageTarget],
    ) -> Result<Vec<StateVector>> {
        check_stage_inputs(&self.name, self.len(), h, lag, g, targets)?;
        let table = self.cache.get(h, lag);
        let spectra: Vec<Vec<Complex64>> = g.iter().map(|gj| self.fft.forward(gj)).collect();
        Ok(targets
            .iter()
            .map(|&target| {
                let out: Vec<Complex64> = (0..self.len())
                    .map(|idx| {
                        weight_row(&table[self.class_of[idx]], target)
                            .iter()
                            .zip(&spectra)
                            .map(|(w, gh)| w * gh[idx])
                            .sum()
                    })
                    .collect();
                StateVector::new(self.fft.inverse_real(out))
            })
            .collect())
    }

    fn norms(&self) -> &CoupleNorms {
        &self.norms
    }

    fn profile_x(&self) -> SmoothingProfile {
        self.profile_x
    }

    fn bound_m(&self) -> f64 {
        self.m_bound
    }

    fn kernel_width(&self, t: f64) -> Option<f64> {
        Some((2.0 * t).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrange::{build_lagrange, NodeSet};
    use crate::quadrature::gauss_legendre_interval;
    use std::f64::consts::PI;

    fn heat1(n: usize, p: f64, r: f64) -> HeatTorus {
        HeatTorus::new(HeatSpec::lebesgue(1, n, p, r, WChoice::V, 1.0)).unwrap()
    }

    #[test]
    fn identity_and_eigenfunction() {
        let heat = heat1(32, 2.0, 2.0);
        let x: Vec<f64> = (0..32).map(|j| heat.geometry().point(j)[0]).collect();
        let v: Vec<f64> = x.iter().map(|x| (3.0 * x).cos()).collect();
        assert_eq!(heat.apply(0.0, &v).unwrap().into_inner(), v);
        let out = heat.apply(0.2, &v).unwrap();
        for (o, xi) in out.iter().zip(&x) {
            assert!((o - (-0.2 * 9.0f64).exp() * (3.0 * xi).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_peak_matches_gaussian() {
        let heat = heat1(1024, 1.0, f64::INFINITY);
        let t = 1e-3;
        let k = heat.kernel(t);
        let peak = k.iter().cloned().fold(0.0, f64::max);
        let whole_line = (4.0 * PI * t).powf(-0.5);
        assert!((peak / whole_line - 1.0).abs() < 0.02, "{peak} vs {whole_line}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(HeatTorus::new(HeatSpec::lebesgue(3, 16, 2.0, 2.0, WChoice::V, 1.0)).is_err());
        assert!(HeatTorus::new(HeatSpec::lebesgue(1, 24, 2.0, 2.0, WChoice::V, 1.0)).is_err());
        assert!(HeatTorus::new(HeatSpec::lebesgue(1, 16, 2.0, 1.0, WChoice::V, 1.0)).is_err());
        // d = 2, p = 1, r = inf: alpha = 1
        assert!(
            HeatTorus::new(HeatSpec::lebesgue(2, 16, 1.0, f64::INFINITY, WChoice::V, 1.0))
                .is_err()
        );
        let heat = heat1(16, 2.0, 2.0);
        assert!(heat.apply(0.1, &[0.0; 8]).is_err());
    }

    #[test]
    fn l2_couple_has_unit_constants() {
        let heat = heat1(64, 2.0, 2.0);
        assert_eq!(heat.bound_m(), 1.0);
        let prof = heat.profile_x();
        assert_eq!(prof.alpha, 0.0);
        assert!((prof.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_profile_dominates_whole_space_constant() {
        let heat = heat1(64, 2.0, f64::INFINITY);
        let prof = heat.profile_x();
        assert_eq!(prof.alpha, 0.25);
        assert!(prof.c >= (8.0 * PI).powf(-0.25));
        assert!(heat.bound_m() >= 1.0);
    }

    #[test]
    fn single_mode_convolution_matches_quadrature() {
        let heat = heat1(32, 2.0, 2.0);
        let lag = build_lagrange(&NodeSet::new(vec![0.0, 1.0]).unwrap());
        let h = 0.01;
        let x: Vec<f64> = (0..32).map(|j| heat.geometry().point(j)[0]).collect();
        let g1 = StateVector::from_fn(32, |j| (3.0 * x[j]).sin());
        let g2 = StateVector::from_fn(32, |j| -2.0 * (3.0 * x[j]).sin());
        let got = heat
            .stage_convolve(h, &lag, &[g1, g2], StageTarget::Final)
            .unwrap();
        let (nodes, weights) = gauss_legendre_interval(64, 0.0, h);
        let amp: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(tau, w)| {
                let l = lag.basis_at(tau / h);
                w * (-9.0 * (h - tau)).exp() * (l[0] - 2.0 * l[1])
            })
            .sum();
        for j in 0..32 {
            assert!((got[j] - amp * (3.0 * x[j]).sin()).abs() < 1e-11);
        }
    }
}
