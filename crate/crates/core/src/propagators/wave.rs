use std::sync::Arc;

use num_complex::Complex64;

use super::{
    check_len, check_stage_inputs, weight_row, Propagator, SmoothingProfile, StageTarget,
    WeightCache,
};
use crate::error::{validation, Result};
use crate::lagrange::LagrangeData;
use crate::norms::{CoupleNorms, EnergyNorm, Geometry, Norm, WChoice};
use crate::spectral::SineTransform;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpec {
    pub n: usize,
    pub horizon: f64,
}

/// `w'' = w_xx` on `(0, pi)` with Dirichlet conditions, written as the first-order system
/// for `(w, v = w')`. Mode `k` rotates with frequency `omega_k = k`.
#[derive(Debug)]
pub struct WaveDirichlet {
    spec: WaveSpec,
    geometry: Geometry,
    sine: SineTransform,
    cache: WeightCache,
    energy: EnergyNorm,
    norms: CoupleNorms,
}

impl WaveDirichlet {
    pub fn new(spec: WaveSpec) -> Result<Self> {
        if spec.n < 2 {
            return validation(format!("wave problem needs at least 2 modes, got {}", spec.n));
        }
        if !(spec.horizon > 0.0) {
            return validation("horizon must be positive");
        }
        let sine = SineTransform::new(spec.n);
        let energy = EnergyNorm { sine: sine.clone() };
        let norm: Arc<dyn Norm> = Arc::new(energy.clone());
        Ok(WaveDirichlet {
            geometry: Geometry::SinePair { n: spec.n },
            cache: WeightCache::new(
                (1..=spec.n)
                    .map(|k| Complex64::new(0.0, k as f64))
                    .collect(),
            ),
            sine,
            energy,
            norms: CoupleNorms::new(norm.clone(), norm, WChoice::V),
            spec,
        })
    }

    pub fn modes(&self) -> usize {
        self.spec.n
    }

    pub fn sine(&self) -> &SineTransform {
        &self.sine
    }

    /// Per-mode energies `omega_k^2 what_k^2 + vhat_k^2`.
    pub fn modal_energies(&self, state: &[f64]) -> Vec<f64> {
        self.energy.modal_energies(state)
    }

    /// Sine coefficients of both components.
    pub fn to_modes(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.spec.n;
        (self.sine.forward(&state[..n]), self.sine.forward(&state[n..]))
    }

    pub fn from_modes(&self, w: &[f64], v: &[f64]) -> StateVector {
        let mut out = self.sine.inverse(w);
        out.extend(self.sine.inverse(v));
        StateVector::new(out)
    }
}

impl Propagator for WaveDirichlet {
    fn name(&self) -> &str {
        "wave-dirichlet-1d"
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Defined for all real `t` (the cosine family generates a group).
    fn apply(&self, t: f64, v: &[f64]) -> Result<StateVector> {
        check_len(self.name(), self.len(), v.len())?;
        if t == 0.0 {
            return Ok(StateVector::new(v.to_vec()));
        }
        let (w, vv) = self.to_modes(v);
        let mut wo = vec![0.0; self.spec.n];
        let mut vo = vec![0.0; self.spec.n];
        for k in 0..self.spec.n {
            let om = (k + 1) as f64;
            let (sn, cs) = (om * t).sin_cos();
            wo[k] = cs * w[k] + sn / om * vv[k];
            vo[k] = -om * sn * w[k] + cs * vv[k];
        }
        Ok(self.from_modes(&wo, &vo))
    }

    fn stage_convolve_many(
        &self,
        h: f64,
        lag: &LagrangeData,
        g: &[StateVector],
        targets: &[StageTarget],
    ) -> Result<Vec<StateVector>> {
        check_stage_inputs(self.name(), self.len(), h, lag, g, targets)?;
        let table = self.cache.get(h, lag);
        let modes: Vec<(Vec<f64>, Vec<f64>)> = g.iter().map(|gj| self.to_modes(gj)).collect();
        let n = self.spec.n;
        Ok(targets
            .iter()
            .map(|&target| {
                let mut wo = vec![0.0; n];
                let mut vo = vec![0.0; n];
                for k in 0..n {
                    let om = (k + 1) as f64;
                    // Re W and Im W integrate cos and sin of omega (c h - tau).
                    for (wt, (a, b)) in weight_row(&table[k], target).iter().zip(&modes) {
                        wo[k] += wt.re * a[k] + wt.im / om * b[k];
                        vo[k] += -om * wt.im * a[k] + wt.re * b[k];
                    }
                }
                self.from_modes(&wo, &vo)
            })
            .collect())
    }

    fn norms(&self) -> &CoupleNorms {
        &self.norms
    }

    fn profile_x(&self) -> SmoothingProfile {
        SmoothingProfile::constant(1.0, self.spec.horizon)
    }

    fn bound_m(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wave(n: usize) -> WaveDirichlet {
        WaveDirichlet::new(WaveSpec { n, horizon: 10.0 }).unwrap()
    }

    #[test]
    fn quarter_period_of_single_mode() {
        let wv = wave(16);
        let k = 3;
        let mut what = vec![0.0; 16];
        what[k - 1] = 0.7;
        let state = wv.from_modes(&what, &[0.0; 16]);
        let out = wv.apply(PI / (2.0 * k as f64), &state).unwrap();
        let (w, v) = wv.to_modes(&out);
        for j in 0..16 {
            assert!(w[j].abs() < 1e-13);
            let expected = if j == k - 1 { -(k as f64) * 0.7 } else { 0.0 };
            assert!((v[j] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn energy_is_conserved() {
        let wv = wave(32);
        let state = StateVector::from_fn(64, |j| ((j * 37 % 17) as f64 - 8.0) / 8.0);
        let e0 = wv.modal_energies(&state);
        let out = wv.apply(10.0, &state).unwrap();
        let e1 = wv.modal_energies(&out);
        for (a, b) in e0.iter().zip(&e1) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a));
        }
    }
}
