//! Metropolis-within-Gibbs for a normal location model with a Cauchy prior
//! on the location and an inverse-gamma prior on the variance.
//!
//! Target: `pi(phi, V) ∝ (1 + phi^2)^-1 V^{-N/2 - 2} exp(-(1 + S(phi)/2) / V)`
//! with `S(phi) = sum_i (phi - y_i)^2`. Each step picks a block with
//! probability one half: either `V` is redrawn from
//! `IG(1 + N/2, 1 + S(phi)/2)`, or `phi` receives a random-walk Metropolis
//! update with an `N(phi, 1)` proposal. Recorded state: `(phi, V)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::data::inverse_gamma;
use super::Kernel;
use crate::error::{Error, Result};
use crate::panel::{BasisFunction, BasisSet, Functional};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct CauchyIgSampler {
    n: f64,
    sum_y: f64,
    sum_y2: f64,
}

impl CauchyIgSampler {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("cauchy-ig data"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("cauchy-ig data must be finite".into()));
        }
        Ok(Self {
            n: data.len() as f64,
            sum_y: data.iter().sum(),
            sum_y2: data.iter().map(|v| v * v).sum(),
        })
    }

    /// `S(phi) = sum_i (phi - y_i)^2`.
    pub fn sum_sq(&self, phi: f64) -> f64 {
        (self.n * phi * phi - 2.0 * phi * self.sum_y + self.sum_y2).max(0.0)
    }

    fn v_shape(&self) -> f64 {
        1.0 + self.n / 2.0
    }

    fn v_rate(&self, phi: f64) -> f64 {
        1.0 + 0.5 * self.sum_sq(phi)
    }

    /// `E[V | phi]` under the full conditional.
    pub fn conditional_mean_v(&self, phi: f64) -> f64 {
        self.v_rate(phi) / (self.v_shape() - 1.0)
    }

    fn log_target_phi(&self, phi: f64, v: f64) -> f64 {
        -(phi * phi).ln_1p() - self.sum_sq(phi) / (2.0 * v)
    }

    /// Functionals `phi` and `V`.
    pub fn functional(&self, id: &str) -> Option<Functional> {
        match id {
            "phi" | "x1" => Some(Functional::new("phi", |x| x[0])),
            "V" | "v" | "x2" => Some(Functional::new("V", |x| x[1])),
            _ => None,
        }
    }

    /// `v`: the single basis function `G(phi, V) = V`.
    pub fn basis(self: &Arc<Self>, id: &str) -> Option<BasisSet> {
        (id == "v").then(|| {
            let s = Arc::clone(self);
            BasisSet::new(vec![BasisFunction::new(
                "V",
                |x| x[1],
                move |x| 0.5 * x[1] + 0.5 * s.conditional_mean_v(x[0]),
            )])
        })
    }
}

/// One Metropolis-within-Gibbs update of `(phi, V)`.
pub fn cauchy_ig_mwg_step(model: &CauchyIgSampler, state: &mut [f64; 2], rng: &mut RngStream) -> Result<()> {
    let [phi, v] = *state;
    if rng.gen_bool(0.5) {
        state[1] = inverse_gamma(model.v_shape(), model.v_rate(phi), rng)?;
    } else {
        let z: f64 = rng.sample(StandardNormal);
        let proposal = phi + z;
        let log_ratio = model.log_target_phi(proposal, v) - model.log_target_phi(phi, v);
        let u: f64 = rng.gen();
        if u.ln() < log_ratio {
            state[0] = proposal;
        }
    }
    Ok(())
}

impl Kernel for CauchyIgSampler {
    type State = [f64; 2];

    fn dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> [f64; 2] {
        [0.0, 1.0]
    }

    fn step(&self, state: &mut [f64; 2], rng: &mut RngStream) -> Result<()> {
        cauchy_ig_mwg_step(self, state, rng)
    }

    fn observe(&self, state: &[f64; 2], out: &mut [f64]) {
        out.copy_from_slice(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CauchyIgSampler {
        CauchyIgSampler::new(vec![1.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn sufficient_statistics_match_direct_sum() {
        let m = model();
        for phi in [-1.5, 0.0, 2.3] {
            let direct: f64 = [1.0, 2.0, 4.0].iter().map(|y| (phi - y) * (phi - y)).sum();
            assert!((m.sum_sq(phi) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_mean_of_v() {
        // shape 2.5, rate 1 + S(0)/2 = 1 + 21/2
        assert!((model().conditional_mean_v(0.0) - 11.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn one_block_changes_per_step() {
        let m = model();
        let mut rng = RngStream::new(3, 0);
        let mut s = [0.0, 1.0];
        for _ in 0..200 {
            let before = s;
            cauchy_ig_mwg_step(&m, &mut s, &mut rng).unwrap();
            assert!(s[0] == before[0] || s[1] == before[1]);
            assert!(s[1] > 0.0);
        }
    }

    #[test]
    fn rejects_bad_data() {
        assert!(CauchyIgSampler::new(vec![]).is_err());
        assert!(CauchyIgSampler::new(vec![1.0, f64::NAN]).is_err());
    }
}
