//! Random-scan Gibbs sampler for a two-component normal mixture with
//! conjugate priors and latent allocations.
//!
//! Model: `y_i ~ p N(mu_1, s_1^2) + (1 - p) N(mu_2, s_2^2)`, with priors
//! `mu_j ~ N(xi, 1/kappa)`, `s_j^-2 ~ Gamma(alpha, beta)` (rate `beta`) and
//! `p ~ Beta(delta, delta)`. Each step redraws one of the four blocks
//! `(mu_1, mu_2)`, `(s_1^2, s_2^2)`, `Z` or `p` with probability 1/4. No
//! ordering is imposed while sampling; functionals apply it afterwards.
//!
//! The recorded state is
//! `(mu_1, mu_2, s_1^2, s_2^2, p, n_1, S_1, Q_1, n_2, S_2, Q_2)` where
//! `n_j`, `S_j = sum y_i`, `Q_j = sum y_i^2` run over the units allocated to
//! component `j`. Every full conditional except that of `Z` depends on `Z`
//! only through these statistics, so the recorded process is itself Markov
//! and all bundled `PG` functions can be evaluated from it.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use super::data::inverse_gamma;
use super::Kernel;
use crate::error::{Error, Result};
use crate::panel::{BasisFunction, BasisSet, Functional};
use crate::rng::RngStream;

/// Recorded state length.
pub const OBSERVED_DIM: usize = 11;

/// Vague data-dependent priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub delta: f64,
    pub xi: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl MixtureConfig {
    /// `delta = 1`, `xi` = data mean, `kappa^-1/2` = data range, `alpha = 2`,
    /// `beta = 0.02 / kappa`.
    pub fn from_data(data: &[f64]) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::Empty("mixture data"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("mixture data must be finite".into()));
        }
        let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) {
            return Err(Error::Invalid("mixture data has zero range".into()));
        }
        let kappa = 1.0 / (range * range);
        Ok(Self {
            delta: 1.0,
            xi: data.iter().sum::<f64>() / data.len() as f64,
            kappa,
            alpha: 2.0,
            beta: 0.02 / kappa,
        })
    }
}

/// Expected value of `min(A, B)` for independent `A ~ N(nu1, tau1_sq)` and
/// `B ~ N(nu2, tau2_sq)`.
pub fn expected_min_normals(nu1: f64, tau1_sq: f64, nu2: f64, tau2_sq: f64) -> Result<f64> {
    if !(tau1_sq > 0.0 && tau2_sq > 0.0) {
        return Err(Error::Invalid(format!(
            "variances must be positive, got {tau1_sq} and {tau2_sq}"
        )));
    }
    let s = (tau1_sq + tau2_sq).sqrt();
    let z = (nu2 - nu1) / s;
    let std = Normal::standard();
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(nu1 * std.cdf(z) + nu2 * std.cdf(-z) - s * density)
}

/// `Phi((m2 - m1) / sqrt(v1 + v2))`: the probability that the first of two
/// independent normals with means `m1`, `m2` and variances `v1`, `v2` is the
/// smaller.
pub fn order_probability(m1: f64, m2: f64, v1: f64, v2: f64) -> f64 {
    let s = (v1 + v2).sqrt();
    let z = (m2 - m1) / s;
    Normal::standard().cdf(z)
}

#[derive(Clone, Debug)]
pub struct MixtureState {
    pub mu: [f64; 2],
    pub sigma2: [f64; 2],
    pub p: f64,
    pub z: Vec<u8>,
    stats: Stats,
}

#[derive(Clone, Copy, Debug, Default)]
struct Stats {
    n: [f64; 2],
    s: [f64; 2],
    q: [f64; 2],
}

impl MixtureState {
    pub fn counts(&self) -> [f64; 2] {
        self.stats.n
    }
}

#[derive(Clone, Debug)]
pub struct MixtureSampler {
    config: MixtureConfig,
    data: Vec<f64>,
}

/// Conditional law parameters computed from the recorded state.
struct Conditionals<'a> {
    cfg: &'a MixtureConfig,
    x: &'a [f64],
}

impl<'a> Conditionals<'a> {
    fn mu(&self, j: usize) -> f64 {
        self.x[j]
    }
    fn sigma2(&self, j: usize) -> f64 {
        self.x[2 + j]
    }
    fn n(&self, j: usize) -> f64 {
        self.x[5 + 3 * j]
    }
    fn s(&self, j: usize) -> f64 {
        self.x[6 + 3 * j]
    }
    fn q(&self, j: usize) -> f64 {
        self.x[7 + 3 * j]
    }

    /// Mean and variance of the `mu_j` conditional.
    fn mean_law(&self, j: usize) -> (f64, f64) {
        let prec = self.n(j) / self.sigma2(j) + self.cfg.kappa;
        let var = 1.0 / prec;
        (var * (self.s(j) / self.sigma2(j) + self.cfg.kappa * self.cfg.xi), var)
    }

    /// Shape and rate of the `s_j^-2` conditional.
    fn precision_law(&self, j: usize) -> (f64, f64) {
        let mu = self.mu(j);
        let ss = (self.q(j) - 2.0 * mu * self.s(j) + self.n(j) * mu * mu).max(0.0);
        (self.cfg.alpha + 0.5 * self.n(j), self.cfg.beta + 0.5 * ss)
    }

    /// `E[s_j | ...]` where `s_j^-2 ~ Gamma(a, b)`: `sqrt(b) Gamma(a-1/2)/Gamma(a)`.
    fn expected_sd(&self, j: usize) -> f64 {
        let (a, b) = self.precision_law(j);
        b.sqrt() * (ln_gamma(a - 0.5) - ln_gamma(a)).exp()
    }

    /// `E[s_j^2 | ...] = b / (a - 1)`.
    fn expected_var(&self, j: usize) -> f64 {
        let (a, b) = self.precision_law(j);
        b / (a - 1.0)
    }

    fn expected_p(&self) -> f64 {
        (self.cfg.delta + self.n(0)) / (2.0 * self.cfg.delta + self.n(0) + self.n(1))
    }
}

fn min_mean(x: &[f64]) -> f64 {
    x[0].min(x[1])
}

/// Standard deviation of the component with the smaller mean.
fn sd_of_smaller(x: &[f64]) -> f64 {
    if x[0] < x[1] {
        x[2].sqrt()
    } else {
        x[3].sqrt()
    }
}

impl MixtureSampler {
    pub fn new(config: MixtureConfig, data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("mixture data"));
        }
        if !(config.delta > 0.0 && config.kappa > 0.0 && config.alpha > 1.0 && config.beta > 0.0) {
            return Err(Error::Invalid(
                "mixture priors need delta, kappa, beta > 0 and alpha > 1".into(),
            ));
        }
        Ok(Self { config, data })
    }

    pub fn config(&self) -> &MixtureConfig {
        &self.config
    }

    fn conditionals<'a>(&'a self, x: &'a [f64]) -> Conditionals<'a> {
        Conditionals { cfg: &self.config, x }
    }

    /// `PG_1` for `G_1 = min(mu_1, mu_2)`.
    pub fn pg_min_mean(&self, x: &[f64]) -> f64 {
        let c = self.conditionals(x);
        let (nu1, t1) = c.mean_law(0);
        let (nu2, t2) = c.mean_law(1);
        let emin = expected_min_normals(nu1, t1, nu2, t2).unwrap_or(f64::NAN);
        0.75 * min_mean(x) + 0.25 * emin
    }

    /// `PG_2` for `G_2` = standard deviation of the smaller-mean component.
    ///
    /// The `Z` and `p` blocks leave `G_2` unchanged; the variance block keeps
    /// the means (hence the ordering) fixed; the mean block keeps the
    /// variances fixed and reorders with the probability that the redrawn
    /// `mu_1` is below `mu_2`.
    pub fn pg_sd_of_smaller(&self, x: &[f64]) -> f64 {
        let c = self.conditionals(x);
        let (nu1, t1) = c.mean_law(0);
        let (nu2, t2) = c.mean_law(1);
        let p_order = order_probability(nu1, nu2, t1, t2);
        let sigma_block = if x[0] < x[1] {
            c.expected_sd(0)
        } else {
            c.expected_sd(1)
        };
        let mean_block = p_order * x[2].sqrt() + (1.0 - p_order) * x[3].sqrt();
        0.5 * sd_of_smaller(x) + 0.25 * sigma_block + 0.25 * mean_block
    }

    /// Functionals: `min_mu` (ordered first mean), `sd_min` and the
    /// coordinates `mu1`, `mu2`, `sigma2_1`, `sigma2_2`, `p`.
    pub fn functional(&self, id: &str) -> Option<Functional> {
        let f = match id {
            "min_mu" => Functional::new("min_mu", min_mean),
            "sd_min" => Functional::new("sd_min", sd_of_smaller),
            "mu1" => Functional::new("mu1", |x| x[0]),
            "mu2" => Functional::new("mu2", |x| x[1]),
            "sigma2_1" => Functional::new("sigma2_1", |x| x[2]),
            "sigma2_2" => Functional::new("sigma2_2", |x| x[3]),
            "p" => Functional::new("p", |x| x[4]),
            _ => return None,
        };
        Some(f)
    }

    /// `ordered`: `(min(mu_1, mu_2), sd of the smaller-mean component)`.
    /// `coordinates`: the five parameters `(mu_1, mu_2, s_1^2, s_2^2, p)`.
    pub fn basis(self: &Arc<Self>, id: &str) -> Option<BasisSet> {
        match id {
            "ordered" => {
                let a = Arc::clone(self);
                let b = Arc::clone(self);
                Some(BasisSet::new(vec![
                    BasisFunction::new("min_mu", min_mean, move |x| a.pg_min_mean(x)),
                    BasisFunction::new("sd_min", sd_of_smaller, move |x| b.pg_sd_of_smaller(x)),
                ]))
            }
            "coordinates" => {
                let mut set = BasisSet::default();
                for j in 0..2 {
                    let s = Arc::clone(self);
                    set.push(BasisFunction::new(
                        format!("mu{}", j + 1),
                        move |x| x[j],
                        move |x| 0.75 * x[j] + 0.25 * s.conditionals(x).mean_law(j).0,
                    ));
                }
                for j in 0..2 {
                    let s = Arc::clone(self);
                    set.push(BasisFunction::new(
                        format!("sigma2_{}", j + 1),
                        move |x| x[2 + j],
                        move |x| 0.75 * x[2 + j] + 0.25 * s.conditionals(x).expected_var(j),
                    ));
                }
                let s = Arc::clone(self);
                set.push(BasisFunction::new(
                    "p",
                    |x| x[4],
                    move |x| 0.75 * x[4] + 0.25 * s.conditionals(x).expected_p(),
                ));
                Some(set)
            }
            _ => None,
        }
    }

    fn recompute_stats(&self, state: &mut MixtureState) {
        let mut st = Stats::default();
        for (&y, &z) in self.data.iter().zip(&state.z) {
            let j = z as usize;
            st.n[j] += 1.0;
            st.s[j] += y;
            st.q[j] += y * y;
        }
        state.stats = st;
    }

    fn observe_into(&self, state: &MixtureState, out: &mut [f64]) {
        out[0] = state.mu[0];
        out[1] = state.mu[1];
        out[2] = state.sigma2[0];
        out[3] = state.sigma2[1];
        out[4] = state.p;
        for j in 0..2 {
            out[5 + 3 * j] = state.stats.n[j];
            out[6 + 3 * j] = state.stats.s[j];
            out[7 + 3 * j] = state.stats.q[j];
        }
    }
}

/// One random-scan Gibbs update.
pub fn mixture_gibbs_step(sampler: &MixtureSampler, state: &mut MixtureState, rng: &mut RngStream) -> Result<()> {
    let mut x = [0.0; OBSERVED_DIM];
    sampler.observe_into(state, &mut x);
    let c = sampler.conditionals(&x);
    match rng.index(4) {
        0 => {
            for j in 0..2 {
                let (m, v) = c.mean_law(j);
                let z: f64 = rng.sample(StandardNormal);
                state.mu[j] = m + v.sqrt() * z;
            }
        }
        1 => {
            for j in 0..2 {
                let (a, b) = c.precision_law(j);
                state.sigma2[j] = inverse_gamma(a, b, rng)?;
            }
        }
        2 => {
            let (s1, s2) = (state.sigma2[0].sqrt(), state.sigma2[1].sqrt());
            let (w1, w2) = (state.p / s1, (1.0 - state.p) / s2);
            for (zi, &y) in state.z.iter_mut().zip(&sampler.data) {
                let d1 = (y - state.mu[0]) / s1;
                let d2 = (y - state.mu[1]) / s2;
                let a = w1 * (-0.5 * d1 * d1).exp();
                let b = w2 * (-0.5 * d2 * d2).exp();
                // compare on the log scale when both densities underflow
                let prob1 = if a + b > 0.0 {
                    a / (a + b)
                } else {
                    let la = w1.ln() - 0.5 * d1 * d1;
                    let lb = w2.ln() - 0.5 * d2 * d2;
                    1.0 / (1.0 + (lb - la).exp())
                };
                let u: f64 = rng.gen();
                *zi = if u < prob1 { 0 } else { 1 };
            }
            sampler.recompute_stats(state);
        }
        _ => {
            let d = sampler.config.delta;
            let beta = Beta::new(d + state.stats.n[0], d + state.stats.n[1])
                .map_err(|e| Error::Invalid(format!("weight conditional: {e}")))?;
            state.p = rng.sample(beta);
        }
    }
    if !(state.sigma2[0] > 0.0 && state.sigma2[1] > 0.0 && state.mu.iter().all(|m| m.is_finite())) {
        return Err(Error::NonFinite {
            step: 0,
            function: "mixture state".into(),
        });
    }
    Ok(())
}

impl Kernel for MixtureSampler {
    type State = MixtureState;

    fn dim(&self) -> usize {
        OBSERVED_DIM
    }

    /// Means at `xi -/+ sd/2`, both variances at the data variance, `p = 1/2`,
    /// allocations to the nearer mean.
    fn initial_state(&self) -> MixtureState {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let var = self.data.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let var = if var > 0.0 { var } else { 1.0 };
        let mu = [mean - 0.5 * var.sqrt(), mean + 0.5 * var.sqrt()];
        let z = self
            .data
            .iter()
            .map(|y| u8::from((y - mu[0]).abs() > (y - mu[1]).abs()))
            .collect();
        let mut state = MixtureState {
            mu,
            sigma2: [var, var],
            p: 0.5,
            z,
            stats: Stats::default(),
        };
        self.recompute_stats(&mut state);
        state
    }

    fn step(&self, state: &mut MixtureState, rng: &mut RngStream) -> Result<()> {
        mixture_gibbs_step(self, state, rng)
    }

    fn observe(&self, state: &MixtureState, out: &mut [f64]) {
        self.observe_into(state, out)
    }
}
