//! Four-block random-scan Gibbs sampler for a hierarchical normal linear
//! growth model.
//!
//! `y_ij ~ N(alpha_i + beta_i x_ij, s^2)`, `phi_i = (alpha_i, beta_i) ~
//! N(mu_c, Sigma_c)`, with conjugate priors `mu_c ~ N(eta, C)`,
//! `Sigma_c^-1 ~ W((rho R)^-1, rho)` and `s^2 ~ IG(nu0/2, nu0 tau0^2/2)`.
//!
//! Recorded state (length `2l + 6`):
//! `(alpha_1, beta_1, ..., alpha_l, beta_l, alpha_c, beta_c,
//!   Sigma_11, Sigma_12, Sigma_22, s^2)`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::inverse_gamma;
use super::{coordinate_id, Kernel};
use crate::error::{Error, Result};
use crate::panel::{BasisFunction, BasisSet, Functional};
use crate::rng::RngStream;

/// Prior hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnlmConfig {
    pub eta: [f64; 2],
    pub c: [[f64; 2]; 2],
    pub nu0: f64,
    pub tau0_sq: f64,
    pub rho: f64,
    pub r: [[f64; 2]; 2],
}

impl Default for HnlmConfig {
    fn default() -> Self {
        Self {
            eta: [100.0, 15.0],
            c: [[1.0e4, 0.0], [0.0, 100.0]],
            nu0: 4.0,
            tau0_sq: 10.0,
            rho: 4.0,
            r: [[10.0, 0.0], [0.0, 1.0]],
        }
    }
}

/// Covariates and responses, one row per unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnlmData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl HnlmData {
    pub fn units(&self) -> usize {
        self.y.len()
    }

    pub fn observations(&self) -> usize {
        self.y.iter().map(Vec::len).sum()
    }
}

fn mat(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

/// Per-unit sufficient statistics.
#[derive(Clone, Debug)]
struct Unit {
    xtx: Matrix2<f64>,
    xty: Vector2<f64>,
    yty: f64,
}

#[derive(Clone, Debug)]
pub struct HnlmSampler {
    config: HnlmConfig,
    units: Vec<Unit>,
    total_obs: f64,
    c_inv: Matrix2<f64>,
    c_inv_eta: Vector2<f64>,
    rho_r: Matrix2<f64>,
    init: HnlmState,
}

#[derive(Clone, Debug)]
pub struct HnlmState {
    pub phi: Vec<Vector2<f64>>,
    pub mu: Vector2<f64>,
    pub sigma: Matrix2<f64>,
    pub sigma2: f64,
}

/// Parameters read back from a recorded state vector.
struct View<'a> {
    x: &'a [f64],
    l: usize,
}

impl View<'_> {
    fn phi(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.x[2 * i], self.x[2 * i + 1])
    }
    fn mu(&self) -> Vector2<f64> {
        Vector2::new(self.x[2 * self.l], self.x[2 * self.l + 1])
    }
    fn sigma(&self) -> Matrix2<f64> {
        let o = 2 * self.l + 2;
        Matrix2::new(self.x[o], self.x[o + 1], self.x[o + 1], self.x[o + 2])
    }
    fn sigma2(&self) -> f64 {
        self.x[2 * self.l + 5]
    }
}

fn inverse(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > 0.0 && m[(0, 0)] > 0.0) || !det.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

fn draw_mvn(mean: &Vector2<f64>, cov: &Matrix2<f64>, rng: &mut RngStream) -> Result<Vector2<f64>> {
    let l = cov.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    Ok(mean + l * z)
}

/// Bartlett draw from the 2x2 Wishart with scale `s` and `df` degrees of freedom.
fn draw_wishart(s: &Matrix2<f64>, df: f64, rng: &mut RngStream) -> Result<Matrix2<f64>> {
    let l = s.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let chi = |k: f64, rng: &mut RngStream| -> Result<f64> {
        let d = ChiSquared::new(k).map_err(|e| Error::Invalid(format!("wishart: {e}")))?;
        Ok(rng.sample(d))
    };
    let c1 = chi(df, rng)?.sqrt();
    let c2 = chi(df - 1.0, rng)?.sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let a = Matrix2::new(c1, 0.0, z, c2);
    let la = l * a;
    Ok(la * la.transpose())
}

impl HnlmSampler {
    pub fn new(config: HnlmConfig, data: HnlmData) -> Result<Self> {
        let l = data.units();
        if l == 0 {
            return Err(Error::Empty("hierarchical model data"));
        }
        if data.x.len() != l {
            return Err(Error::Dimension {
                expected: l,
                got: data.x.len(),
            });
        }
        if !(config.nu0 > 0.0 && config.tau0_sq > 0.0 && config.rho > 1.0) {
            return Err(Error::Invalid("need nu0 > 0, tau0^2 > 0 and rho > 1".into()));
        }
        // the inverse-Wishart mean used by the bundled PG needs l + rho > 3
        if l as f64 + config.rho <= 3.0 {
            return Err(Error::Invalid("l + rho must exceed 3".into()));
        }
        let mut units = Vec::with_capacity(l);
        for (xs, ys) in data.x.iter().zip(&data.y) {
            if xs.len() != ys.len() {
                return Err(Error::Dimension {
                    expected: xs.len(),
                    got: ys.len(),
                });
            }
            if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                return Err(Error::Invalid("hierarchical model data must be finite".into()));
            }
            let mut xtx = Matrix2::zeros();
            let mut xty = Vector2::zeros();
            let mut yty = 0.0;
            for (&x, &y) in xs.iter().zip(ys) {
                let row = Vector2::new(1.0, x);
                xtx += row * row.transpose();
                xty += row * y;
                yty += y * y;
            }
            units.push(Unit { xtx, xty, yty });
        }
        let c_inv = inverse(&mat(&config.c))?;
        let rho_r = mat(&config.r) * config.rho;
        inverse(&rho_r)?;
        let mut sampler = Self {
            c_inv_eta: c_inv * Vector2::new(config.eta[0], config.eta[1]),
            c_inv,
            rho_r,
            total_obs: data.observations() as f64,
            units,
            config,
            init: HnlmState {
                phi: vec![],
                mu: Vector2::zeros(),
                sigma: Matrix2::identity(),
                sigma2: 1.0,
            },
        };
        sampler.init = sampler.least_squares_start(&data)?;
        Ok(sampler)
    }

    pub fn units(&self) -> usize {
        self.units.len()
    }

    /// Per-unit least squares for `phi_i`, their average for `mu_c`, the
    /// `Sigma_c` conditional mean around it, and the pooled residual variance.
    fn least_squares_start(&self, data: &HnlmData) -> Result<HnlmState> {
        let l = self.units.len();
        let mut phi = Vec::with_capacity(l);
        for u in &self.units {
            let inv =
                inverse(&u.xtx).map_err(|_| Error::Invalid("each unit needs two distinct covariate values".into()))?;
            phi.push(inv * u.xty);
        }
        let mu = phi.iter().sum::<Vector2<f64>>() / l as f64;
        let sigma = self.psi(&phi, &mu) / (l as f64 + self.config.rho - 3.0);
        let sse = self.sse(&phi);
        let dof = data.observations() as f64 - 2.0 * l as f64;
        let sigma2 = if dof > 0.0 && sse > 0.0 {
            sse / dof
        } else {
            self.config.tau0_sq
        };
        Ok(HnlmState { phi, mu, sigma, sigma2 })
    }

    fn psi<'a>(&self, phi: impl IntoIterator<Item = &'a Vector2<f64>>, mu: &Vector2<f64>) -> Matrix2<f64> {
        let mut psi = self.rho_r;
        for p in phi {
            let d = p - mu;
            psi += d * d.transpose();
        }
        psi
    }

    fn sse<'a>(&self, phi: impl IntoIterator<Item = &'a Vector2<f64>>) -> f64 {
        self.units
            .iter()
            .zip(phi)
            .map(|(u, p)| u.yty - 2.0 * p.dot(&u.xty) + (p.transpose() * u.xtx * p)[(0, 0)])
            .sum::<f64>()
            .max(0.0)
    }

    /// Mean and covariance of the `phi_i` conditional.
    fn phi_law(
        &self,
        i: usize,
        sigma_inv: &Matrix2<f64>,
        mu: &Vector2<f64>,
        sigma2: f64,
    ) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let u = &self.units[i];
        let d = inverse(&(u.xtx / sigma2 + sigma_inv))?;
        Ok((d * (u.xty / sigma2 + sigma_inv * mu), d))
    }

    /// Mean and covariance of the `mu_c` conditional.
    fn mu_law(&self, sigma_inv: &Matrix2<f64>, phi_sum: &Vector2<f64>) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let v = inverse(&(sigma_inv * self.units.len() as f64 + self.c_inv))?;
        Ok((v * (sigma_inv * phi_sum + self.c_inv_eta), v))
    }

    fn sigma_df(&self) -> f64 {
        self.units.len() as f64 + self.config.rho
    }

    /// Shape and rate of the `s^2` inverse-gamma conditional.
    fn sigma2_law(&self, sse: f64) -> (f64, f64) {
        (
            0.5 * (self.config.nu0 + self.total_obs),
            0.5 * (self.config.nu0 * self.config.tau0_sq + sse),
        )
    }

    fn view<'a>(&self, x: &'a [f64]) -> View<'a> {
        View { x, l: self.units.len() }
    }

    /// `PG_j` for the coordinate basis; `NaN` when the state is not valid.
    pub fn coordinate_pg(&self, x: &[f64], j: usize) -> f64 {
        self.try_coordinate_pg(x, j).unwrap_or(f64::NAN)
    }

    fn try_coordinate_pg(&self, x: &[f64], j: usize) -> Result<f64> {
        let v = self.view(x);
        let l = v.l;
        let conditional = if j < 2 * l {
            let sigma_inv = inverse(&v.sigma())?;
            let (m, _) = self.phi_law(j / 2, &sigma_inv, &v.mu(), v.sigma2())?;
            m[j % 2]
        } else if j < 2 * l + 2 {
            let sigma_inv = inverse(&v.sigma())?;
            let sum: Vector2<f64> = (0..l).map(|i| v.phi(i)).sum();
            let (m, _) = self.mu_law(&sigma_inv, &sum)?;
            m[j - 2 * l]
        } else if j < 2 * l + 5 {
            let phi: Vec<Vector2<f64>> = (0..l).map(|i| v.phi(i)).collect();
            let mean = self.psi(&phi, &v.mu()) / (self.sigma_df() - 3.0);
            match j - 2 * l - 2 {
                0 => mean[(0, 0)],
                1 => mean[(0, 1)],
                _ => mean[(1, 1)],
            }
        } else {
            let phi: Vec<Vector2<f64>> = (0..l).map(|i| v.phi(i)).collect();
            let (a, b) = self.sigma2_law(self.sse(&phi));
            b / (a - 1.0)
        };
        Ok(0.75 * x[j] + 0.25 * conditional)
    }

    /// Functionals `alpha_c`, `beta_c` and the one-based coordinates `x<j>`.
    pub fn functional(&self, id: &str) -> Option<Functional> {
        let off = 2 * self.units.len();
        match id {
            "alpha_c" => Some(Functional::new("alpha_c", move |x| x[off])),
            "beta_c" => Some(Functional::new("beta_c", move |x| x[off + 1])),
            _ => coordinate_id(id, self.dim()).map(Functional::coordinate),
        }
    }

    /// `coordinates`: every recorded coordinate with its one-step mean.
    pub fn basis(self: &Arc<Self>, id: &str) -> Option<BasisSet> {
        (id == "coordinates").then(|| {
            (0..self.dim())
                .map(|j| {
                    let s = Arc::clone(self);
                    BasisFunction::new(format!("x{}", j + 1), move |x| x[j], move |x| s.coordinate_pg(x, j))
                })
                .collect()
        })
    }
}

/// One random-scan update of a single block.
pub fn hnlm_gibbs_step(sampler: &HnlmSampler, state: &mut HnlmState, rng: &mut RngStream) -> Result<()> {
    match rng.index(4) {
        0 => {
            let sigma_inv = inverse(&state.sigma)?;
            for i in 0..sampler.units.len() {
                let (m, d) = sampler.phi_law(i, &sigma_inv, &state.mu, state.sigma2)?;
                state.phi[i] = draw_mvn(&m, &d, rng)?;
            }
        }
        1 => {
            let sigma_inv = inverse(&state.sigma)?;
            let sum: Vector2<f64> = state.phi.iter().sum();
            let (m, v) = sampler.mu_law(&sigma_inv, &sum)?;
            state.mu = draw_mvn(&m, &v, rng)?;
        }
        2 => {
            let psi = sampler.psi(&state.phi, &state.mu);
            let precision = draw_wishart(&inverse(&psi)?, sampler.sigma_df(), rng)?;
            let sigma = inverse(&precision)?;
            // symmetrize against rounding so the recorded off-diagonal is unique
            let off = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
            state.sigma = Matrix2::new(sigma[(0, 0)], off, off, sigma[(1, 1)]);
            inverse(&state.sigma)?;
        }
        _ => {
            let (a, b) = sampler.sigma2_law(sampler.sse(&state.phi));
            state.sigma2 = inverse_gamma(a, b, rng)?;
        }
    }
    Ok(())
}

impl Kernel for HnlmSampler {
    type State = HnlmState;

    fn dim(&self) -> usize {
        2 * self.units.len() + 6
    }

    fn initial_state(&self) -> HnlmState {
        self.init.clone()
    }

    fn step(&self, state: &mut HnlmState, rng: &mut RngStream) -> Result<()> {
        hnlm_gibbs_step(self, state, rng)
    }

    fn observe(&self, state: &HnlmState, out: &mut [f64]) {
        let l = self.units.len();
        for (i, p) in state.phi.iter().enumerate() {
            out[2 * i] = p[0];
            out[2 * i + 1] = p[1];
        }
        out[2 * l] = state.mu[0];
        out[2 * l + 1] = state.mu[1];
        out[2 * l + 2] = state.sigma[(0, 0)];
        out[2 * l + 3] = state.sigma[(0, 1)];
        out[2 * l + 4] = state.sigma[(1, 1)];
        out[2 * l + 5] = state.sigma2;
    }
}
