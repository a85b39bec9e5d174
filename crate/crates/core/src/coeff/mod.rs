//! Estimation of the control-variate coefficient vector and the modified
//! estimators of `pi(F)`.
//!
//! For a reversible chain the optimal coefficients solve
//! `M theta = cov_pi(F, G + PG)` where `M` is either the covariance `K(G)` of
//! the one-step innovations `G(X_1) - PG(X_0)` or the equal matrix
//! `Gamma(G) = pi(G G' - PG PG')`. Both have empirical counterparts computed
//! from one panel.

mod batch;
mod running;

pub use batch::{batch_means_estimate, default_tail_lag, tail_gap_estimate, theta_batch_means};
pub use running::{MomentAccumulator, Moments};

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::panel::ControlVariatePanel;

/// Which matrix or series is used to estimate the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoefficientMethod {
    /// Lagged innovation covariance `K_n(G)`.
    K,
    /// `Gamma_n(G) = mu_n(G G' - PG PG')`.
    Gamma,
    /// Truncated cross-covariance series with lag `M`.
    BatchMeans(usize),
}

impl CoefficientMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::K => "K",
            Self::Gamma => "Gamma",
            Self::BatchMeans(_) => "BatchMeans",
        }
    }

    pub fn lag(&self) -> Option<usize> {
        match self {
            Self::BatchMeans(m) => Some(*m),
            _ => None,
        }
    }
}

/// An estimated coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientEstimate {
    pub theta: Vec<f64>,
    pub method: CoefficientMethod,
    pub n_used: usize,
    /// Condition estimate of the solved matrix.
    pub condition: f64,
}

impl CoefficientEstimate {
    /// The zero vector, which turns the modified estimator into the plain average.
    pub fn zero(k: usize, method: CoefficientMethod, n_used: usize) -> Self {
        Self {
            theta: vec![0.0; k],
            method,
            n_used,
            condition: 1.0,
        }
    }
}

impl Serialize for CoefficientEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CoefficientEstimate", 4)?;
        st.serialize_field("method", self.method.label())?;
        st.serialize_field("M", &self.method.lag())?;
        st.serialize_field("theta", &self.theta)?;
        st.serialize_field("condition", &self.condition)?;
        st.end()
    }
}

/// A modified estimate of `pi(F)` alongside the plain ergodic average.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub value: f64,
    pub theta: CoefficientEstimate,
    pub plain_average: f64,
}

fn require_rows(panel: &ControlVariatePanel, min: usize) -> Result<usize> {
    let n = panel.rows();
    if n < min {
        return Err(Error::TooShort { n, lag: 0 });
    }
    Ok(n)
}

/// `K_n(G)_ij = 1/(n-1) sum_{t=1}^{n-1} (g_i(X_t) - pg_i(X_{t-1})) (g_j(X_t) - pg_j(X_{t-1}))`.
pub fn lagged_k_matrix(panel: &ControlVariatePanel) -> Result<DMatrix<f64>> {
    let n = require_rows(panel, 2)?;
    let k = panel.k();
    let mut m = DMatrix::zeros(k, k);
    let mut y = vec![0.0; k];
    for t in 1..n {
        let g = panel.g_row(t);
        let pg = panel.pg_row(t - 1);
        for j in 0..k {
            y[j] = g[j] - pg[j];
        }
        for a in 0..k {
            for b in a..k {
                m[(a, b)] += y[a] * y[b];
            }
        }
    }
    fill_lower(&mut m);
    Ok(m / (n - 1) as f64)
}

/// `Gamma_n(G)_ij = mu_n(g_i g_j - pg_i pg_j)`.
pub fn gamma_matrix(panel: &ControlVariatePanel) -> Result<DMatrix<f64>> {
    let n = require_rows(panel, 1)?;
    let k = panel.k();
    let mut m = DMatrix::zeros(k, k);
    for t in 0..n {
        let g = panel.g_row(t);
        let pg = panel.pg_row(t);
        for a in 0..k {
            for b in a..k {
                m[(a, b)] += g[a] * g[b] - pg[a] * pg[b];
            }
        }
    }
    fill_lower(&mut m);
    Ok(m / n as f64)
}

pub(crate) fn fill_lower(m: &mut DMatrix<f64>) {
    for a in 0..m.nrows() {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
}

/// `b_j = mu_n(f (g_j + pg_j)) - mu_n(f) mu_n(g_j + pg_j)`, computed in
/// centered two-pass form.
pub fn cross_moment(panel: &ControlVariatePanel) -> Result<Vec<f64>> {
    let n = require_rows(panel, 1)?;
    let k = panel.k();
    let f_mean = panel.f().iter().sum::<f64>() / n as f64;
    let mut h_mean = vec![0.0; k];
    for t in 0..n {
        for (j, h) in h_mean.iter_mut().enumerate() {
            *h += panel.g(t, j) + panel.pg(t, j);
        }
    }
    h_mean.iter_mut().for_each(|h| *h /= n as f64);
    let mut b = vec![0.0; k];
    for t in 0..n {
        let fc = panel.f()[t] - f_mean;
        for j in 0..k {
            b[j] += fc * (panel.g(t, j) + panel.pg(t, j) - h_mean[j]);
        }
    }
    b.iter_mut().for_each(|v| *v /= n as f64);
    Ok(b)
}

pub(crate) fn solve_coefficients(
    matrix: &DMatrix<f64>,
    rhs: &[f64],
    method: CoefficientMethod,
    n_used: usize,
    ridge: bool,
) -> Result<CoefficientEstimate> {
    let b = DVector::from_column_slice(rhs);
    let solved = solve_symmetric(matrix, &b, ridge)?;
    Ok(CoefficientEstimate {
        theta: solved.x.iter().copied().collect(),
        method,
        n_used,
        condition: solved.condition,
    })
}

/// `theta_hat_{n,K}` or `theta_hat_{n,Gamma}`.
pub fn theta_hat(panel: &ControlVariatePanel, method: CoefficientMethod, ridge: bool) -> Result<CoefficientEstimate> {
    let matrix = match method {
        CoefficientMethod::K => lagged_k_matrix(panel)?,
        CoefficientMethod::Gamma => gamma_matrix(panel)?,
        CoefficientMethod::BatchMeans(m) => return theta_batch_means(panel, m, ridge),
    };
    let b = cross_moment(panel)?;
    solve_coefficients(&matrix, &b, method, panel.rows(), ridge)
}

pub(crate) fn modified_value(mean_f: f64, mean_u: &[f64], theta: &[f64]) -> f64 {
    mean_f - theta.iter().zip(mean_u).map(|(t, u)| t * u).sum::<f64>()
}

/// `mu_n(F) - <theta, mu_n(U)>`.
pub fn modified_estimate(panel: &ControlVariatePanel, theta: CoefficientEstimate) -> Result<EstimateResult> {
    if theta.theta.len() != panel.k() {
        return Err(Error::Dimension {
            expected: panel.k(),
            got: theta.theta.len(),
        });
    }
    if theta.theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("coefficients must be finite".into()));
    }
    let n = require_rows(panel, 1)?;
    let plain = panel.f().iter().sum::<f64>() / n as f64;
    let mean_u = panel.u_means();
    Ok(EstimateResult {
        value: modified_value(plain, &mean_u, &theta.theta),
        theta,
        plain_average: plain,
    })
}

/// Estimates the coefficients with `method` and applies them.
pub fn estimate(panel: &ControlVariatePanel, method: CoefficientMethod, ridge: bool) -> Result<EstimateResult> {
    let theta = theta_hat(panel, method, ridge)?;
    modified_estimate(panel, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(f: &[f64], g: &[f64], pg: &[f64]) -> ControlVariatePanel {
        ControlVariatePanel::scalar(f.to_vec(), g.to_vec(), pg.to_vec()).unwrap()
    }

    #[test]
    fn k_matrix_hand_value() {
        let p = scalar(&[0.0; 3], &[1.0, 2.0, 4.0], &[1.0, 1.0, 3.0]);
        // ((2-1)^2 + (4-1)^2) / 2
        assert_eq!(lagged_k_matrix(&p).unwrap()[(0, 0)], 5.0);
    }

    #[test]
    fn gamma_matrix_hand_value() {
        let p = scalar(&[0.0; 2], &[1.0, 3.0], &[0.0, 2.0]);
        assert_eq!(gamma_matrix(&p).unwrap()[(0, 0)], 3.0);
    }

    #[test]
    fn cross_moment_hand_value() {
        let p = scalar(&[1.0, 2.0], &[0.0, 2.0], &[0.0, 0.0]);
        assert!((cross_moment(&p).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_basis_gives_zero_matrices_and_singular_solve() {
        let p = ControlVariatePanel::new(
            vec![1.0, 4.0, 2.0],
            vec![2.0, -1.0, 2.0, -1.0, 2.0, -1.0],
            vec![2.0, -1.0, 2.0, -1.0, 2.0, -1.0],
            2,
        )
        .unwrap();
        assert_eq!(lagged_k_matrix(&p).unwrap().amax(), 0.0);
        assert_eq!(gamma_matrix(&p).unwrap().amax(), 0.0);
        assert!(matches!(
            theta_hat(&p, CoefficientMethod::K, false),
            Err(Error::Singular { .. })
        ));
        // any theta leaves the plain average untouched
        let th = CoefficientEstimate {
            theta: vec![3.0, -7.0],
            ..CoefficientEstimate::zero(2, CoefficientMethod::K, 3)
        };
        let r = modified_estimate(&p, th).unwrap();
        assert_eq!(r.value, r.plain_average);
    }

    #[test]
    fn constant_f_gives_zero_cross_moment() {
        let p = scalar(&[2.5; 4], &[1.0, 3.0, -2.0, 0.5], &[0.1, 0.2, 0.3, 0.4]);
        assert!(cross_moment(&p).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn zero_theta_returns_plain_average() {
        let p = scalar(&[1.0, 2.0, 6.0], &[1.0, 0.0, 2.0], &[0.5, 0.5, 0.5]);
        let r = modified_estimate(&p, CoefficientEstimate::zero(1, CoefficientMethod::K, 3)).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.plain_average, 3.0);
    }

    #[test]
    fn duplicate_basis_is_singular() {
        let g = [0.3, -1.2, 0.8, 2.0, -0.4, 1.1];
        let pg = [0.1, -0.2, 0.5, 0.9, 0.0, 0.3];
        let mut gg = Vec::new();
        let mut pp = Vec::new();
        for i in 0..6 {
            gg.extend([g[i], g[i]]);
            pp.extend([pg[i], pg[i]]);
        }
        let p = ControlVariatePanel::new(vec![1.0, 0.0, 2.0, 3.0, -1.0, 0.5], gg, pp, 2).unwrap();
        for m in [CoefficientMethod::K, CoefficientMethod::Gamma] {
            match theta_hat(&p, m, false) {
                Err(Error::Singular { condition }) => assert!(condition > 1e12),
                other => panic!("expected singular, got {other:?}"),
            }
        }
        assert!(theta_hat(&p, CoefficientMethod::K, true).is_ok());
    }

    #[test]
    fn coefficient_json_shape() {
        let e = CoefficientEstimate {
            theta: vec![1.5, -2.0],
            method: CoefficientMethod::BatchMeans(20),
            n_used: 10,
            condition: 3.0,
        };
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v["method"], "BatchMeans");
        assert_eq!(v["M"], 20);
        assert_eq!(v["theta"][1], -2.0);
        let k = CoefficientEstimate::zero(1, CoefficientMethod::K, 1);
        let v: serde_json::Value = serde_json::to_value(&k).unwrap();
        assert!(v["M"].is_null());
        assert_eq!(v["method"], "K");
    }
}
