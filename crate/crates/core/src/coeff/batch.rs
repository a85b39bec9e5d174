//! Batch-means (truncated series) coefficient estimates and the tail
//! diagnostic for their variance gap.

use super::{
    gamma_matrix, modified_estimate, solve_coefficients, CoefficientEstimate, CoefficientMethod, EstimateResult,
};
use crate::error::{Error, Result};
use crate::panel::ControlVariatePanel;

/// Truncated cross-covariance vector
/// `c_j = sum_{l=-M}^{M} 1/(n-2M) sum_{i=M}^{n-M-1} f_i u_{i+l,j}`
/// (zero-based indices), computed with prefix sums over `u`.
fn truncated_cross(panel: &ControlVariatePanel, lag: usize) -> Vec<f64> {
    let n = panel.rows();
    let k = panel.k();
    let mut out = vec![0.0; k];
    let mut prefix = vec![0.0; n + 1];
    for (j, o) in out.iter_mut().enumerate() {
        for t in 0..n {
            prefix[t + 1] = prefix[t] + panel.u(t, j);
        }
        let mut acc = 0.0;
        for i in lag..n - lag {
            let window = prefix[i + lag + 1] - prefix[i - lag];
            acc += panel.f()[i] * window;
        }
        *o = acc / (n - 2 * lag) as f64;
    }
    out
}

/// `theta_tilde_{n,M}`: the truncated series divided by `Gamma_n(G)`.
///
/// For one basis function this is the scalar ratio; for several the
/// denominator is the matrix `Gamma_n(G)` and the numerator the vector of
/// truncated cross-covariances.
pub fn theta_batch_means(panel: &ControlVariatePanel, lag: usize, ridge: bool) -> Result<CoefficientEstimate> {
    let n = panel.rows();
    if n <= 2 * lag + 1 {
        return Err(Error::TooShort { n, lag });
    }
    let num = truncated_cross(panel, lag);
    let den = gamma_matrix(panel)?;
    solve_coefficients(&den, &num, CoefficientMethod::BatchMeans(lag), n, ridge)
}

/// `mu_tilde_{n,M}(F)`.
pub fn batch_means_estimate(panel: &ControlVariatePanel, lag: usize, ridge: bool) -> Result<EstimateResult> {
    let theta = theta_batch_means(panel, lag, ridge)?;
    modified_estimate(panel, theta)
}

/// Outer truncation used when none is given: `min(1000, n/10)`.
pub fn default_tail_lag(n: usize) -> usize {
    (n / 10).min(1000)
}

/// Plug-in estimate of the variance excess of batch-means with lag `M` over
/// the optimal coefficient: `(sum_{M < |l| <= J} C(l))^2 / sigma_U^2`, where
/// `C(l)` is the empirical cross-covariance of `F(X_i)` and `U(X_{i+l})`.
///
/// This is a diagnostic, not an unbiased estimator. `F` is centered at its
/// sample mean, which leaves each `C(l)` unchanged in the limit since
/// `pi(U) = 0`.
pub fn tail_gap_estimate(panel: &ControlVariatePanel, lag: usize, max_lag: usize) -> Result<f64> {
    if panel.k() != 1 {
        return Err(Error::Unsupported("tail gap needs a single basis function"));
    }
    if lag >= max_lag {
        return Ok(0.0);
    }
    let n = panel.rows();
    if n <= 2 * max_lag + 1 {
        return Err(Error::TooShort { n, lag: max_lag });
    }
    let sigma_u2 = gamma_matrix(panel)?[(0, 0)];
    if !(sigma_u2 > 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let f_mean = panel.f().iter().sum::<f64>() / n as f64;
    let fc: Vec<f64> = panel.f().iter().map(|v| v - f_mean).collect();
    let u: Vec<f64> = (0..n).map(|t| panel.u(t, 0)).collect();
    let range = max_lag..n - max_lag;
    let len = range.len() as f64;
    let mut tail = 0.0;
    for l in lag + 1..=max_lag {
        let mut c = 0.0;
        for i in range.clone() {
            c += fc[i] * (u[i + l] + u[i - l]);
        }
        tail += c / len;
    }
    Ok(tail * tail / sigma_u2)
}
