//! Exact Poisson-equation solution for the random-scan Gibbs sampler on a
//! multivariate normal target.
//!
//! For `pi = N(mu, Sigma)` with precision `Q`, let `A_ij = -Q_ij / Q_ii`
//! (`A_ii = 0`). The coordinate functional `F(x) = x_i` has Poisson solution
//! `H(x) = sum_j theta_j x_j` with `theta` equal to row `i` of `d (I - A)^-1`.
//! All coordinate indices in this module are zero-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_inverse, spd_inverse};

/// A nondegenerate multivariate normal target with cached precision and
/// interaction matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpec", into = "TargetSpec")]
pub struct GaussianTarget {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    interaction: DMatrix<f64>,
}

/// JSON form `{"mean":[...],"cov":[[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl TryFrom<TargetSpec> for GaussianTarget {
    type Error = Error;

    fn try_from(spec: TargetSpec) -> Result<Self> {
        let d = spec.mean.len();
        if spec.cov.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: spec.cov.len(),
            });
        }
        let mut flat = Vec::with_capacity(d * d);
        for row in &spec.cov {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        GaussianTarget::new(spec.mean, DMatrix::from_row_slice(d, d, &flat))
    }
}

impl From<GaussianTarget> for TargetSpec {
    fn from(t: GaussianTarget) -> Self {
        let d = t.dim();
        TargetSpec {
            cov: (0..d).map(|i| (0..d).map(|j| t.cov[(i, j)]).collect()).collect(),
            mean: t.mean,
        }
    }
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("gaussian mean"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("gaussian parameters must be finite".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let precision = spd_inverse(&cov)?;
        let residual = (&precision * &cov - DMatrix::identity(d, d)).amax();
        if !(residual <= 1e-10) {
            return Err(Error::NotPositiveDefinite);
        }
        // symmetrize the cached precision so that A is built from an exactly symmetric Q
        let precision = (&precision + precision.transpose()) * 0.5;
        if (0..d).any(|i| !(precision[(i, i)] > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let interaction = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                0.0
            } else {
                -precision[(i, j)] / precision[(i, i)]
            }
        });
        Ok(Self {
            mean,
            cov,
            precision,
            interaction,
        })
    }

    /// Zero-mean bivariate normal with unit first variance, second variance
    /// `tau2` and correlation `rho`.
    pub fn bivariate(rho: f64, tau2: f64) -> Result<Self> {
        let tau = tau2.sqrt();
        Self::new(
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, rho * tau, rho * tau, tau2]),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

/// Coefficients of the linear Poisson solution for coordinate `coordinate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonCoefficients {
    pub coordinate: usize,
    pub theta: Vec<f64>,
    /// 1-norm condition number of `I - A`.
    pub condition: f64,
}

/// `A_ij = -Q_ij / Q_ii` off the diagonal, zero on it.
pub fn interaction_matrix(target: &GaussianTarget) -> DMatrix<f64> {
    target.interaction.clone()
}

pub fn poisson_coefficients(target: &GaussianTarget, i: usize) -> Result<PoissonCoefficients> {
    let d = target.dim();
    if i >= d {
        return Err(Error::Invalid(format!("coordinate {i} out of range for dimension {d}")));
    }
    let m = DMatrix::identity(d, d) - &target.interaction;
    let (inv, condition) = lu_inverse(&m)?;
    let theta = inv.row(i).iter().map(|v| d as f64 * v).collect();
    Ok(PoissonCoefficients {
        coordinate: i,
        theta,
        condition,
    })
}

/// Full-conditional mean and variance of coordinate `j` given the others.
pub fn coordinate_conditional(target: &GaussianTarget, x: &[f64], j: usize) -> (f64, f64) {
    let mu = &target.mean;
    let a = &target.interaction;
    let mut mean = mu[j];
    for (l, (xl, ml)) in x.iter().zip(mu).enumerate() {
        if l != j {
            mean += a[(j, l)] * (xl - ml);
        }
    }
    (mean, 1.0 / target.precision[(j, j)])
}

/// `PG_j(x)` for `G_j(x) = x_j` under random-scan Gibbs.
pub fn gibbs_coordinate_expectation(target: &GaussianTarget, x: &[f64], j: usize) -> f64 {
    let d = target.dim() as f64;
    let (m, _) = coordinate_conditional(target, x, j);
    (d - 1.0) / d * x[j] + m / d
}

/// `PH(x) - H(x) + (x_i - mu_i)` for `H = sum_j theta_j x_j`; zero when
/// `pc` solves the Poisson equation.
pub fn poisson_residual(target: &GaussianTarget, pc: &PoissonCoefficients, x: &[f64]) -> f64 {
    let i = pc.coordinate;
    let mut ph = 0.0;
    let mut h = 0.0;
    for (j, th) in pc.theta.iter().enumerate() {
        ph += th * gibbs_coordinate_expectation(target, x, j);
        h += th * x[j];
    }
    ph - h + (x[i] - target.mean[i])
}
