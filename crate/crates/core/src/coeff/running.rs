//! Running sufficient statistics for the K and Gamma estimators, so that a
//! replication can report estimates at many checkpoints in one pass.

use nalgebra::DMatrix;

use super::{fill_lower, modified_value, solve_coefficients, CoefficientEstimate, CoefficientMethod};
use crate::error::{Error, Result};

/// Accumulates rows `(f, g, pg)` in chain order.
///
/// Sums are kept relative to the first row (`f - f_0`, `g - g_0`,
/// `pg - g_0`) to limit cancellation when means are large relative to the
/// spread. `K` and the cross moment are invariant under that shift; `Gamma`
/// is corrected on read-out.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    k: usize,
    n: usize,
    f0: f64,
    g0: Vec<f64>,
    sum_f: f64,
    sum_h: Vec<f64>,
    sum_fh: Vec<f64>,
    sum_u: Vec<f64>,
    sum_gamma: Vec<f64>,
    sum_k: Vec<f64>,
    prev_pg: Vec<f64>,
    scratch_g: Vec<f64>,
    scratch_pg: Vec<f64>,
}

/// Moments of a chain prefix.
#[derive(Clone, Debug)]
pub struct Moments {
    pub n: usize,
    pub mean_f: f64,
    pub mean_u: Vec<f64>,
    /// `mu_n(f (g + pg)) - mu_n(f) mu_n(g + pg)`.
    pub cross: Vec<f64>,
    pub gamma: DMatrix<f64>,
    /// `None` until two rows have been seen.
    pub k_matrix: Option<DMatrix<f64>>,
}

impl MomentAccumulator {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            n: 0,
            f0: 0.0,
            g0: vec![0.0; k],
            sum_f: 0.0,
            sum_h: vec![0.0; k],
            sum_fh: vec![0.0; k],
            sum_u: vec![0.0; k],
            sum_gamma: vec![0.0; k * k],
            sum_k: vec![0.0; k * k],
            prev_pg: vec![0.0; k],
            scratch_g: vec![0.0; k],
            scratch_pg: vec![0.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, f: f64, g: &[f64], pg: &[f64]) {
        let k = self.k;
        debug_assert_eq!(g.len(), k);
        debug_assert_eq!(pg.len(), k);
        if self.n == 0 {
            self.f0 = f;
            self.g0.copy_from_slice(g);
        }
        let fs = f - self.f0;
        self.sum_f += fs;
        for j in 0..k {
            let gs = g[j] - self.g0[j];
            let ps = pg[j] - self.g0[j];
            self.scratch_g[j] = gs;
            self.scratch_pg[j] = ps;
            let h = gs + ps;
            self.sum_h[j] += h;
            self.sum_fh[j] += fs * h;
            self.sum_u[j] += g[j] - pg[j];
        }
        for a in 0..k {
            let (ga, pa) = (self.scratch_g[a], self.scratch_pg[a]);
            let row = &mut self.sum_gamma[a * k..(a + 1) * k];
            for b in a..k {
                row[b] += ga * self.scratch_g[b] - pa * self.scratch_pg[b];
            }
        }
        if self.n > 0 {
            // innovation y_t = g(X_t) - pg(X_{t-1}); prev_pg holds the shifted pg of X_{t-1}
            for j in 0..k {
                self.scratch_pg[j] = self.scratch_g[j] - self.prev_pg[j];
            }
            for a in 0..k {
                let ya = self.scratch_pg[a];
                let row = &mut self.sum_k[a * k..(a + 1) * k];
                for b in a..k {
                    row[b] += ya * self.scratch_pg[b];
                }
            }
        }
        for j in 0..k {
            self.prev_pg[j] = pg[j] - self.g0[j];
        }
        self.n += 1;
    }

    pub fn moments(&self) -> Result<Moments> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Empty("moment accumulator"));
        }
        let k = self.k;
        let nf = n as f64;
        let mean_fs = self.sum_f / nf;
        let mean_u: Vec<f64> = self.sum_u.iter().map(|s| s / nf).collect();
        let cross = (0..k)
            .map(|j| self.sum_fh[j] / nf - mean_fs * self.sum_h[j] / nf)
            .collect();
        let mut gamma = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                gamma[(a, b)] = self.sum_gamma[a * k + b] / nf + self.g0[a] * mean_u[b] + self.g0[b] * mean_u[a];
            }
        }
        fill_lower(&mut gamma);
        let k_matrix = (n >= 2).then(|| {
            let mut m = DMatrix::zeros(k, k);
            for a in 0..k {
                for b in a..k {
                    m[(a, b)] = self.sum_k[a * k + b] / (n - 1) as f64;
                }
            }
            fill_lower(&mut m);
            m
        });
        Ok(Moments {
            n,
            mean_f: self.f0 + mean_fs,
            mean_u,
            cross,
            gamma,
            k_matrix,
        })
    }
}

impl Moments {
    /// Coefficients from the K or Gamma matrix of this prefix.
    pub fn theta(&self, method: CoefficientMethod, ridge: bool) -> Result<CoefficientEstimate> {
        let matrix = match method {
            CoefficientMethod::K => self.k_matrix.as_ref().ok_or(Error::TooShort { n: self.n, lag: 0 })?,
            CoefficientMethod::Gamma => &self.gamma,
            CoefficientMethod::BatchMeans(_) => return Err(Error::Unsupported("batch means needs the full panel")),
        };
        solve_coefficients(matrix, &self.cross, method, self.n, ridge)
    }

    pub fn modified(&self, theta: &[f64]) -> f64 {
        modified_value(self.mean_f, &self.mean_u, theta)
    }
}
