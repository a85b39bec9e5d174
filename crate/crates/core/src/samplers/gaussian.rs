//! Random-scan Gibbs sampler for a multivariate normal target.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{coordinate_id, Kernel};
use crate::error::{Error, Result};
use crate::gaussian::{coordinate_conditional, gibbs_coordinate_expectation, GaussianTarget};
use crate::panel::{BasisFunction, BasisSet, Functional};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct GaussianGibbsSampler {
    target: GaussianTarget,
    init: Vec<f64>,
}

impl GaussianGibbsSampler {
    pub fn new(target: GaussianTarget, init: Vec<f64>) -> Result<Self> {
        if init.len() != target.dim() {
            return Err(Error::Dimension {
                expected: target.dim(),
                got: init.len(),
            });
        }
        Ok(Self { target, init })
    }

    pub fn target(&self) -> &GaussianTarget {
        &self.target
    }

    /// Functionals `x<j>` (one-based coordinates).
    pub fn functional(&self, id: &str) -> Option<Functional> {
        coordinate_id(id, self.target.dim()).map(Functional::coordinate)
    }

    /// `coordinates`: `G_j(x) = x_j` for every `j`.
    pub fn basis(&self, id: &str) -> Option<BasisSet> {
        (id == "coordinates").then(|| coordinate_basis(&self.target))
    }
}

/// `G_j(x) = x_j` paired with the random-scan Gibbs one-step mean.
pub fn coordinate_basis(target: &GaussianTarget) -> BasisSet {
    (0..target.dim())
        .map(|j| {
            let t = target.clone();
            BasisFunction::new(
                format!("x{}", j + 1),
                move |x| x[j],
                move |x| gibbs_coordinate_expectation(&t, x, j),
            )
        })
        .collect()
}

/// One random-scan Gibbs update of `x` in place.
pub fn gaussian_gibbs_step(target: &GaussianTarget, x: &mut [f64], rng: &mut RngStream) {
    let j = rng.index(target.dim());
    let (m, v) = coordinate_conditional(target, x, j);
    let z: f64 = rng.sample(StandardNormal);
    x[j] = m + v.sqrt() * z;
}

impl Kernel for GaussianGibbsSampler {
    type State = Vec<f64>;

    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn step(&self, state: &mut Vec<f64>, rng: &mut RngStream) -> Result<()> {
        gaussian_gibbs_step(&self.target, state, rng);
        Ok(())
    }

    fn observe(&self, state: &Vec<f64>, out: &mut [f64]) {
        out.copy_from_slice(state);
    }
}
