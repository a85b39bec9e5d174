//! Reversible MCMC kernels bundled with exact one-step expectations for
//! their recommended basis functions.
//!
//! Every kernel is a random-scan sampler: each step picks one block
//! uniformly and redraws it from its full conditional (or applies a
//! symmetric-proposal Metropolis update). The recorded state of a kernel is a
//! real vector from which every bundled `PG` can be evaluated.

pub mod cauchy_ig;
pub mod data;
pub mod discrete;
pub mod gaussian;
pub mod hnlm;
pub mod mixture;
pub mod presets;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianTarget;
use crate::panel::{BasisSet, Functional, Trajectory};
use crate::rng::RngStream;

pub use cauchy_ig::CauchyIgSampler;
pub use data::{generate_synthetic_data, DataSource, Dataset, SyntheticExample};
pub use discrete::{discrete_mh_expectation, DiscreteMhSampler, DiscreteTarget};
pub use gaussian::GaussianGibbsSampler;
pub use hnlm::{HnlmConfig, HnlmData, HnlmSampler};
pub use mixture::{expected_min_normals, order_probability, MixtureConfig, MixtureSampler};

/// Default number of discarded leading steps.
pub const DEFAULT_BURN_IN: usize = 1000;

/// A Markov kernel with an internal state and a recorded projection of it.
pub trait Kernel: Send + Sync + 'static {
    type State: Clone + Send + 'static;

    /// Length of the recorded state vector.
    fn dim(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    fn step(&self, state: &mut Self::State, rng: &mut RngStream) -> Result<()>;

    fn observe(&self, state: &Self::State, out: &mut [f64]);
}

/// A running chain, type-erased over its kernel.
pub trait Chain: Send {
    fn dim(&self) -> usize;
    fn step(&mut self, rng: &mut RngStream) -> Result<()>;
    fn observe(&self, out: &mut [f64]);
    fn boxed_clone(&self) -> Box<dyn Chain>;
}

struct KernelChain<K: Kernel> {
    kernel: Arc<K>,
    state: K::State,
}

impl<K: Kernel> Chain for KernelChain<K> {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<()> {
        self.kernel.step(&mut self.state, rng)
    }

    fn observe(&self, out: &mut [f64]) {
        self.kernel.observe(&self.state, out)
    }

    fn boxed_clone(&self) -> Box<dyn Chain> {
        Box::new(KernelChain {
            kernel: Arc::clone(&self.kernel),
            state: self.state.clone(),
        })
    }
}

/// Starts a chain at the kernel's initial state.
pub fn start_chain<K: Kernel>(kernel: Arc<K>) -> Box<dyn Chain> {
    let state = kernel.initial_state();
    Box::new(KernelChain { kernel, state })
}

/// Runs `burn_in` discarded steps, then records `n` states.
pub fn run_chain(
    chain: &mut dyn Chain,
    n: usize,
    burn_in: usize,
    rng: &mut RngStream,
    sampler_id: &str,
) -> Result<Trajectory> {
    for _ in 0..burn_in {
        chain.step(rng)?;
    }
    let d = chain.dim();
    let mut data = vec![0.0; n * d];
    for row in data.chunks_exact_mut(d) {
        chain.step(rng)?;
        chain.observe(row);
    }
    Trajectory::from_rows(data, d, sampler_id, rng.master_seed(), burn_in)
}

/// Monte-Carlo estimate of `E[G_j(X_1) | X_0 = chain state]` for every basis
/// function, from `m` independent one-step transitions.
#[derive(Clone, Debug)]
pub struct OneStepCheck {
    pub name: String,
    pub exact: f64,
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_error: f64,
}

impl OneStepCheck {
    /// `|mean - exact| / std_error`; zero-variance cases compare exactly.
    pub fn z_score(&self) -> f64 {
        let diff = (self.mean - self.exact).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff <= 1e-12 * (1.0 + self.exact.abs()) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn one_step_check(chain: &dyn Chain, basis: &BasisSet, m: usize, rng: &mut RngStream) -> Result<Vec<OneStepCheck>> {
    let d = chain.dim();
    let mut x0 = vec![0.0; d];
    chain.observe(&mut x0);
    let k = basis.len();
    let mut sum = vec![0.0; k];
    let mut sum2 = vec![0.0; k];
    let mut x1 = vec![0.0; d];
    for _ in 0..m {
        let mut c = chain.boxed_clone();
        c.step(rng)?;
        c.observe(&mut x1);
        for (j, b) in basis.functions().iter().enumerate() {
            // center on G(x0) to keep the variance sum well conditioned
            let v = b.g(&x1) - b.g(&x0);
            sum[j] += v;
            sum2[j] += v * v;
        }
    }
    let mf = m as f64;
    Ok(basis
        .functions()
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let mean = sum[j] / mf;
            let var = (sum2[j] / mf - mean * mean).max(0.0) * mf / (mf - 1.0);
            OneStepCheck {
                name: b.name().to_string(),
                exact: b.pg(&x0),
                mean: mean + b.g(&x0),
                std_error: (var / mf).sqrt(),
            }
        })
        .collect())
}

/// Sampler configuration: the kernel variant plus burn-in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub variant: SamplerVariant,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerVariant {
    GaussianGibbs {
        target: GaussianTarget,
        init: Vec<f64>,
    },
    Hnlm {
        #[serde(default)]
        config: HnlmConfig,
        data: DataSource<HnlmData>,
    },
    CauchyIg {
        data: DataSource<Vec<f64>>,
    },
    Mixture {
        data: DataSource<Vec<f64>>,
    },
    DiscreteMh {
        target: DiscreteTarget,
        start: [usize; 2],
    },
}

impl SamplerSpec {
    pub fn new(variant: SamplerVariant) -> Self {
        Self {
            variant,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn id(&self) -> &'static str {
        match self.variant {
            SamplerVariant::GaussianGibbs { .. } => "gaussian_gibbs",
            SamplerVariant::Hnlm { .. } => "hnlm",
            SamplerVariant::CauchyIg { .. } => "cauchy_ig",
            SamplerVariant::Mixture { .. } => "mixture",
            SamplerVariant::DiscreteMh { .. } => "discrete_mh",
        }
    }

    pub fn build(&self) -> Result<Model> {
        let kind = match &self.variant {
            SamplerVariant::GaussianGibbs { target, init } => {
                ModelKind::Gaussian(Arc::new(GaussianGibbsSampler::new(target.clone(), init.clone())?))
            }
            SamplerVariant::Hnlm { config, data } => {
                ModelKind::Hnlm(Arc::new(HnlmSampler::new(config.clone(), data.resolve())?))
            }
            SamplerVariant::CauchyIg { data } => ModelKind::CauchyIg(Arc::new(CauchyIgSampler::new(
                data.resolve(SyntheticExample::CauchyIg),
            )?)),
            SamplerVariant::Mixture { data } => {
                let data = data.resolve(SyntheticExample::Mixture);
                ModelKind::Mixture(Arc::new(MixtureSampler::new(MixtureConfig::from_data(&data)?, data)?))
            }
            SamplerVariant::DiscreteMh { target, start } => {
                ModelKind::Discrete(Arc::new(DiscreteMhSampler::new(target.clone(), *start)?))
            }
        };
        Ok(Model {
            id: self.id(),
            burn_in: self.burn_in,
            kind,
        })
    }
}

#[derive(Clone)]
enum ModelKind {
    Gaussian(Arc<GaussianGibbsSampler>),
    Hnlm(Arc<HnlmSampler>),
    CauchyIg(Arc<CauchyIgSampler>),
    Mixture(Arc<MixtureSampler>),
    Discrete(Arc<DiscreteMhSampler>),
}

/// A built sampler with its named functionals and basis sets.
#[derive(Clone)]
pub struct Model {
    id: &'static str,
    burn_in: usize,
    kind: ModelKind,
}

impl Model {
    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::Gaussian(k) => k.dim(),
            ModelKind::Hnlm(k) => k.dim(),
            ModelKind::CauchyIg(k) => k.dim(),
            ModelKind::Mixture(k) => k.dim(),
            ModelKind::Discrete(k) => k.dim(),
        }
    }

    pub fn chain(&self) -> Box<dyn Chain> {
        match &self.kind {
            ModelKind::Gaussian(k) => start_chain(Arc::clone(k)),
            ModelKind::Hnlm(k) => start_chain(Arc::clone(k)),
            ModelKind::CauchyIg(k) => start_chain(Arc::clone(k)),
            ModelKind::Mixture(k) => start_chain(Arc::clone(k)),
            ModelKind::Discrete(k) => start_chain(Arc::clone(k)),
        }
    }

    pub fn functional(&self, id: &str) -> Result<Functional> {
        let found = match &self.kind {
            ModelKind::Gaussian(k) => k.functional(id),
            ModelKind::Hnlm(k) => k.functional(id),
            ModelKind::CauchyIg(k) => k.functional(id),
            ModelKind::Mixture(k) => k.functional(id),
            ModelKind::Discrete(k) => k.functional(id),
        };
        found.ok_or_else(|| Error::Invalid(format!("unknown functional '{id}' for sampler {}", self.id)))
    }

    pub fn basis(&self, id: &str) -> Result<BasisSet> {
        let found = match &self.kind {
            ModelKind::Gaussian(k) => k.basis(id),
            ModelKind::Hnlm(k) => k.basis(id),
            ModelKind::CauchyIg(k) => k.basis(id),
            ModelKind::Mixture(k) => k.basis(id),
            ModelKind::Discrete(k) => k.basis(id),
        };
        found.ok_or_else(|| Error::Invalid(format!("unknown basis '{id}' for sampler {}", self.id)))
    }

    pub fn basis_ids(&self) -> &'static [&'static str] {
        match &self.kind {
            ModelKind::Gaussian(_) => &["coordinates"],
            ModelKind::Hnlm(_) => &["coordinates"],
            ModelKind::CauchyIg(_) => &["v"],
            ModelKind::Mixture(_) => &["ordered", "coordinates"],
            ModelKind::Discrete(_) => &["modes"],
        }
    }
}

/// Parses a one-based coordinate functional id of the form `x<j>`.
pub(crate) fn coordinate_id(id: &str, dim: usize) -> Option<usize> {
    let j: usize = id.strip_prefix('x')?.parse().ok()?;
    (1..=dim).contains(&j).then(|| j - 1)
}
