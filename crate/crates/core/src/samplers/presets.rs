//! Sampler specifications for the bundled examples.

use super::{DataSource, DiscreteTarget, HnlmConfig, SamplerSpec, SamplerVariant};
use crate::gaussian::GaussianTarget;

/// Bivariate normal with correlation 0.99 and variances 10, started at
/// `(0.5, 0.5)`.
pub fn bivariate_gibbs() -> SamplerSpec {
    SamplerSpec::new(SamplerVariant::GaussianGibbs {
        target: GaussianTarget::bivariate(0.99, 10.0).expect("valid target"),
        init: vec![0.5, 0.5],
    })
}

/// Hierarchical growth model on synthetic data drawn with `data_seed`.
pub fn hierarchical(data_seed: u64) -> SamplerSpec {
    SamplerSpec::new(SamplerVariant::Hnlm {
        config: HnlmConfig::default(),
        data: DataSource::Synthetic(data_seed),
    })
}

/// Cauchy / inverse-gamma location model on 100 synthetic `N(2, 4)` values.
pub fn cauchy_ig(data_seed: u64) -> SamplerSpec {
    SamplerSpec::new(SamplerVariant::CauchyIg {
        data: DataSource::Synthetic(data_seed),
    })
}

/// Two-component mixture on 500 synthetic observations.
pub fn mixture(data_seed: u64) -> SamplerSpec {
    SamplerSpec::new(SamplerVariant::Mixture {
        data: DataSource::Synthetic(data_seed),
    })
}

/// Random-walk Metropolis on the toy 10x10 lattice, started at its mode.
pub fn toy_lattice() -> SamplerSpec {
    let target = DiscreteTarget::toy();
    let top = target.modes(1)[0];
    let start = [top / target.width(), top % target.width()];
    SamplerSpec::new(SamplerVariant::DiscreteMh { target, start })
}
