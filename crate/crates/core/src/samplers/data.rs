//! Synthetic datasets for the bundled examples.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::hnlm::{HnlmConfig, HnlmData};
use crate::error::{Error, Result};
use crate::rng::{RngStream, DATA_STREAM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticExample {
    Hnlm,
    CauchyIg,
    Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dataset {
    Scalar(Vec<f64>),
    Grouped(HnlmData),
}

/// Inline data, or a seed from which the example's synthetic data is drawn
/// (on the reserved data stream of that seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource<T> {
    Inline(T),
    Synthetic(u64),
}

impl DataSource<HnlmData> {
    pub fn resolve(&self) -> HnlmData {
        match self {
            DataSource::Inline(d) => d.clone(),
            DataSource::Synthetic(seed) => {
                match generate_synthetic_data(SyntheticExample::Hnlm, &mut RngStream::new(*seed, DATA_STREAM)) {
                    Dataset::Grouped(d) => d,
                    Dataset::Scalar(_) => unreachable!("hierarchical data is grouped"),
                }
            }
        }
    }
}

impl DataSource<Vec<f64>> {
    /// Scalar data is shared by several examples, so the generator is named.
    pub fn resolve(&self, example: SyntheticExample) -> Vec<f64> {
        match self {
            DataSource::Inline(v) => v.clone(),
            DataSource::Synthetic(seed) => {
                match generate_synthetic_data(example, &mut RngStream::new(*seed, DATA_STREAM)) {
                    Dataset::Scalar(v) => v,
                    Dataset::Grouped(_) => unreachable!("scalar example"),
                }
            }
        }
    }
}

/// Units and measurements per unit of the hierarchical dataset.
pub const HNLM_UNITS: usize = 30;
pub const HNLM_OBSERVATIONS: usize = 5;

/// Measurement ages `8 + 7j`, `j = 0..5`.
pub fn hnlm_ages() -> Vec<f64> {
    (0..HNLM_OBSERVATIONS).map(|j| 8.0 + 7.0 * j as f64).collect()
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite positive scale")
}

/// Draws a dataset from the example's data-generating law.
///
/// * `CauchyIg`: 100 i.i.d. `N(2, 4)` values.
/// * `Mixture`: 500 values from `0.7 N(0, 0.5^2) + 0.3 N(0.1, 3^2)`.
/// * `Hnlm`: 30 units at ages `8, 15, 22, 29, 36`, with `phi_i ~ N(eta, R)`
///   and noise variance `tau0^2`, i.e. the population parameters fixed at
///   the centres of their default priors.
pub fn generate_synthetic_data(example: SyntheticExample, rng: &mut RngStream) -> Dataset {
    match example {
        SyntheticExample::CauchyIg => {
            let d = normal(2.0, 2.0);
            Dataset::Scalar((0..100).map(|_| d.sample(rng)).collect())
        }
        SyntheticExample::Mixture => {
            let (a, b) = (normal(0.0, 0.5), normal(0.1, 3.0));
            Dataset::Scalar(
                (0..500)
                    .map(|_| {
                        if rng.gen::<f64>() < 0.7 {
                            a.sample(rng)
                        } else {
                            b.sample(rng)
                        }
                    })
                    .collect(),
            )
        }
        SyntheticExample::Hnlm => {
            let cfg = HnlmConfig::default();
            let ages = hnlm_ages();
            let alpha = normal(cfg.eta[0], cfg.r[0][0].sqrt());
            let beta = normal(cfg.eta[1], cfg.r[1][1].sqrt());
            let noise = normal(0.0, cfg.tau0_sq.sqrt());
            let mut x = Vec::with_capacity(HNLM_UNITS);
            let mut y = Vec::with_capacity(HNLM_UNITS);
            for _ in 0..HNLM_UNITS {
                let (a, b) = (alpha.sample(rng), beta.sample(rng));
                y.push(ages.iter().map(|t| a + b * t + noise.sample(rng)).collect());
                x.push(ages.clone());
            }
            Dataset::Grouped(HnlmData { x, y })
        }
    }
}

/// Inverse-gamma draw with shape `a` and scale `b`.
pub(crate) fn inverse_gamma(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    let g = Gamma::new(a, 1.0 / b).map_err(|e| Error::Invalid(format!("inverse gamma: {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Writes a dataset as CSV: `y` for scalar data, `unit,x,y` for grouped data.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match dataset {
        Dataset::Scalar(v) => {
            w.write_record(["y"])?;
            for y in v {
                w.write_record([format!("{y:.16e}")])?;
            }
        }
        Dataset::Grouped(d) => {
            w.write_record(["unit", "x", "y"])?;
            for (i, (xs, ys)) in d.x.iter().zip(&d.y).enumerate() {
                for (x, y) in xs.iter().zip(ys) {
                    w.write_record([i.to_string(), format!("{x:.16e}"), format!("{y:.16e}")])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
