//! Run configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mcmc_cv::experiments::{ExperimentPlan, Method};
use mcmc_cv::samplers::SamplerSpec;
use serde::{Deserialize, Serialize};

/// An experiment plan plus where to put its reports. Unknown keys are
/// rejected so that typos fail loudly instead of silently using defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base name for output files; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub sampler: SamplerSpec,
    pub functional: String,
    pub basis: String,
    pub checkpoints: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub ridge: bool,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Report paths, relative to `--out` unless absolute.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("run")
    }

    /// The experiment plan with command-line overrides applied, validated
    /// against the sampler (functional and basis must exist).
    pub fn plan(&self, seed: Option<u64>, ridge: bool) -> anyhow::Result<ExperimentPlan> {
        let plan = ExperimentPlan {
            sampler: self.sampler.clone(),
            functional: self.functional.clone(),
            basis: self.basis.clone(),
            checkpoints: self.checkpoints.clone(),
            replications: self.replications,
            master_seed: seed.unwrap_or(self.master_seed),
            methods: self.methods.clone(),
            ridge: self.ridge || ridge,
        };
        plan.validate()?;
        for m in &plan.methods {
            if let Method::BatchMeans(lag) = m {
                if plan.checkpoints[0] <= 2 * lag + 1 {
                    bail!("batch means with M={lag} needs every checkpoint above {}", 2 * lag + 1);
                }
            }
        }
        let model = plan.sampler.build()?;
        model.functional(&plan.functional)?;
        model.basis(&plan.basis)?;
        Ok(plan)
    }

    pub fn csv_path(&self, out: &Path) -> PathBuf {
        resolve(out, self.outputs.csv.as_deref(), &format!("{}.csv", self.name()))
    }

    pub fn json_path(&self, out: &Path) -> PathBuf {
        resolve(out, self.outputs.json.as_deref(), &format!("{}.json", self.name()))
    }
}

fn resolve(out: &Path, given: Option<&Path>, default: &str) -> PathBuf {
    match given {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => out.join(p),
        None => out.join(default),
    }
}
