//! Replication harness: runs independent chains, computes every requested
//! estimator at each checkpoint, and reports variance-reduction factors
//! `VRF = var(Plain) / var(method)` from the replication variances
//! `1/(T-1) sum_i (mu_i - mean)^2`.
//!
//! Replication `r` uses stream `r` of the master seed, and results are
//! assembled by replication index, so reports do not depend on the number of
//! workers.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coeff::{batch_means_estimate, CoefficientMethod, MomentAccumulator};
use crate::error::{Error, Result};
use crate::panel::{evaluate_row, BasisSet, ControlVariatePanel, Functional};
use crate::rng::{RngStream, ALGORITHM};
use crate::samplers::{Model, SamplerSpec};

/// Largest tolerated fraction of failed (replication, checkpoint, method)
/// cells before a run is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Estimator used for a report row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Plain,
    K,
    Gamma,
    BatchMeans(usize),
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Plain => "Plain",
            Method::K => "K",
            Method::Gamma => "Gamma",
            Method::BatchMeans(_) => "BatchMeans",
        }
    }

    pub fn lag(&self) -> Option<usize> {
        match self {
            Method::BatchMeans(m) => Some(*m),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::BatchMeans(m) => write!(f, "BatchMeans(M={m})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub sampler: SamplerSpec,
    pub functional: String,
    pub basis: String,
    pub checkpoints: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub ridge: bool,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Invalid("at least two replications are needed".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Invalid("no checkpoints".into()));
        }
        if self.checkpoints[0] == 0 || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "checkpoints must be positive and strictly increasing".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods".into()));
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        *self.checkpoints.last().unwrap_or(&0)
    }

    /// Methods in report order: `Plain` first (added if absent), then the
    /// requested ones without duplicates.
    pub fn report_methods(&self) -> Vec<Method> {
        let mut out = vec![Method::Plain];
        for m in &self.methods {
            if !out.contains(m) {
                out.push(*m);
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One `(checkpoint, method)` cell of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub checkpoint: usize,
    pub method: Method,
    pub mean: f64,
    pub variance: f64,
    pub vrf: f64,
    pub failures: usize,
    /// Successful replication estimates in replication order.
    pub estimates: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VrfReport {
    pub plan: ExperimentPlan,
    pub plan_hash: String,
    pub rng_algorithm: String,
    pub master_seed: u64,
    /// Replication `r` used stream index `r`.
    pub stream_indices: Vec<u64>,
    pub workers: usize,
    pub wall_time_secs: f64,
    pub rows: Vec<MethodSummary>,
}

impl VrfReport {
    pub fn row(&self, checkpoint: usize, method: Method) -> Option<&MethodSummary> {
        self.rows
            .iter()
            .find(|r| r.checkpoint == checkpoint && r.method == method)
    }

    pub fn vrf(&self, checkpoint: usize, method: Method) -> Option<f64> {
        self.row(checkpoint, method).map(|r| r.vrf)
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }

    /// `checkpoint,method,M,mean,variance,vrf,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["checkpoint", "method", "M", "mean", "variance", "vrf", "failures"])?;
        for r in &self.rows {
            w.write_record([
                r.checkpoint.to_string(),
                r.method.label().to_string(),
                r.method.lag().map(|m| m.to_string()).unwrap_or_default(),
                format!("{:.16e}", r.mean),
                format!("{:.16e}", r.variance),
                format!("{:.16e}", r.vrf),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Fixed-width table for terminals.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:>10}  {:<18} {:>16} {:>14} {:>10} {:>8}\n",
            "n", "method", "mean", "variance", "VRF", "failed"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>10}  {:<18} {:>16.8} {:>14.4e} {:>10.3} {:>8}\n",
                r.checkpoint,
                r.method.to_string(),
                r.mean,
                r.variance,
                r.vrf,
                r.failures
            ));
        }
        s
    }
}

/// `[checkpoint][method]` estimates of one replication.
type ReplicationResult = Vec<Vec<Option<f64>>>;

struct Setup {
    model: Model,
    functional: Functional,
    basis: BasisSet,
    methods: Vec<Method>,
}

fn setup(plan: &ExperimentPlan) -> Result<Setup> {
    plan.validate()?;
    let model = plan.sampler.build()?;
    let functional = model.functional(&plan.functional)?;
    let basis = model.basis(&plan.basis)?;
    Ok(Setup {
        model,
        functional,
        basis,
        methods: plan.report_methods(),
    })
}

fn coefficient_method(m: Method) -> Option<CoefficientMethod> {
    match m {
        Method::Plain => None,
        Method::K => Some(CoefficientMethod::K),
        Method::Gamma => Some(CoefficientMethod::Gamma),
        Method::BatchMeans(l) => Some(CoefficientMethod::BatchMeans(l)),
    }
}

/// Runs replication `r` and evaluates every method at every checkpoint.
///
/// A non-finite evaluation or sampler error fails the whole replication; a
/// singular coefficient solve fails only that `(checkpoint, method)` cell.
fn run_one(plan: &ExperimentPlan, s: &Setup, r: usize) -> ReplicationResult {
    let n_cp = plan.checkpoints.len();
    let failed = || vec![vec![None; s.methods.len()]; n_cp];
    let mut rng = RngStream::new(plan.master_seed, r as u64);
    let mut chain = s.model.chain();
    for _ in 0..s.model.burn_in() {
        if chain.step(&mut rng).is_err() {
            return failed();
        }
    }
    let k = s.basis.len();
    let d = chain.dim();
    let need_panel = s.methods.iter().any(|m| matches!(m, Method::BatchMeans(_)));
    let max_n = plan.max_steps();
    let mut panel = need_panel.then(|| ControlVariatePanel::with_capacity(max_n, k));
    let mut acc = MomentAccumulator::new(k);
    let (mut x, mut g, mut pg) = (vec![0.0; d], vec![0.0; k], vec![0.0; k]);
    let mut out = Vec::with_capacity(n_cp);
    let mut next = 0;
    for step in 0..max_n {
        if chain.step(&mut rng).is_err() {
            return failed();
        }
        chain.observe(&mut x);
        let f = match evaluate_row(&x, step, &s.functional, &s.basis, &mut g, &mut pg) {
            Ok(f) => f,
            Err(_) => return failed(),
        };
        acc.push(f, &g, &pg);
        if let Some(p) = panel.as_mut() {
            p.push_row(f, &g, &pg);
        }
        if step + 1 == plan.checkpoints[next] {
            out.push(evaluate_checkpoint(plan, s, &acc, panel.as_ref()));
            next += 1;
        }
    }
    out
}

fn evaluate_checkpoint(
    plan: &ExperimentPlan,
    s: &Setup,
    acc: &MomentAccumulator,
    panel: Option<&ControlVariatePanel>,
) -> Vec<Option<f64>> {
    let Ok(moments) = acc.moments() else {
        return vec![None; s.methods.len()];
    };
    s.methods
        .iter()
        .map(|&m| {
            let value = match coefficient_method(m) {
                None => Ok(moments.mean_f),
                Some(CoefficientMethod::BatchMeans(lag)) => panel
                    .ok_or(Error::Unsupported("batch means needs the full panel"))
                    .and_then(|p| batch_means_estimate(p, lag, plan.ridge))
                    .map(|e| e.value),
                Some(cm) => moments.theta(cm, plan.ridge).map(|th| moments.modified(&th.theta)),
            };
            value.ok().filter(|v| v.is_finite())
        })
        .collect()
}

fn summarize(plan: &ExperimentPlan, methods: &[Method], results: &[ReplicationResult]) -> Result<Vec<MethodSummary>> {
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (c, &checkpoint) in plan.checkpoints.iter().enumerate() {
        let mut plain_var = f64::NAN;
        for (mi, &method) in methods.iter().enumerate() {
            let estimates: Vec<f64> = results.iter().filter_map(|r| r[c][mi]).collect();
            let failed = results.len() - estimates.len();
            failures += failed;
            let t = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / t;
            let variance = if estimates.len() >= 2 {
                estimates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0)
            } else {
                f64::NAN
            };
            if method == Method::Plain {
                plain_var = variance;
            }
            rows.push(MethodSummary {
                checkpoint,
                method,
                mean,
                variance,
                vrf: if method == Method::Plain {
                    1.0
                } else {
                    plain_var / variance
                },
                failures: failed,
                estimates,
            });
        }
    }
    let total = results.len() * plan.checkpoints.len() * methods.len();
    if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total,
        });
    }
    Ok(rows)
}

/// Runs `plan.replications` independent chains on a pool of `workers`
/// threads (0 = one per core).
pub fn run_replications(plan: &ExperimentPlan, workers: usize) -> Result<VrfReport> {
    let start = Instant::now();
    let s = setup(plan)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    let results: Vec<ReplicationResult> = pool.install(|| {
        (0..plan.replications)
            .into_par_iter()
            .map(|r| run_one(plan, &s, r))
            .collect()
    });
    let rows = summarize(plan, &s.methods, &results)?;
    Ok(VrfReport {
        plan: plan.clone(),
        plan_hash: plan.hash(),
        rng_algorithm: ALGORITHM.to_string(),
        master_seed: plan.master_seed,
        stream_indices: (0..plan.replications as u64).collect(),
        workers: pool.current_num_threads(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        rows,
    })
}

/// Runs the plan with `Plain`, `K` and one batch-means method per lag.
///
/// A lag too large for a checkpoint fails every replication at that
/// checkpoint, which surfaces as a failure-threshold error.
pub fn compare_batch_means(plan: &ExperimentPlan, lags: &[usize], workers: usize) -> Result<VrfReport> {
    let mut p = plan.clone();
    p.methods = [Method::Plain, Method::K]
        .into_iter()
        .chain(lags.iter().map(|&m| Method::BatchMeans(m)))
        .collect();
    run_replications(&p, workers)
}
