use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use mcmc_cv::coeff::{estimate, CoefficientMethod};
use mcmc_cv::experiments::{compare_batch_means, run_replications, ExperimentPlan, VrfReport};
use mcmc_cv::gaussian::{poisson_coefficients, poisson_residual, GaussianTarget, TargetSpec};
use mcmc_cv::io::{read_panel, read_trajectory, write_panel, write_trajectory};
use mcmc_cv::panel::{ergodic_average, evaluate_panel, ControlVariatePanel};
use mcmc_cv::samplers::run_chain;
use mcmc_cv::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::Failure;

pub struct Globals {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub ridge: bool,
    pub dry_run: bool,
}

impl Globals {
    fn workers(&self, cfg: &RunConfig) -> usize {
        self.workers.or(cfg.workers).unwrap_or(0)
    }
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Either `{"mean": [...], "cov": [[...]]}` or a bare covariance matrix.
#[derive(Deserialize)]
#[serde(untagged)]
enum CovInput {
    Target(TargetSpec),
    Matrix(Vec<Vec<f64>>),
}

fn parse_target(arg: &str) -> anyhow::Result<GaussianTarget> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    let parsed: CovInput = serde_json::from_str(&text).context("covariance must be a JSON matrix or {mean, cov}")?;
    let spec = match parsed {
        CovInput::Target(t) => t,
        CovInput::Matrix(cov) => TargetSpec {
            mean: vec![0.0; cov.len()],
            cov,
        },
    };
    Ok(GaussianTarget::try_from(spec)?)
}

/// Prints the Poisson coefficients of coordinate `coordinate` (1-based) and
/// the largest residual of the Poisson equation over 100 random states.
pub fn theorem1(g: &Globals, cov: &str, coordinate: usize) -> Result<(), Failure> {
    let target = parse_target(cov).map_err(input)?;
    let d = target.dim();
    if coordinate == 0 || coordinate > d {
        return Err(input(anyhow!("coordinate must be in 1..={d}")));
    }
    let pc = poisson_coefficients(&target, coordinate - 1).map_err(input)?;
    let mut rng = RngStream::new(g.seed.unwrap_or(0), 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..d)
            .map(|j| target.mean()[j] + 10.0 * target.cov()[(j, j)].sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(poisson_residual(&target, &pc, &x).abs() / (1.0 + norm));
    }
    let theta: Vec<String> = pc.theta.iter().map(|t| format!("{t:.10}")).collect();
    println!("theta = [{}]", theta.join(", "));
    println!("condition = {:.3e}", pc.condition);
    println!("max |residual| / (1 + |x|) over 100 states = {worst:.3e}");
    if worst < 1e-9 {
        Ok(())
    } else {
        Err(runtime(anyhow!("residual {worst:.3e} exceeds 1e-9")))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)
}

/// Runs one chain (stream 0 of the seed) and writes its trajectory and,
/// optionally, its control-variate panel.
pub fn sample(g: &Globals, config: &Path, steps: usize, panel: bool) -> Result<(), Failure> {
    let cfg = RunConfig::load(config).map_err(input)?;
    let plan = cfg.plan(g.seed, g.ridge).map_err(input)?;
    let traj_path = g.out.join(format!("{}_trajectory.csv", cfg.name()));
    let panel_path = g.out.join(format!("{}_panel.csv", cfg.name()));
    if g.dry_run {
        println!(
            "would run {} for {steps} steps after {} burn-in (seed {}) and write {}",
            plan.sampler.id(),
            plan.sampler.burn_in,
            plan.master_seed,
            traj_path.display()
        );
        return Ok(());
    }
    if steps == 0 {
        return Err(input(anyhow!("--steps must be positive")));
    }
    let model = plan.sampler.build().map_err(input)?;
    let mut rng = RngStream::new(plan.master_seed, 0);
    let traj = run_chain(model.chain().as_mut(), steps, model.burn_in(), &mut rng, model.id()).map_err(runtime)?;
    let mut w = create(&traj_path)?;
    write_trajectory(&traj, &mut w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    println!("wrote {}", traj_path.display());
    if panel {
        let f = model.functional(&plan.functional).map_err(input)?;
        let basis = model.basis(&plan.basis).map_err(input)?;
        let p = evaluate_panel(&traj, &f, &basis).map_err(runtime)?;
        let mut w = create(&panel_path)?;
        write_panel(&p, &mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
        println!("wrote {}", panel_path.display());
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(input)
}

/// Plain and control-variate estimates from a stored panel, or from a
/// trajectory whose sampler, functional and basis come from `config`.
pub fn estimate_cmd(
    g: &Globals,
    panel: Option<&Path>,
    trajectory: Option<&Path>,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let p: ControlVariatePanel = match (panel, trajectory, config) {
        (Some(path), None, None) => read_panel(open(path)?).map_err(input)?,
        (None, Some(path), Some(cfg_path)) => {
            let cfg = RunConfig::load(cfg_path).map_err(input)?;
            let model = cfg.sampler.build().map_err(input)?;
            let traj = read_trajectory(open(path)?, model.id(), cfg.master_seed, model.burn_in()).map_err(input)?;
            if traj.dim() != model.dim() {
                return Err(input(anyhow!(
                    "trajectory has {} coordinates but sampler {} records {}",
                    traj.dim(),
                    model.id(),
                    model.dim()
                )));
            }
            let f = model.functional(&cfg.functional).map_err(input)?;
            let basis = model.basis(&cfg.basis).map_err(input)?;
            evaluate_panel(&traj, &f, &basis).map_err(input)?
        }
        _ => return Err(input(anyhow!("give either --panel, or --trajectory with --config"))),
    };
    if g.dry_run {
        println!("panel: {} rows, {} control variates", p.rows(), p.k());
        return Ok(());
    }
    let plain = ergodic_average(p.f()).map_err(input)?;
    println!("n = {}", p.rows());
    println!("plain    {plain:.12e}");
    // identically zero control variates leave the plain average unchanged
    let degenerate = (0..p.rows()).all(|t| p.u_row(t).iter().all(|&u| u == 0.0));
    let mut failed = None;
    for method in [CoefficientMethod::K, CoefficientMethod::Gamma] {
        if degenerate {
            println!(
                "{:<8} {plain:.12e}  theta = {:?}  (all control variates are zero)",
                method.label(),
                vec![0.0; p.k()]
            );
            continue;
        }
        match estimate(&p, method, g.ridge) {
            Ok(e) => println!(
                "{:<8} {:.12e}  theta = {:?}  condition = {:.3e}",
                method.label(),
                e.value,
                e.theta.theta,
                e.theta.condition
            ),
            Err(err) => {
                println!("{:<8} failed: {err}", method.label());
                failed = Some(err);
            }
        }
    }
    match failed {
        Some(err) => Err(runtime(err)),
        None => Ok(()),
    }
}

fn emit(g: &Globals, cfg: &RunConfig, report: &VrfReport) -> Result<(), Failure> {
    let csv_path = cfg.csv_path(&g.out);
    let json_path = cfg.json_path(&g.out);
    let mut w = create(&csv_path)?;
    report.write_csv(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    let mut w = create(&json_path)?;
    report.write_json(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    print!("{}", report.summary_table());
    println!(
        "{} replications, {} workers, {:.1}s; wrote {} and {}",
        report.plan.replications,
        report.workers,
        report.wall_time_secs,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

fn print_plan(plan: &ExperimentPlan) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(plan).map_err(runtime)?);
    println!("plan hash: {}", plan.hash());
    Ok(())
}

pub fn experiment(g: &Globals, config: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::load(config).map_err(input)?;
    let plan = cfg.plan(g.seed, g.ridge).map_err(input)?;
    if g.dry_run {
        return print_plan(&plan);
    }
    let report = run_replications(&plan, g.workers(&cfg)).map_err(runtime)?;
    emit(g, &cfg, &report)
}

pub fn compare(g: &Globals, config: &Path, lags: &[usize]) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config).map_err(input)?;
    if lags.is_empty() {
        return Err(input(anyhow!("at least one lag is needed")));
    }
    cfg.methods = lags
        .iter()
        .map(|&m| mcmc_cv::experiments::Method::BatchMeans(m))
        .collect();
    let plan = cfg.plan(g.seed, g.ridge).map_err(input)?;
    if g.dry_run {
        return print_plan(&plan);
    }
    let report = compare_batch_means(&plan, lags, g.workers(&cfg)).map_err(runtime)?;
    emit(g, &cfg, &report)
}
