//! End-to-end acceptance suite.
//!
//! Every criterion prints one `criterion N: PASS|FAIL ...` line. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 3 7`. The worker pool width is
//! read from `MCMC_CV_WORKERS` (default: one per core).

use std::time::Instant;

use mcmc_cv::coeff::{CoefficientMethod, MomentAccumulator};
use mcmc_cv::experiments::{run_replications, ExperimentPlan, Method, VrfReport};
use mcmc_cv::gaussian::{poisson_coefficients, poisson_residual, GaussianTarget};
use mcmc_cv::panel::evaluate_row;
use mcmc_cv::samplers::{one_step_check, presets, DiscreteTarget, SamplerSpec, SamplerVariant};
use mcmc_cv::RngStream;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn workers() -> usize {
    std::env::var("MCMC_CV_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn plan(
    sampler: SamplerSpec,
    functional: &str,
    basis: &str,
    checkpoints: &[usize],
    t: usize,
    methods: &[Method],
) -> ExperimentPlan {
    ExperimentPlan {
        sampler,
        functional: functional.into(),
        basis: basis.into(),
        checkpoints: checkpoints.to_vec(),
        replications: t,
        master_seed: SEED,
        methods: methods.to_vec(),
        ridge: false,
    }
}

fn run(p: &ExperimentPlan) -> VrfReport {
    run_replications(p, workers()).expect("experiment runs")
}

fn vrf(report: &VrfReport, n: usize, m: Method) -> f64 {
    report.vrf(n, m).expect("row present")
}

fn normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

fn poisson_solution_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(SEED, 1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = 2 + rng.index(9);
        let a = DMatrix::from_fn(d, d, |_, _| normal(&mut rng));
        let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
        let mean: Vec<f64> = (0..d).map(|_| 5.0 * normal(&mut rng)).collect();
        let target = GaussianTarget::new(mean, cov).expect("SPD covariance");
        let coefficients: Vec<_> = (0..d).map(|i| poisson_coefficients(&target, i).unwrap()).collect();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| 10.0 * normal(&mut rng)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for pc in &coefficients {
                worst = worst.max(poisson_residual(&target, pc, &x).abs() / (1.0 + norm));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst < 1e-9 && secs < 1.0,
        format!("max |residual|/(1+|x|) = {worst:.2e} (< 1e-9), {secs:.3}s (< 1s)"),
    )
}

fn coefficient_consistency() -> Outcome {
    let start = Instant::now();
    let (rho, tau2): (f64, f64) = (0.99, 10.0);
    let spec = presets::bivariate_gibbs();
    let model = spec.build().unwrap();
    let f = model.functional("x1").unwrap();
    let basis = model.basis("coordinates").unwrap();
    let mut rng = RngStream::new(SEED, 0);
    let mut chain = model.chain();
    for _ in 0..model.burn_in() {
        chain.step(&mut rng).unwrap();
    }
    let mut acc = MomentAccumulator::new(2);
    let (mut x, mut g, mut pg) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for step in 0..500_000 {
        chain.step(&mut rng).unwrap();
        chain.observe(&mut x);
        let fv = evaluate_row(&x, step, &f, &basis, &mut g, &mut pg).unwrap();
        acc.push(fv, &g, &pg);
    }
    let oracle = [2.0 / (1.0 - rho * rho), 2.0 * rho / (tau2.sqrt() * (1.0 - rho * rho))];
    let target = GaussianTarget::bivariate(rho, tau2).unwrap();
    let library = poisson_coefficients(&target, 0).unwrap().theta;
    let m = acc.moments().unwrap();
    let mut pass = library.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-9 * b.abs());
    let mut parts = vec![format!("oracle θ = ({:.4}, {:.4})", oracle[0], oracle[1])];
    for method in [CoefficientMethod::K, CoefficientMethod::Gamma] {
        let th = m.theta(method, false).unwrap().theta;
        let rel: Vec<f64> = th.iter().zip(&oracle).map(|(a, b)| (a - b).abs() / b.abs()).collect();
        pass &= rel.iter().all(|r| *r < 0.05);
        parts.push(format!(
            "{}: ({:.4}, {:.4}) rel err ({:.2}%, {:.2}%)",
            method.label(),
            th[0],
            th[1],
            100.0 * rel[0],
            100.0 * rel[1]
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 30.0;
    parts.push(format!("{secs:.1}s"));
    Outcome::new(pass, parts.join("; "))
}

const VRF_GRID_N: [usize; 4] = [1_000, 10_000, 50_000, 500_000];
const REFERENCE_VRF: [f64; 4] = [4.13, 27.91, 122.4, 1196.6];

fn example1_report() -> VrfReport {
    run(&plan(
        presets::bivariate_gibbs(),
        "x1",
        "coordinates",
        &VRF_GRID_N,
        200,
        &[Method::K],
    ))
}

fn vrf_grid(report: &VrfReport) -> Outcome {
    let measured: Vec<f64> = VRF_GRID_N.iter().map(|&n| vrf(report, n, Method::K)).collect();
    let within = measured
        .iter()
        .zip(REFERENCE_VRF)
        .all(|(m, p)| *m >= p / 2.0 && *m <= p * 2.0);
    let increasing = measured.windows(2).all(|w| w[1] > w[0]);
    let cells: Vec<String> = VRF_GRID_N
        .iter()
        .zip(&measured)
        .zip(REFERENCE_VRF)
        .map(|((n, m), p)| format!("n={n}: {m:.2} (ref {p})"))
        .collect();
    Outcome::new(
        within && increasing,
        format!("{}; within x2: {within}; increasing: {increasing}", cells.join(", ")),
    )
}

fn example3() -> Outcome {
    let checkpoints = [10_000, 50_000, 100_000, 200_000];
    let report = run(&plan(
        presets::cauchy_ig(SEED),
        "V",
        "v",
        &checkpoints,
        100,
        &[Method::K],
    ));
    let values: Vec<f64> = checkpoints.iter().map(|&n| vrf(&report, n, Method::K)).collect();
    let cells: Vec<String> = checkpoints
        .iter()
        .zip(&values)
        .map(|(n, v)| format!("n={n}: {v:.2}"))
        .collect();
    Outcome::new(values.iter().all(|v| *v >= 4.0), format!("{} (>= 4)", cells.join(", ")))
}

fn example5() -> (Outcome, Outcome) {
    let ordered = run(&plan(
        presets::mixture(SEED),
        "min_mu",
        "ordered",
        &[10_000],
        100,
        &[Method::K],
    ));
    let coordinates = run(&plan(
        presets::mixture(SEED),
        "min_mu",
        "coordinates",
        &[10_000],
        100,
        &[Method::K],
    ));
    let a = vrf(&ordered, 10_000, Method::K);
    let b = vrf(&coordinates, 10_000, Method::K);
    (
        Outcome::new(a >= 8.0, format!("ordered basis VRF at n=10000: {a:.2} (>= 8)")),
        Outcome::new(b < 2.0, format!("coordinate basis VRF at n=10000: {b:.2} (< 2)")),
    )
}

fn example2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for functional in ["alpha_c", "beta_c"] {
        let report = run(&plan(
            presets::hierarchical(SEED),
            functional,
            "coordinates",
            &[10_000, 50_000],
            50,
            &[Method::K],
        ));
        let (a, b) = (vrf(&report, 10_000, Method::K), vrf(&report, 50_000, Method::K));
        pass &= a >= 3.0 && b >= 5.0;
        parts.push(format!("{functional}: {a:.2} at 1e4 (>= 3), {b:.2} at 5e4 (>= 5)"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn batch_means_gap() -> Outcome {
    let report = run(&plan(
        presets::bivariate_gibbs(),
        "x1",
        "coordinates",
        &[50_000],
        200,
        &[Method::K, Method::BatchMeans(20)],
    ));
    let k = vrf(&report, 50_000, Method::K);
    let bm = vrf(&report, 50_000, Method::BatchMeans(20));
    Outcome::new(
        k / bm >= 10.0,
        format!("VRF K = {k:.2}, BatchMeans(20) = {bm:.2}, ratio {:.1} (>= 10)", k / bm),
    )
}

fn k_gamma_agreement() -> Outcome {
    let (rho, tau2): (f64, f64) = (0.99, 10.0);
    let checkpoints = [1_000, 10_000, 100_000];
    let chains = 200;
    let mut sums = [0.0; 3];
    for c in 0..chains {
        let mut rng = RngStream::new(SEED, 10_000 + c as u64);
        // exact stationary start
        let x1 = tau2.sqrt() * normal(&mut rng);
        let x2 = rho * x1 + (tau2 * (1.0 - rho * rho)).sqrt() * normal(&mut rng);
        let spec = SamplerSpec::new(SamplerVariant::GaussianGibbs {
            target: GaussianTarget::bivariate(rho, tau2).unwrap(),
            init: vec![x1, x2],
        })
        .with_burn_in(0);
        let model = spec.build().unwrap();
        let f = model.functional("x1").unwrap();
        let basis = model.basis("coordinates").unwrap();
        let mut chain = model.chain();
        let mut acc = MomentAccumulator::new(2);
        let (mut x, mut g, mut pg) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        let mut next = 0;
        for step in 0..checkpoints[2] {
            chain.step(&mut rng).unwrap();
            chain.observe(&mut x);
            let fv = evaluate_row(&x, step, &f, &basis, &mut g, &mut pg).unwrap();
            acc.push(fv, &g, &pg);
            if step + 1 == checkpoints[next] {
                let m = acc.moments().unwrap();
                let k = m.k_matrix.expect("two or more rows");
                sums[next] += (&k - &m.gamma).norm() / m.gamma.norm();
                next += 1;
            }
        }
    }
    let avg: Vec<f64> = sums.iter().map(|s| s / chains as f64).collect();
    let decreasing = avg.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        decreasing && avg[2] < 0.05,
        format!(
            "mean |K-Γ|/|Γ| over {chains} chains: {:.4} / {:.4} / {:.4} at n = 1e3/1e4/1e5 (decreasing, last < 0.05)",
            avg[0], avg[1], avg[2]
        ),
    )
}

fn pg_oracle_suite() -> Outcome {
    let samplers = [
        presets::bivariate_gibbs(),
        presets::hierarchical(SEED),
        presets::cauchy_ig(SEED),
        presets::mixture(SEED),
        presets::toy_lattice(),
    ];
    let (mut checks, mut worst, mut worst_name) = (0usize, 0.0f64, String::new());
    let mut failures = Vec::new();
    for (s, spec) in samplers.iter().enumerate() {
        let model = spec.build().unwrap();
        let mut rng = RngStream::new(SEED, 20_000 + s as u64);
        let mut chain = model.chain();
        for _ in 0..model.burn_in() {
            chain.step(&mut rng).unwrap();
        }
        for state in 0..10 {
            // random spacing between the probed states
            for _ in 0..(1 + rng.index(200)) {
                chain.step(&mut rng).unwrap();
            }
            for id in model.basis_ids() {
                let basis = model.basis(id).unwrap();
                for c in one_step_check(chain.as_ref(), &basis, 1_000_000, &mut rng).unwrap() {
                    checks += 1;
                    let z = c.z_score();
                    let label = format!("{}/{id}/{} @ state {state}", model.id(), c.name);
                    if z > worst {
                        worst = z;
                        worst_name = label.clone();
                    }
                    if z > 3.0 {
                        // diagnostic only: an independent, larger re-run of the same state
                        let mut fresh = RngStream::new(SEED, 30_000 + checks as u64);
                        let again = one_step_check(chain.as_ref(), &basis, 10_000_000, &mut fresh)
                            .unwrap()
                            .into_iter()
                            .find(|r| r.name == c.name)
                            .map_or(f64::NAN, |r| r.z_score());
                        failures.push(format!("{label} z={z:.2} (independent m=1e7 re-run: z={again:.2})"));
                    }
                }
            }
        }
    }
    let mut detail = format!(
        "{checks} checks, max |z| = {worst:.2} ({worst_name}); {} beyond 3σ",
        failures.len()
    );
    if !failures.is_empty() {
        detail.push_str(&format!(": {}", failures.join(", ")));
    }
    Outcome::new(failures.is_empty(), detail)
}

/// Transition matrix of the toy lattice built from scratch: uniform choice
/// among the `4r` axis moves, Metropolis acceptance, off-grid moves rejected.
fn toy_transition_matrix(target: &DiscreteTarget, radius: usize) -> Vec<Vec<f64>> {
    let (h, w) = (target.height() as i64, target.width() as i64);
    let size = (h * w) as usize;
    let m = (4 * radius) as f64;
    let mut p = vec![vec![0.0; size]; size];
    for r in 0..h {
        for c in 0..w {
            let from = (r * w + c) as usize;
            for k in 1..=radius as i64 {
                for (dr, dc) in [(k, 0), (-k, 0), (0, k), (0, -k)] {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nr >= h || nc < 0 || nc >= w {
                        continue;
                    }
                    let to = (nr * w + nc) as usize;
                    let a = (target.weight(to) / target.weight(from)).min(1.0);
                    p[from][to] += a / m;
                }
            }
            p[from][from] = 1.0 - p[from].iter().sum::<f64>();
        }
    }
    p
}

type TestFunction = Box<dyn Fn(&[f64]) -> f64>;

fn discrete_expectation() -> Outcome {
    let start = Instant::now();
    let target = DiscreteTarget::toy();
    let p = toy_transition_matrix(&target, 3);
    let model = presets::toy_lattice().build().unwrap();
    let basis = model.basis("modes").unwrap();
    let tests: Vec<TestFunction> = vec![
        Box::new(|x: &[f64]| x[0] * x[0] - 3.0 * x[1]),
        Box::new(|x: &[f64]| (x[0] + 0.5 * x[1]).sin()),
    ];
    let mut worst_enum = 0.0f64;
    let mut worst_formula = 0.0f64;
    let m = target.slots() as f64;
    for (x, row) in p.iter().enumerate() {
        let cx = target.coords(x);
        let expect = |g: &dyn Fn(&[f64]) -> f64| -> f64 {
            row.iter().enumerate().map(|(y, pxy)| pxy * g(&target.coords(y))).sum()
        };
        for g in &tests {
            let lib = mcmc_cv::samplers::discrete_mh_expectation(&target, g.as_ref(), x);
            worst_enum = worst_enum.max((lib - expect(g.as_ref())).abs());
        }
        for (b, &mode) in basis.functions().iter().zip(&target.modes(3)) {
            let cm = target.coords(mode);
            let ind = move |z: &[f64]| if z[0] == cm[0] && z[1] == cm[1] { 1.0 } else { 0.0 };
            let lib = b.pg(&cx);
            worst_enum = worst_enum.max((lib - expect(&ind)).abs());
            // at the mode: stay probability; next to it: one move into it; else 0
            let neighbours = target.neighbors(x);
            let formula = if x == mode {
                1.0 - neighbours
                    .iter()
                    .flatten()
                    .map(|&y| target.acceptance(x, y))
                    .sum::<f64>()
                    / m
            } else {
                neighbours.iter().flatten().filter(|&&y| y == mode).count() as f64 * target.acceptance(x, mode) / m
            };
            worst_formula = worst_formula.max((lib - formula).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst_enum <= 1e-12 && worst_formula <= 1e-12 && secs < 1.0,
        format!(
            "max diff vs enumeration {worst_enum:.1e}, vs three-case formula {worst_formula:.1e} (<= 1e-12), {secs:.3}s"
        ),
    )
}

fn clt_shape(report: &VrfReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for method in [Method::Plain, Method::K] {
        let e = &report.row(10_000, method).expect("row present").estimates;
        let t = e.len() as f64;
        let mean = e.iter().sum::<f64>() / t;
        let m2 = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        let m3 = e.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / t;
        let m4 = e.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / t;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2) - 3.0;
        let (sb, kb) = (3.0 * (6.0 / t).sqrt(), 3.0 * (24.0 / t).sqrt());
        pass &= skew.abs() < sb && kurt.abs() < kb;
        parts.push(format!(
            "{method}: skew {skew:.3} (|.| < {sb:.3}), excess kurtosis {kurt:.3} (|.| < {kb:.3})"
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want = |c: u32| selected.is_empty() || selected.contains(&c);

    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut record = |id: &str, o: Outcome| {
        println!(
            "criterion {id}: {} — {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id.to_string(), o));
    };

    if want(1) {
        record("1", poisson_solution_exactness());
    }
    if want(2) {
        record("2", coefficient_consistency());
    }
    if want(3) || want(11) {
        let report = example1_report();
        if want(3) {
            record("3", vrf_grid(&report));
        }
        if want(11) {
            record("11", clt_shape(&report));
        }
    }
    if want(4) {
        record("4", example3());
    }
    if want(5) {
        let (a, b) = example5();
        record("5a", a);
        record("5b", b);
    }
    if want(6) {
        record("6", example2());
    }
    if want(7) {
        record("7", batch_means_gap());
    }
    if want(8) {
        record("8", k_gamma_agreement());
    }
    if want(9) {
        record("9", pg_oracle_suite());
    }
    if want(10) {
        record("10", discrete_expectation());
    }

    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(id, _)| id.as_str())
        .collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
