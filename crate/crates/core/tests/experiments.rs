use mcmc_cv::experiments::{compare_batch_means, run_replications, ExperimentPlan, Method};
use mcmc_cv::samplers::presets;

fn plan(checkpoints: Vec<usize>) -> ExperimentPlan {
    ExperimentPlan {
        sampler: presets::cauchy_ig(5).with_burn_in(200),
        functional: "V".into(),
        basis: "v".into(),
        checkpoints,
        replications: 16,
        master_seed: 99,
        methods: vec![Method::K, Method::Gamma, Method::BatchMeans(5)],
        ridge: false,
    }
}

#[test]
fn checkpoint_results_do_not_depend_on_later_checkpoints() {
    let long = run_replications(&plan(vec![500, 2_000, 4_000]), 2).unwrap();
    let short = run_replications(&plan(vec![500, 2_000]), 3).unwrap();
    for r in &short.rows {
        assert_eq!(Some(r), long.row(r.checkpoint, r.method));
    }
}

#[test]
fn identical_plans_give_identical_reports() {
    let a = run_replications(&plan(vec![1_000]), 1).unwrap();
    let b = run_replications(&plan(vec![1_000]), 4).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.plan_hash, b.plan_hash);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn different_seeds_differ() {
    let a = run_replications(&plan(vec![1_000]), 1).unwrap();
    let mut p = plan(vec![1_000]);
    p.master_seed = 100;
    let b = run_replications(&p, 1).unwrap();
    assert_ne!(a.rows, b.rows);
}

#[test]
fn control_variates_reduce_variance_on_cauchy_model() {
    let r = run_replications(&plan(vec![5_000]), 0).unwrap();
    assert!(r.vrf(5_000, Method::K).unwrap() > 2.0);
    assert_eq!(r.total_failures(), 0);
}

#[test]
fn batch_means_comparison_reports_each_lag() {
    let r = compare_batch_means(&plan(vec![2_000]), &[0, 5, 20], 0).unwrap();
    let methods: Vec<Method> = r.rows.iter().map(|m| m.method).collect();
    assert_eq!(
        methods,
        vec![
            Method::Plain,
            Method::K,
            Method::BatchMeans(0),
            Method::BatchMeans(5),
            Method::BatchMeans(20)
        ]
    );
}

#[test]
fn plan_json_round_trip() {
    let p = plan(vec![100, 200]);
    let s = serde_json::to_string(&p).unwrap();
    let back: ExperimentPlan = serde_json::from_str(&s).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.hash(), p.hash());
    assert!(serde_json::from_str::<ExperimentPlan>(&s.replace("\"ridge\"", "\"rigde\"")).is_err());
}
