use mcmc_cv::gaussian::{gibbs_coordinate_expectation, poisson_coefficients, poisson_residual, GaussianTarget};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// A random SPD covariance `A A^T + eps I` with its mean and a state.
fn gaussian_case() -> impl Strategy<Value = (GaussianTarget, Vec<f64>)> {
    (2usize..=8).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0f64..3.0, d * d),
            prop::collection::vec(-5.0f64..5.0, d),
            prop::collection::vec(-50.0f64..50.0, d),
            0.05f64..2.0,
        )
            .prop_map(move |(a, mean, x, eps)| {
                let a = DMatrix::from_row_slice(d, d, &a);
                let cov = &a * a.transpose() + DMatrix::identity(d, d) * eps;
                (GaussianTarget::new(mean, cov).unwrap(), x)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn poisson_equation_holds_everywhere((target, x) in gaussian_case()) {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..target.dim() {
            let pc = poisson_coefficients(&target, i).unwrap();
            let r = poisson_residual(&target, &pc, &x);
            prop_assert!(r.abs() < 1e-9 * (1.0 + norm), "coordinate {i}: residual {r}");
        }
    }

    #[test]
    fn coefficients_follow_coordinate_permutations((target, _x) in gaussian_case(), seed in any::<u64>()) {
        let d = target.dim();
        // deterministic permutation from the seed
        let mut perm: Vec<usize> = (0..d).collect();
        let mut s = seed;
        for i in (1..d).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let cov = target.cov();
        let permuted = GaussianTarget::new(
            perm.iter().map(|&p| target.mean()[p]).collect(),
            DMatrix::from_fn(d, d, |a, b| cov[(perm[a], perm[b])]),
        ).unwrap();
        for i in 0..d {
            let original = poisson_coefficients(&target, perm[i]).unwrap().theta;
            let moved = poisson_coefficients(&permuted, i).unwrap().theta;
            for j in 0..d {
                let (a, b) = (moved[j], original[perm[j]]);
                prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "theta[{i}][{j}]: {a} vs {b}");
            }
        }
    }

    #[test]
    fn one_step_mean_is_average_of_stay_and_conditional_mean((target, x) in gaussian_case()) {
        let d = target.dim() as f64;
        for j in 0..target.dim() {
            let prec = target.precision();
            let shift: f64 = (0..target.dim())
                .filter(|&k| k != j)
                .map(|k| prec[(j, k)] * (x[k] - target.mean()[k]))
                .sum();
            let cond = target.mean()[j] - shift / prec[(j, j)];
            let expected = (d - 1.0) / d * x[j] + cond / d;
            let got = gibbs_coordinate_expectation(&target, &x, j);
            prop_assert!((got - expected).abs() < 1e-8 * (1.0 + expected.abs()));
        }
    }
}

#[test]
fn near_singular_covariance_is_rejected() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-15]);
    let r = GaussianTarget::new(vec![0.0, 0.0], cov).and_then(|t| poisson_coefficients(&t, 0));
    assert!(r.is_err(), "{r:?}");
}
