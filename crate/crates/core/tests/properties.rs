use ebm_core::experiments::{fit_line, loglog_fit, median, rate_envelope, Assertion, MomentCheck, ProblemConstants};
use ebm_core::noise::{sample_ebm, SchemeSpec};
use ebm_core::objectives::{grad_inverse, make_perturbed_quadratic, Objective};
use ebm_core::rng::PathSeed;
use ebm_core::sgdo::PermutationStream;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scheme(k: usize) -> SchemeSpec {
    SchemeSpec::ALL[k % 4]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_fit_is_exact_on_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 3usize..20) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-9 && (fit.intercept - b).abs() < 1e-9);
    }

    #[test]
    fn loglog_fit_recovers_power(p in -2.0f64..2.0, scale in 0.01f64..100.0) {
        let xs: Vec<f64> = (0..10).map(|i| 10f64.powf(i as f64 / 3.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(p)).collect();
        prop_assert!((loglog_fit(&xs, &ys).unwrap().slope - p).abs() < 1e-9);
    }

    #[test]
    fn median_is_order_free(mut v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let m = median(&v);
        v.reverse();
        prop_assert_eq!(m, median(&v));
        let below = v.iter().filter(|x| **x < m).count();
        let above = v.iter().filter(|x| **x > m).count();
        prop_assert!(below <= v.len() / 2 && above <= v.len() / 2);
    }

    #[test]
    fn fraction_assertion_threshold(passed in 0usize..50, extra in 0usize..50, f in 0.0f64..1.0) {
        let total = passed + extra;
        let a = Assertion::fraction("x", passed, total, f);
        prop_assert_eq!(a.passed, total > 0 && passed as f64 >= f * total as f64);
    }

    #[test]
    fn ebm_increments_are_constant(seed in any::<u64>(), k in 0usize..4, period in 0.1f64..5.0) {
        let w = sample_ebm(scheme(k), 2, 5, 16, period, PathSeed::new(seed, 0)).unwrap();
        let step = w.endpoint();
        for j in 0..5 {
            let (a, b) = (w.path().at(j * 16), w.path().at((j + 1) * 16));
            for c in 0..2 {
                prop_assert!((b[c] - a[c] - step[c]).abs() <= 1e-12 * (1.0 + step[c].abs()));
            }
        }
    }

    #[test]
    fn permutations_are_bijections(seed in any::<u64>(), k in 0usize..4, len in 1usize..50, epoch in 0usize..6) {
        let stream = PermutationStream::new(scheme(k), len, PathSeed::new(seed, 1)).unwrap();
        let mut p = stream.permutation(epoch);
        p.sort_unstable();
        prop_assert_eq!(p, (0..len).collect::<Vec<_>>());
    }

    // eps freq^2 stays below lambda_min(kappa) ~ 0.79.
    #[test]
    fn grad_inverse_inverts(v0 in -3.0f64..3.0, v1 in -3.0f64..3.0, eps in 0.0f64..0.3, freq in 0.1f64..1.5) {
        let kappa = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let obj = make_perturbed_quadratic(kappa, eps, freq).unwrap();
        let y = grad_inverse(&obj, &[v0, v1], 1e-11).unwrap().point;
        let g = obj.gradient(y.as_slice());
        prop_assert!((g[0] - v0).abs() < 1e-9 && (g[1] - v1).abs() < 1e-9);
    }

    #[test]
    fn envelope_decays_after_e(beta in 0.05f64..0.95, period in 0.5f64..10.0, n in 3.0f64..1e4) {
        let k = ProblemConstants { lambda: 1.0, smoothness: 2.0, sigma_norm: 0.5 };
        // sqrt(log n) n^-beta decreases once log n > 1/(2 beta).
        let start = (0.5 / beta).exp().max(3.0);
        let n = n.max(start);
        let t = period * n;
        prop_assert!(rate_envelope(&k, period, beta, 1.0, 2.0 * t) < rate_envelope(&k, period, beta, 1.0, t));
    }
}

#[test]
fn moment_check_of_exact_moments_has_zero_mean_z() {
    let samples: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let (mean, cov) = ebm_core::experiments::sample_moments(&samples);
    let check = MomentCheck::against(&samples, &mean, &cov);
    assert!(check.mean_z.iter().all(|z| z.abs() < 1e-12));
    assert!(check.passes());
}
