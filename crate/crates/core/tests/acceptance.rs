//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use ebm_core::experiments::{
    asymptotic_bound_checks, bridge_max_validation, constants_audit, convergence_experiment, discrete_vs_continuous,
    loglog_fit, n_scaling_experiment, ols_covariance_check, regression_limit_law, seminorm_refinement, Assertion,
    ExperimentConfig, RegressionModel, AUDIT_ALPHA,
};
use ebm_core::noise::{cross_covariance, sample_ebm, sample_epoched_bridge, SchemeSpec};
use ebm_core::rng::PathSeed;
use ebm_core::sgdo::InputLaw;
use ebm_core::young::{linear_solution, solve_additive, young_loeve_defect, LinearCoefficients, MatrixPath, Offset};
use ebm_core::Schedule;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Prints the criterion line plus every assertion, then fails the test if any assertion failed.
fn verdict(criterion: usize, title: &str, assertions: &[Assertion]) {
    let passed = assertions.iter().all(|a| a.passed);
    println!("[{}] criterion {criterion}: {title}", if passed { "PASS" } else { "FAIL" });
    for a in assertions {
        println!("    {}", a.line());
    }
    assert!(passed, "criterion {criterion} ({title}) failed");
}

fn config(toml: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(toml).expect("acceptance config parses")
}

const SCHEMES: [(&str, SchemeSpec); 4] = [
    ("single-shuffle", SchemeSpec::SingleShuffle),
    ("random-reshuffle", SchemeSpec::RandomReshuffle),
    ("flip-flop-single", SchemeSpec::FlipFlopSingle),
    ("flip-flop-random", SchemeSpec::FlipFlopRandom),
];

#[test]
fn criterion_01_covariance_fidelity() {
    const DRAWS: usize = 100_000;
    const EPOCHS: usize = 4;
    const SPU: usize = 4;
    let start = std::time::Instant::now();
    let mut assertions = Vec::new();
    for (name, scheme) in SCHEMES {
        // Values at s in {1/4, 1/2, 3/4} of every epoch.
        let samples: Vec<[f64; EPOCHS * 3]> = (0..DRAWS)
            .into_par_iter()
            .map(|r| {
                let b = sample_epoched_bridge(scheme, 1, EPOCHS, SPU, PathSeed::new(101, r as u64)).unwrap();
                let mut v = [0.0; EPOCHS * 3];
                for j in 0..EPOCHS {
                    for k in 0..3 {
                        v[j * 3 + k] = b.path().at(j * SPU + k + 1)[0];
                    }
                }
                v
            })
            .collect();
        let mut worst = 0.0f64;
        for a in 0..EPOCHS * 3 {
            for b in 0..EPOCHS * 3 {
                let (i, s) = (a / 3, (a % 3 + 1) as f64 / SPU as f64);
                let (j, t) = (b / 3, (b % 3 + 1) as f64 / SPU as f64);
                let products: Vec<f64> = samples.iter().map(|v| v[a] * v[b]).collect();
                let m = products.iter().sum::<f64>() / DRAWS as f64;
                let var = products.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (DRAWS - 1) as f64;
                let se = (var / DRAWS as f64).sqrt();
                let target = cross_covariance(scheme, i, j, s, t).unwrap();
                worst = worst.max((m - target).abs() / se);
            }
        }
        assertions.push(Assertion::new(
            format!("{name} covariances"),
            worst <= 4.0,
            format!("{DRAWS} bridges, {EPOCHS} epochs, 144 entries, max |z| = {worst:.3}"),
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assertions.push(Assertion::new("runtime", elapsed < 120.0, format!("{elapsed:.1} s (limit 120 s)")));
    verdict(1, "covariance fidelity", &assertions);
}

#[test]
fn criterion_02_ebm_identities() {
    const EPOCHS: usize = 12;
    const SPU: usize = 64;
    let mut increment_gap = 0.0f64;
    let mut recursion_gap = 0.0f64;
    for (_, scheme) in SCHEMES {
        for period in [0.5, 1.0, 2.0, 3.0] {
            for r in 0..20u64 {
                let w = sample_ebm(scheme, 2, EPOCHS, SPU, period, PathSeed::new(202, r)).unwrap();
                let p = w.path();
                let step = w.endpoint();
                for j in 0..EPOCHS {
                    let (a, b) = (p.at(j * SPU), p.at((j + 1) * SPU));
                    for k in 0..2 {
                        increment_gap = increment_gap.max((b[k] - a[k] - step[k]).abs());
                    }
                }
                if scheme == SchemeSpec::SingleShuffle {
                    let wt = p.at(SPU);
                    for j in 0..EPOCHS {
                        for i in 0..=SPU {
                            let (x, y) = (p.at(i), p.at(j * SPU + i));
                            for k in 0..2 {
                                let scale = 1.0 + x[k].abs() + j as f64 * wt[k].abs();
                                recursion_gap = recursion_gap.max((y[k] - x[k] - j as f64 * wt[k]).abs() / scale);
                            }
                        }
                    }
                }
            }
        }
    }
    verdict(
        2,
        "EBM structural identities",
        &[
            Assertion::new(
                "per-epoch increment",
                increment_gap <= 1e-12,
                format!("max |W_(j+1)T - W_jT - sqrt(T) V| = {increment_gap:.2e} over 4 schemes, 4 periods, 20 paths"),
            ),
            Assertion::new(
                "single-shuffle recursion",
                recursion_gap <= 1e-12,
                format!("max relative |W_(t+jT) - W_t - j W_T| = {recursion_gap:.2e}"),
            ),
        ],
    );
}

#[test]
fn criterion_03_solver_oracle() {
    const FINE: u32 = 14;
    let schedule = Schedule::new(0.5, 1.0).unwrap();
    let mut assertions = Vec::new();
    for d in [1usize, 2] {
        let kappa = if d == 1 {
            DMatrix::from_element(1, 1, 1.5)
        } else {
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])
        };
        let offset = Offset::ScheduleScaled(&kappa * DVector::from_element(d, 0.3));
        let coeffs = LinearCoefficients::new(kappa, offset, DMatrix::identity(d, d) * 0.5).unwrap();
        let ebm = sample_ebm(SchemeSpec::RandomReshuffle, d, 10, 1 << FINE, 1.0, PathSeed::new(9, d as u64)).unwrap();
        let y0 = vec![1.0; d];
        let (mut steps, mut gaps) = (Vec::new(), Vec::new());
        for level in 8..=FINE {
            let driver = ebm.path().coarsened(1 << (FINE - level)).unwrap();
            let explicit = solve_additive(coeffs.drift(schedule), schedule, coeffs.sigma(), &driver, &y0, "ebm").unwrap();
            let exact = linear_solution(&coeffs, schedule, &driver, &y0).unwrap();
            steps.push(driver.grid().dt());
            gaps.push(explicit.sup_distance(&exact).unwrap());
        }
        let finest = *gaps.last().unwrap();
        let order = loglog_fit(&steps, &gaps).unwrap().slope;
        assertions.push(Assertion::new(
            format!("d = {d} sup gap"),
            finest < 1e-3,
            format!("{finest:.3e} on [0, 10] at dt = 2^-{FINE} (limit 1e-3)"),
        ));
        assertions.push(Assertion::new(
            format!("d = {d} order"),
            order >= 0.9,
            format!("fitted order {order:.3} over dt = 2^-8 .. 2^-{FINE}"),
        ));
    }
    verdict(3, "solver against variation of constants", &assertions);
}

#[test]
fn criterion_04_young_loeve_battery() {
    const ALPHA: f64 = 0.42;
    const TRIPLES: usize = 1000;
    let results: Vec<(f64, f64)> = (0..TRIPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(404 + r as u64);
            let (_, scheme) = SCHEMES[rng.random_range(0..4)];
            let m = rng.random_range(1..=2usize);
            let rows = rng.random_range(1..=2usize);
            let epochs = rng.random_range(1..=4usize);
            let spu = [32usize, 64, 128][rng.random_range(0..3)];
            let period = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            let driver = sample_ebm(scheme, m, epochs, spu, period, PathSeed::new(404, r as u64)).unwrap();
            let driver = driver.path();
            let grid = *driver.grid();
            let lo = rng.random_range(0..grid.len() - 1);
            let hi = rng.random_range(lo + 1..grid.len().min(lo + 129));
            let a = DMatrix::from_fn(rows, m, |_, _| rng.random_range(-2.0..2.0));
            let b = DMatrix::from_fn(rows, m, |_, _| rng.random_range(-2.0..2.0));
            let (integrand, exponent) = match rng.random_range(0..3) {
                0 => {
                    let omega = rng.random_range(0.5..8.0);
                    let sigma = MatrixPath::from_fn(grid, rows, m, |t| &a + &b * (omega * t).sin()).unwrap();
                    (sigma, 1.0)
                }
                1 => {
                    let s = Schedule::new(rng.random_range(0.1..1.0), rng.random_range(0.5..10.0)).unwrap();
                    (MatrixPath::scaled(grid, &a, |t| s.rate_unchecked(t)).unwrap(), 1.0)
                }
                _ => {
                    // A rough integrand: an independent bridge, exponent 0.6 so that alpha + beta > 1.
                    let x = sample_epoched_bridge(SchemeSpec::RandomReshuffle, 1, epochs, spu, PathSeed::new(405, r as u64))
                        .unwrap();
                    let x = x.path();
                    let mut i = 0;
                    let sigma = MatrixPath::from_fn(grid, rows, m, |_| {
                        let v = x.at(i)[0];
                        i += 1;
                        &a + &b * v
                    })
                    .unwrap();
                    (sigma, 0.6)
                }
            };
            let d = young_loeve_defect(&integrand, exponent, driver, ALPHA, lo, hi).unwrap();
            (d.defect, d.bound)
        })
        .collect();
    let holds = results.iter().filter(|(d, b)| d <= b).count();
    let worst = results.iter().map(|(d, b)| if *b > 0.0 { d / b } else { 0.0 }).fold(0.0, f64::max);
    verdict(
        4,
        "Young-Loeve defect battery",
        &[Assertion::new(
            "defect within bound",
            holds == TRIPLES,
            format!("{holds}/{TRIPLES} triples, worst defect/bound = {worst:.3}"),
        )],
    );
}

fn rate_config(scheme: &str, beta: f64, objective: &str) -> String {
    format!(
        r#"
name = "rate"
kind = "convergence"
scheme = "{scheme}"
beta = {beta}
c = 1.0
horizon = 10000.0
steps_per_unit = 32
replicates = 20
seed = 23
error = "epoch-sup"
sigma = [[0.5, 0.0], [0.0, 0.5]]
[objective]
{objective}
kappa = [[1.0, 0.0], [0.0, 2.0]]
"#
    )
}

#[test]
fn criterion_05_rate_random_reshuffle() {
    let start = std::time::Instant::now();
    let mut assertions = Vec::new();
    for (label, objective) in [
        ("quadratic", r#"kind = "quadratic""#),
        ("perturbed", "kind = \"perturbed-quadratic\"\neps = 0.1\nfreq = 1.0"),
    ] {
        for beta in [0.3, 0.5, 0.7] {
            let report = convergence_experiment(&config(&rate_config("random-reshuffle", beta, objective))).unwrap();
            for a in report.assertions {
                assertions.push(Assertion::new(format!("{label} beta = {beta}: {}", a.name), a.passed, a.detail));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assertions.push(Assertion::new("runtime", elapsed < 600.0, format!("{elapsed:.1} s (limit 600 s)")));
    verdict(5, "convergence rate under random reshuffling", &assertions);
}

#[test]
fn criterion_06_finite_epoch_envelope() {
    let mut assertions = Vec::new();
    for beta in [0.3, 0.5, 0.7] {
        let report =
            convergence_experiment(&config(&rate_config("single-shuffle", beta, r#"kind = "quadratic""#))).unwrap();
        for a in report.assertions {
            assertions.push(Assertion::new(format!("beta = {beta}: {}", a.name), a.passed, a.detail));
        }
    }
    verdict(6, "finite-epoch envelope under single shuffle", &assertions);
}

#[test]
fn criterion_07_prefactor_scaling() {
    let mut assertions = Vec::new();
    // Curvature per beta keeps the per-epoch relaxation small and the accumulated contraction large.
    for (beta, k, epochs) in [(0.3, 0.033, 40_000), (0.5, 0.2, 10_000), (0.7, 1.0, 10_000)] {
        let cfg = config(&format!(
            r#"
name = "scaling"
kind = "scaling"
scheme = "random-reshuffle"
beta = {beta}
c = 1.0
horizon = 10000.0
steps_per_unit = 32
replicates = 8
seed = 3
fit_decades = 1.0
error = "epoch-sup"
sigma = [[0.5, 0.0], [0.0, 0.5]]
[objective]
kind = "quadratic"
kappa = [[{k}, 0.0], [0.0, {k}]]
[scaling]
periods = [1.0, 4.0, 16.0, 64.0]
epochs = {epochs}
"#
        ));
        let report = n_scaling_experiment(&cfg).unwrap();
        for a in report.assertions {
            assertions.push(Assertion::new(format!("beta = {beta}: {}", a.name), a.passed, a.detail));
        }
    }
    verdict(7, "prefactor scaling in T", &assertions);
}

#[test]
fn criterion_08_regression_limit_law() {
    let law = InputLaw::Gaussian {
        covariance: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
    };
    let model = RegressionModel::new(500, 0.01, 1.0, &[1.0, -0.5], &law).unwrap();
    let limit = regression_limit_law(&model, 10_000, 808).unwrap();
    let ols = ols_covariance_check(&model, &law, 10_000, 0.1, 809).unwrap();
    let assertions: Vec<Assertion> = limit.assertions.into_iter().chain(ols.assertions).collect();
    verdict(8, "regression limit law", &assertions);
}

fn coherence_config(scheme: &str) -> String {
    format!(
        r#"
name = "coherence"
kind = "coherence"
scheme = "{scheme}"
beta = 0.7
c = 1.0
horizon = 20000.0
steps_per_unit = 128
replicates = 10
seed = 7
[coherence]
samples = 200
h = 0.01
sigma_eps = 1.0
theta_star = [1.0, -0.5]
endpoint_replicates = 2000
"#
    )
}

#[test]
fn criterion_09_discrete_continuous_coherence() {
    let mut assertions = Vec::new();
    for scheme in ["single-shuffle", "random-reshuffle"] {
        let report = discrete_vs_continuous(&config(&coherence_config(scheme))).unwrap();
        for a in report.assertions {
            assertions.push(Assertion::new(format!("{scheme}: {}", a.name), a.passed, a.detail));
        }
    }
    verdict(9, "discrete and continuous coherence", &assertions);
}

#[test]
fn criterion_10_bridge_max_envelope() {
    let max = bridge_max_validation(AUDIT_ALPHA, 0.8, 10_000, 100, 100, 64, 1010).unwrap();
    let refinement = seminorm_refinement(AUDIT_ALPHA, 1 << 13, 64, 1011).unwrap();
    let assertions: Vec<Assertion> = max.assertions.into_iter().chain(refinement.assertions).collect();
    verdict(10, "running maximum of bridge seminorms", &assertions);
}

#[test]
fn criterion_11_integral_estimates() {
    let schedule = Schedule::new(0.5, 1.0).unwrap();
    let report = asymptotic_bound_checks(schedule, 1.0, &[1.0], &[1e4]).unwrap();
    for c in &report.checks {
        println!("    {} at t = {}: {:.6e} against {:.6e}", c.name, c.t, c.value, c.bound);
    }
    verdict(11, "integral estimates", &report.assertions);
}

#[test]
fn criterion_12_constants_audit() {
    let report = constants_audit();
    for row in &report.rows {
        let printed = row.printed.map_or("-".to_string(), |p| format!("{p:.6}"));
        println!(
            "    {:<40} recomputed {:.6}  printed {printed}{}",
            row.quantity,
            row.recomputed,
            if row.flagged { "  FLAGGED" } else { "" }
        );
    }
    let a_root = report.rows.iter().find(|r| r.quantity.starts_with("a^(-1/2)")).expect("a^(-1/2) row");
    let reproduced = format!("{:.5}", a_root.recomputed) == "1.11803";
    let flagged: Vec<&str> = report.flagged().iter().map(|r| r.quantity.as_str()).collect();
    let mut assertions = report.assertions.clone();
    assertions.push(Assertion::new(
        "five decimals",
        reproduced,
        format!("a^(-1/2) = {:.5}", a_root.recomputed),
    ));
    assertions.push(Assertion::new(
        "disagreements surfaced",
        flagged.len() == 2,
        format!("flagged: {}", flagged.join(", ")),
    ));
    verdict(12, "constants audit", &assertions);
}
