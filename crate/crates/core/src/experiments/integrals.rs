//! Dense-quadrature checks of the schedule integral estimates.

use rayon::prelude::*;
use serde::Serialize;

use super::assertion::Assertion;
use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// Quadrature step.
pub const QUADRATURE_STEP: f64 = 1e-4;
/// Largest relative gap between the `h` and `2h` Simpson values.
pub const RICHARDSON_TOLERANCE: f64 = 1e-6;
/// Slack in the asymptotic ratio bounds.
pub const EPSILON: f64 = 0.1;

/// `(u(s), U(0, s))` from one logarithm.
#[derive(Clone, Copy)]
struct Law {
    beta: f64,
    c: f64,
}

impl Law {
    fn eval(&self, s: f64) -> (f64, f64) {
        let l = (self.c * s).ln_1p();
        let u = (-self.beta * l).exp();
        let big_u = ((1.0 - self.beta) * l).exp_m1() / (self.c * (1.0 - self.beta));
        (u, big_u)
    }
}

/// Composite Simpson on `[a, b]` with step `h` and `2h` in one pass; `(b - a) / h` is rounded up to a multiple of 4.
pub fn simpson_pair(f: impl Fn(f64) -> f64 + Sync, a: f64, b: f64, h: f64) -> Result<(f64, f64)> {
    if !(b > a && h > 0.0) {
        return Err(Error::param("interval", format!("need a < b and h > 0, got [{a}, {b}], h = {h}")));
    }
    let mut n = ((b - a) / h).ceil() as usize;
    n = n.div_ceil(4) * 4;
    let step = (b - a) / n as f64;
    const CHUNK: usize = 1 << 16;
    let (fine, coarse) = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut fine = 0.0;
            let mut coarse = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n + 1) {
                let v = f(a + i as f64 * step);
                let wf = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                fine += wf * v;
                if i % 2 == 0 {
                    let j = i / 2;
                    let wc = if j == 0 || j == n / 2 {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    coarse += wc * v;
                }
            }
            (fine, coarse)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    Ok((fine * step / 3.0, coarse * 2.0 * step / 3.0))
}

/// Simpson value at step `h`, failing when the `2h` value differs by more than the relative tolerance.
pub fn integrate(f: impl Fn(f64) -> f64 + Sync, a: f64, b: f64, h: f64) -> Result<f64> {
    let (fine, coarse) = simpson_pair(f, a, b, h)?;
    let gap = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if gap > RICHARDSON_TOLERANCE {
        return Err(Error::Quadrature {
            gap,
            tolerance: RICHARDSON_TOLERANCE,
        });
    }
    Ok(fine)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralCheck {
    pub name: String,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralReport {
    pub beta: f64,
    pub c: f64,
    pub lambda: f64,
    pub checks: Vec<IntegralCheck>,
    pub assertions: Vec<Assertion>,
}

/// `lambda u(t) / f(t) int_0^t f(s) e^{-lambda U(s, t)} ds` for `f = u^rho`; tends to 1.
pub fn weighted_integral_ratio(schedule: Schedule, lambda: f64, rho: f64, t: f64) -> Result<f64> {
    let law = Law {
        beta: schedule.beta(),
        c: schedule.c(),
    };
    let (ut, big_ut) = law.eval(t);
    let beta = schedule.beta();
    let c = schedule.c();
    let integral = integrate(
        |s| {
            let l = (c * s).ln_1p();
            let big_u = ((1.0 - beta) * l).exp_m1() / (c * (1.0 - beta));
            (lambda * (big_u - big_ut) - beta * rho * l).exp()
        },
        0.0,
        t,
        QUADRATURE_STEP,
    )?;
    Ok(lambda * ut / ut.powf(rho) * integral)
}

/// `(|sum_{n=a+1}^b f(n) - int_a^b f|, |f(a) - f(b)|)` for integer `a < b`.
pub fn sum_integral_defect(f: impl Fn(f64) -> f64 + Sync, a: usize, b: usize) -> Result<(f64, f64)> {
    let sum: f64 = (a + 1..=b).map(|n| f(n as f64)).sum();
    let integral = integrate(&f, a as f64, b as f64, QUADRATURE_STEP)?;
    Ok(((sum - integral).abs(), (f(a as f64) - f(b as f64)).abs()))
}

/// `sum_{k < floor t} max_{s in [k, k+1]} max_i |u'(s) + u(s)^2 lambda_i| e^{-lambda_i U(s, t)}`,
/// the supremum taken over `samples + 1` equispaced points per unit.
pub fn lipschitz_sum(schedule: Schedule, eigenvalues: &[f64], t: f64, samples: usize) -> f64 {
    let law = Law {
        beta: schedule.beta(),
        c: schedule.c(),
    };
    let (beta, c) = (schedule.beta(), schedule.c());
    let (_, big_ut) = law.eval(t);
    (0..t.floor() as usize)
        .into_par_iter()
        .map(|k| {
            let mut best = 0.0f64;
            for i in 0..=samples {
                let s = k as f64 + i as f64 / samples as f64;
                let (u, big_u) = law.eval(s);
                let du = -c * beta * u / (1.0 + c * s);
                for &l in eigenvalues {
                    best = best.max((du + u * u * l).abs() * (-l * (big_ut - big_u)).exp());
                }
            }
            best
        })
        .sum()
}

/// Quadrature checks of the integral estimates behind the rate bounds at the given times.
pub fn asymptotic_bound_checks(schedule: Schedule, lambda: f64, eigenvalues: &[f64], times: &[f64]) -> Result<IntegralReport> {
    if !(lambda > 0.0) || eigenvalues.iter().any(|l| !(*l > 0.0)) || eigenvalues.is_empty() {
        return Err(Error::param("lambda", "need lambda > 0 and positive eigenvalues"));
    }
    if times.iter().any(|t| !(*t >= 1.0)) || times.is_empty() {
        return Err(Error::param("times", "need times >= 1"));
    }
    let law = Law {
        beta: schedule.beta(),
        c: schedule.c(),
    };
    let mut checks = Vec::new();
    for &t in times {
        for rho in [1.0, 2.0] {
            let r = weighted_integral_ratio(schedule, lambda, rho, t)?;
            checks.push(IntegralCheck {
                name: format!("weighted integral ratio, f = u^{rho}"),
                t,
                value: r,
                bound: 1.0 + EPSILON,
                passed: r <= 1.0 + EPSILON,
            });
        }
    }
    let b = 100;
    let (_, big_ub) = law.eval(b as f64);
    let monotone: [(&str, Box<dyn Fn(f64) -> f64 + Sync>); 4] = [
        ("u", Box::new(move |s| law.eval(s).0)),
        ("u^2", Box::new(move |s| law.eval(s).0.powi(2))),
        ("exp(-lambda U(s, 100))", Box::new(move |s| (-lambda * (big_ub - law.eval(s).1)).exp())),
        ("1/(1+s)^2", Box::new(|s| (1.0 + s).powi(-2))),
    ];
    for (name, f) in monotone.iter() {
        let (defect, variation) = sum_integral_defect(f, 0, b)?;
        checks.push(IntegralCheck {
            name: format!("sum-integral defect, f = {name}"),
            t: b as f64,
            value: defect,
            bound: variation,
            passed: defect <= variation,
        });
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let (_, big_uh) = law.eval(horizon);
    for power in [1, 2] {
        let v = (-lambda * big_uh).exp() * horizon.powi(power);
        checks.push(IntegralCheck {
            name: format!("exp(-lambda U_t) t^{power}"),
            t: horizon,
            value: v,
            bound: 1e-6,
            passed: v < 1e-6,
        });
    }
    let lmax = eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let v = lipschitz_sum(schedule, eigenvalues, horizon, 64);
    let bound = lmax / lmin * (schedule.c() * horizon).powf(-schedule.beta()) * (1.0 + EPSILON);
    checks.push(IntegralCheck {
        name: "Lipschitz sum of u phi".into(),
        t: horizon,
        value: v,
        bound,
        passed: v <= bound,
    });
    let assertions = checks
        .iter()
        .map(|c| {
            Assertion::new(
                format!("{} at t = {}", c.name, c.t),
                c.passed,
                format!("{:.6e} against {:.6e}", c.value, c.bound),
            )
        })
        .collect();
    Ok(IntegralReport {
        beta: schedule.beta(),
        c: schedule.c(),
        lambda,
        checks,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let (a, b) = simpson_pair(|x| x * x * x - x, 0.0, 2.0, 0.1).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(integrate(|x: f64| x.sqrt(), 0.0, 1.0, 0.25).is_err());
    }

    #[test]
    fn ratio_of_exact_case() {
        // beta -> u = (1+s)^-beta, rho = 1: integral is (1 - e^{-lambda U(0,t)}) / lambda.
        let s = Schedule::new(0.5, 1.0).unwrap();
        let t = 50.0;
        let r = weighted_integral_ratio(s, 2.0, 1.0, t).unwrap();
        assert!((r - (1.0 - (-2.0 * s.cumulative(t)).exp())).abs() < 1e-9);
    }
}
