//! The power-law learning-rate schedule `u(t) = (1 + c t)^(-beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate law `u(t) = (1 + c t)^(-beta)` with `beta` in (0, 1), `c > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    beta: f64,
    c: f64,
}

impl Schedule {
    pub fn new(beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param("beta", format!("{beta} not in (0, 1)")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("{c} must be positive and finite")));
        }
        Ok(Self { beta, c })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `(1 - beta) / beta`, the exponent in `|u'| = c beta u^(2 + gamma)`.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.beta) / self.beta
    }

    /// The same law with time stretched by `factor`: `u(factor * t)`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Schedule::new(self.beta, self.c * factor)
    }

    pub fn rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.rate_unchecked(t))
    }

    /// `rate` without the domain check, for inner loops that own a valid grid.
    #[inline]
    pub fn rate_unchecked(&self, t: f64) -> f64 {
        (-self.beta * (self.c * t).ln_1p()).exp()
    }

    /// `int_a^b u(r) dr` in closed form.
    pub fn rate_integral(&self, a: f64, b: f64) -> Result<f64> {
        check_time(a)?;
        if b < a || b.is_nan() {
            return Err(Error::Domain(format!("integral bounds a = {a} > b = {b}")));
        }
        Ok(self.rate_integral_unchecked(a, b))
    }

    #[inline]
    pub fn rate_integral_unchecked(&self, a: f64, b: f64) -> f64 {
        let g = 1.0 - self.beta;
        let la = (self.c * a).ln_1p();
        let lb = (self.c * b).ln_1p();
        // (1+cb)^g - (1+ca)^g without cancellation for nearby bounds.
        (g * la).exp() * (g * (lb - la)).exp_m1() / (self.c * g)
    }

    /// `U(0, t)`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.rate_integral_unchecked(0.0, t)
    }

    /// `u'(t) = -c beta (1 + c t)^(-(1 + beta))`.
    pub fn rate_derivative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(-self.c * self.beta * (-(1.0 + self.beta) * (self.c * t).ln_1p()).exp())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} must be finite and >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn rate_examples() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        assert_eq!(s.rate(0.0).unwrap(), 1.0);
        assert!((s.rate(3.0).unwrap() - 0.5).abs() < 1e-15);
        // 25^(-0.7) evaluated with 40-digit arithmetic.
        let s = Schedule::new(0.7, 2.0).unwrap();
        assert!((s.rate(12.0).unwrap() - 0.105_061_112_176_150_69).abs() < 1e-15);
    }

    #[test]
    fn rate_rejects_negative_time() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        assert!(s.rate(-1e-9).is_err());
        assert!(s.rate_derivative(f64::NAN).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(Schedule::new(0.0, 1.0).is_err());
        assert!(Schedule::new(1.0, 1.0).is_err());
        assert!(Schedule::new(0.5, 0.0).is_err());
        assert!(Schedule::new(0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn integral_examples() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        assert!((s.rate_integral(0.0, 3.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(s.rate_integral(2.5, 2.5).unwrap(), 0.0);
        assert!(s.rate_integral(3.0, 1.0).is_err());

        let s = Schedule::new(0.3, 2.0).unwrap();
        let exact = s.rate_integral(1.0, 10.0).unwrap();
        // 40-digit adaptive quadrature value.
        assert!((exact - 4.476_437_510_857_049).abs() < 1e-12);
        let quad = simpson(|r| (1.0 + 2.0 * r).powf(-0.3), 1.0, 10.0, 20_000);
        assert!((exact - quad).abs() < 1e-10);
    }

    #[test]
    fn derivative_examples() {
        let s = Schedule::new(0.5, 1.0).unwrap();
        assert_eq!(s.rate_derivative(0.0).unwrap(), -0.5);
        let d = s.rate_derivative(3.0).unwrap();
        assert!((d.abs() - 0.0625).abs() < 1e-15);

        let s = Schedule::new(0.25, 3.0).unwrap();
        let h = 1e-6;
        let fd = (s.rate(7.0 + h).unwrap() - s.rate(7.0 - h).unwrap()) / (2.0 * h);
        let d = s.rate_derivative(7.0).unwrap();
        assert!((d - fd).abs() < 1e-8);
        assert!((d + 0.015_741_021_509_458_044).abs() < 1e-15);
    }

    #[test]
    fn integral_matches_quadrature_up_to_1e5() {
        for &(beta, c) in &[(0.3, 1.0), (0.5, 2.0), (0.9, 0.5)] {
            let s = Schedule::new(beta, c).unwrap();
            for &t in &[0.5, 10.0, 1e3, 1e5] {
                // Simpson in log-time, where the integrand is smooth on all scales.
                let quad = simpson(
                    |x| {
                        let r = x.exp_m1();
                        s.rate_unchecked(r) * (r + 1.0)
                    },
                    0.0,
                    (t + 1.0_f64).ln(),
                    200_000,
                );
                let exact = s.cumulative(t);
                assert!(
                    ((exact - quad) / exact).abs() < 1e-10,
                    "beta={beta} c={c} t={t}: {exact} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn derivative_identity_on_log_grid() {
        for &(beta, c) in &[(0.2, 1.0), (0.5, 3.0), (0.8, 0.1)] {
            let s = Schedule::new(beta, c).unwrap();
            let mut t = 0.0;
            while t <= 1e6 {
                let lhs = s.rate_derivative(t).unwrap().abs();
                let rhs = c * beta * s.rate(t).unwrap().powf(2.0 + s.gamma());
                assert!(((lhs - rhs) / lhs).abs() < 1e-12, "t = {t}");
                t = if t == 0.0 { 1e-3 } else { t * 1.7 };
            }
        }
    }

    proptest! {
        #[test]
        fn strictly_decreasing(beta in 0.01f64..0.99, c in 0.01f64..10.0, t in 0.0f64..1e4, eps in 1e-3f64..10.0) {
            let s = Schedule::new(beta, c).unwrap();
            prop_assert!(s.rate(t + eps).unwrap() < s.rate(t).unwrap());
            prop_assert!(s.rate(t).unwrap() <= 1.0);
        }

        #[test]
        fn cumulative_is_concave(beta in 0.01f64..0.99, c in 0.01f64..10.0, a in 0.0f64..1e4, w in 1e-3f64..1e4) {
            let s = Schedule::new(beta, c).unwrap();
            let b = a + w;
            let mid = s.cumulative(0.5 * (a + b));
            prop_assert!(mid >= 0.5 * (s.cumulative(a) + s.cumulative(b)) - 1e-12 * mid);
            prop_assert!(s.cumulative(b) > s.cumulative(a));
        }
    }
}
