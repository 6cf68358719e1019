use serde::Serialize;

use crate::error::{Error, Result};

/// `10^{1/8}`: eight checkpoints per decade.
pub const CHECKPOINT_RATIO: f64 = 1.333_521_432_163_324;

/// Least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical standard error of the slope (`NaN` with two points).
    pub slope_se: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::param("ys", "length differs from xs"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::param("xs", "a line fit needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in line fit".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("line fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        points: n,
    })
}

/// Fit of `ln y` against `ln x`; all values must be positive.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// `t0 ratio^k` for all `k >= 0` with `t0 ratio^k <= end (1 + 1e-12)`.
pub fn geometric_checkpoints(t0: f64, end: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && end >= t0 && ratio > 1.0) {
        return Err(Error::param("checkpoints", format!("need 0 < t0 <= end and ratio > 1, got {t0}, {end}, {ratio}")));
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let t = t0 * ratio.powi(k);
        if t > end * (1.0 + 1e-12) {
            break;
        }
        out.push(t);
        k += 1;
    }
    Ok(out)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
