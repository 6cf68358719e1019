//! Monte Carlo checks of bridge Hölder seminorms: running maxima, grid refinement and tails.

use rayon::prelude::*;
use serde::Serialize;

use super::assertion::Assertion;
use super::fit::{mean, median};
use crate::error::{Error, Result};
use crate::noise::{holder_seminorm_uniform, sample_bridge, BridgeEpochs, PairSet, SchemeSpec};
use crate::rng::PathSeed;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in (0, 1/2)")))
    }
}

/// `b* = (1 - 2 alpha) / (2 - 2 alpha)`, the maximiser of `(1 - b) b^{1 - 2 alpha}`.
pub fn b_star(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha) / (2.0 - 2.0 * alpha)
}

/// `sigma^2 = (1 - b*) (b*)^{1 - 2 alpha}`, the largest variance of the normalised bridge increments.
pub fn tail_variance(alpha: f64) -> f64 {
    let b = b_star(alpha);
    (1.0 - b) * b.powf(1.0 - 2.0 * alpha)
}

/// `1 / (2 sigma^2)`: the running-max envelope `a^{-1/2} sqrt(log n)` needs `a` below this.
pub fn admissible_bound(alpha: f64) -> f64 {
    1.0 / (2.0 * tail_variance(alpha))
}

fn seminorm(values: &[f64], dim: usize, steps: usize, alpha: f64) -> Result<f64> {
    holder_seminorm_uniform(values, dim, 1.0 / steps as f64, alpha, PairSet::Exhaustive)
}

#[derive(Clone, Debug, Serialize)]
pub struct BridgeMaxReport {
    pub alpha: f64,
    pub a: f64,
    pub admissible_bound: f64,
    pub max_epochs: usize,
    pub replicates: usize,
    pub n0: usize,
    pub steps_per_unit: usize,
    /// `a^{-1/2} sqrt(log n)` at `n = max_epochs`.
    pub final_envelope: f64,
    /// `max_{j <= n} ||B^j||_alpha` at `n = max_epochs`, per replicate.
    pub final_maxima: Vec<f64>,
    /// Mean single-bridge seminorm over all sampled bridges.
    pub mean_seminorm: f64,
    pub violated_at_end: usize,
    /// Replicates whose running max stays below the envelope for every `n0 <= n <= max_epochs`.
    pub held_from_n0: usize,
    pub assertions: Vec<Assertion>,
}

impl BridgeMaxReport {
    pub fn violation_fraction(&self) -> f64 {
        self.violated_at_end as f64 / self.replicates as f64
    }
}

/// Running maxima of `||B^j||_alpha` over independent bridges against `a^{-1/2} sqrt(log n)`.
pub fn bridge_max_validation(
    alpha: f64,
    a: f64,
    max_epochs: usize,
    replicates: usize,
    n0: usize,
    steps_per_unit: usize,
    seed: u64,
) -> Result<BridgeMaxReport> {
    check_alpha(alpha)?;
    if !(a > 0.0) || max_epochs < 2 || replicates == 0 || n0 < 2 || n0 > max_epochs {
        return Err(Error::param("a", "need a > 0, replicates >= 1 and 2 <= n0 <= max_epochs"));
    }
    let envelope = |n: usize| a.powf(-0.5) * (n as f64).ln().sqrt();
    let runs = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut bridges = BridgeEpochs::new(SchemeSpec::RandomReshuffle, 1, steps_per_unit, PathSeed::new(seed, r as u64))?;
            let mut running = 0.0f64;
            let mut held = true;
            let mut total = 0.0;
            for n in 1..=max_epochs {
                let s = seminorm(bridges.next_epoch()?, 1, steps_per_unit, alpha)?;
                total += s;
                running = running.max(s);
                if n >= n0 && running > envelope(n) {
                    held = false;
                }
            }
            Ok((running, held, total / max_epochs as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let final_envelope = envelope(max_epochs);
    let final_maxima: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let violated_at_end = final_maxima.iter().filter(|m| **m > final_envelope).count();
    let held_from_n0 = runs.iter().filter(|r| r.1).count();
    let mean_seminorm = mean(&runs.iter().map(|r| r.2).collect::<Vec<_>>());
    let bound = admissible_bound(alpha);
    let fraction = violated_at_end as f64 / replicates as f64;
    let assertions = vec![
        Assertion::new(
            "a below admissible bound",
            a < bound,
            format!("a = {a}, recomputed bound 1/(2 sigma^2) = {bound:.6} at alpha = {alpha}"),
        ),
        Assertion::new(
            "running-max envelope",
            fraction < 0.05,
            format!(
                "violated at n = {max_epochs} in {violated_at_end}/{replicates} replicates (need < 5%); envelope {final_envelope:.4}, median max {:.4}; held for all n >= {n0} in {held_from_n0}/{replicates}",
                median(&final_maxima)
            ),
        ),
    ];
    Ok(BridgeMaxReport {
        alpha,
        a,
        admissible_bound: bound,
        max_epochs,
        replicates,
        n0,
        steps_per_unit,
        final_envelope,
        final_maxima,
        mean_seminorm,
        violated_at_end,
        held_from_n0,
        assertions,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub alpha: f64,
    pub fine_steps: usize,
    pub replicates: usize,
    pub fine_median: f64,
    pub coarse_median: f64,
    pub ratio: f64,
    pub assertions: Vec<Assertion>,
}

/// Median seminorm of bridges on `fine_steps` cells against the same bridges on every other point.
pub fn seminorm_refinement(alpha: f64, fine_steps: usize, replicates: usize, seed: u64) -> Result<RefinementReport> {
    check_alpha(alpha)?;
    if fine_steps < 4 || fine_steps % 2 != 0 || replicates == 0 {
        return Err(Error::param("fine_steps", "need an even number of cells >= 4 and replicates >= 1"));
    }
    let pairs = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let b = sample_bridge(1, fine_steps, &mut PathSeed::new(seed, r as u64).lane(0))?;
            let coarse: Vec<f64> = b.iter().step_by(2).copied().collect();
            Ok((seminorm(&b, 1, fine_steps, alpha)?, seminorm(&coarse, 1, fine_steps / 2, alpha)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let fine_median = median(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let coarse_median = median(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let ratio = fine_median / coarse_median;
    let assertions = vec![Assertion::new(
        "refinement stability",
        (1.0..=1.1).contains(&ratio),
        format!("median seminorm on {fine_steps} cells / on {} cells = {ratio:.4} (need [1.0, 1.1])", fine_steps / 2),
    )];
    Ok(RefinementReport {
        alpha,
        fine_steps,
        replicates,
        fine_median,
        coarse_median,
        ratio,
        assertions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    /// Offset above the empirical mean in units of `sigma`.
    pub offset: f64,
    pub x: f64,
    pub empirical: f64,
    /// `exp(-(x - m)^2 / (2 sigma^2))`.
    pub bound: f64,
    /// `sqrt(bound (1 - bound) / replicates)`.
    pub standard_error: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub alpha: f64,
    pub b_star: f64,
    pub sigma2: f64,
    pub replicates: usize,
    pub steps_per_unit: usize,
    pub mean_seminorm: f64,
    pub rows: Vec<TailRow>,
    pub monotone: bool,
    pub assertions: Vec<Assertion>,
}

/// Empirical `P(||B||_alpha > m + k sigma)` against the Gaussian concentration bound `exp(-k^2/2)`.
pub fn tail_bound_check(alpha: f64, offsets: &[f64], replicates: usize, steps_per_unit: usize, seed: u64) -> Result<TailReport> {
    check_alpha(alpha)?;
    if replicates < 2 || offsets.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::param("offsets", "need replicates >= 2 and positive offsets"));
    }
    let norms = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let b = sample_bridge(1, steps_per_unit, &mut PathSeed::new(seed, r as u64).lane(0))?;
            seminorm(&b, 1, steps_per_unit, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = mean(&norms);
    let sigma2 = tail_variance(alpha);
    let sd = sigma2.sqrt();
    let n = replicates as f64;
    let mut offsets = offsets.to_vec();
    offsets.sort_by(f64::total_cmp);
    let rows: Vec<TailRow> = offsets
        .iter()
        .map(|&k| {
            let x = m + k * sd;
            let empirical = norms.iter().filter(|v| **v > x).count() as f64 / n;
            let bound = (-0.5 * k * k).exp();
            let standard_error = (bound * (1.0 - bound) / n).sqrt();
            TailRow {
                offset: k,
                x,
                empirical,
                bound,
                standard_error,
                passes: empirical <= bound + 3.0 * standard_error,
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].empirical <= w[0].empirical);
    let failing: Vec<f64> = rows.iter().filter(|r| !r.passes).map(|r| r.offset).collect();
    let assertions = vec![
        Assertion::new(
            "tail bound",
            failing.is_empty(),
            format!("{replicates} bridges, empirical tail <= bound + 3 standard errors; failing offsets {failing:?}"),
        ),
        Assertion::new("tail monotone", monotone, "empirical tail non-increasing in x"),
    ];
    Ok(TailReport {
        alpha,
        b_star: b_star(alpha),
        sigma2,
        replicates,
        steps_per_unit,
        mean_seminorm: m,
        rows,
        monotone,
        assertions,
    })
}
