//! Brownian bridges, epoched bridges and epoched Brownian motions on uniform grids.

use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{Grid, Path};
use super::scheme::SchemeSpec;
use crate::error::{Error, Result};
use crate::rng::{PathSeed, DRIFT_LANE};

/// One Brownian bridge from 0 to 0 on `[0, 1]`, `steps` cells, point-major values.
///
/// A Brownian path `W` is built from independent Gaussian increments and
/// pinned with `B_t = W_t - t W_1`, which is exact in law at the grid points.
pub fn sample_bridge<R: Rng + ?Sized>(dim: usize, steps: usize, rng: &mut R) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::param("steps", "bridge grid needs at least 2 points"));
    }
    if dim == 0 {
        return Err(Error::param("dim", "dimension must be >= 1"));
    }
    let sd = (1.0 / steps as f64).sqrt();
    let mut w = vec![0.0; (steps + 1) * dim];
    for i in 1..=steps {
        for k in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            w[i * dim + k] = w[(i - 1) * dim + k] + sd * z;
        }
    }
    let end: Vec<f64> = w[steps * dim..].to_vec();
    for i in 0..=steps {
        let s = i as f64 / steps as f64;
        for k in 0..dim {
            w[i * dim + k] -= s * end[k];
        }
    }
    for k in 0..dim {
        w[k] = 0.0;
        w[steps * dim + k] = 0.0;
    }
    Ok(w)
}

/// Grid realisation of an epoched Brownian bridge `X_t = B^{floor t}_{t - floor t}` on `[0, J]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochedBridgePath {
    scheme: SchemeSpec,
    seed: PathSeed,
    path: Path,
}

impl EpochedBridgePath {
    pub fn scheme(&self) -> SchemeSpec {
        self.scheme
    }

    pub fn seed(&self) -> PathSeed {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn epochs(&self) -> usize {
        self.path.grid().units()
    }

    pub fn steps_per_unit(&self) -> usize {
        self.path.grid().steps_per_unit()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Values of epoch `j` on its `steps_per_unit + 1` points.
    pub fn epoch(&self, j: usize) -> &[f64] {
        let n = self.steps_per_unit();
        self.path.slice(j * n, (j + 1) * n)
    }
}

/// Epoch-by-epoch generator of the bridges `B^0, B^1, ..` of a scheme.
///
/// Coupling is by construction: copy, independent draw, or reverse-and-negate.
/// Epoch `j` draws from lane `j` of the seed, so any prefix of epochs is
/// reproducible on its own.
#[derive(Clone, Debug)]
pub struct BridgeEpochs {
    scheme: SchemeSpec,
    dim: usize,
    steps: usize,
    seed: PathSeed,
    next: usize,
    current: Vec<f64>,
}

impl BridgeEpochs {
    pub fn new(scheme: SchemeSpec, dim: usize, steps_per_unit: usize, seed: PathSeed) -> Result<Self> {
        if steps_per_unit == 0 {
            return Err(Error::param("steps", "bridge grid needs at least 2 points"));
        }
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be >= 1"));
        }
        Ok(Self {
            scheme,
            dim,
            steps: steps_per_unit,
            seed,
            next: 0,
            current: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps
    }

    /// Index of the epoch the next call to [`BridgeEpochs::next_epoch`] returns.
    pub fn position(&self) -> usize {
        self.next
    }

    /// Values of the next epoch on its `steps_per_unit + 1` points.
    pub fn next_epoch(&mut self) -> Result<&[f64]> {
        let j = self.next;
        let fresh = |j: usize| sample_bridge(self.dim, self.steps, &mut self.seed.lane(j as u64));
        let next = match (self.scheme, j) {
            (_, 0) => fresh(0)?,
            (SchemeSpec::SingleShuffle, _) => std::mem::take(&mut self.current),
            (SchemeSpec::RandomReshuffle, _) => fresh(j)?,
            (SchemeSpec::FlipFlopSingle, _) => reverse_negate(&self.current, self.dim),
            (SchemeSpec::FlipFlopRandom, _) if j % 2 == 1 => reverse_negate(&self.current, self.dim),
            (SchemeSpec::FlipFlopRandom, _) => fresh(j)?,
        };
        self.current = next;
        self.next += 1;
        Ok(&self.current)
    }
}

/// Samples `epochs` coupled bridges according to `scheme`.
pub fn sample_epoched_bridge(
    scheme: SchemeSpec,
    dim: usize,
    epochs: usize,
    steps_per_unit: usize,
    seed: PathSeed,
) -> Result<EpochedBridgePath> {
    if epochs == 0 {
        return Err(Error::param("epochs", "need at least one epoch"));
    }
    let grid = Grid::new(epochs, steps_per_unit)?;
    let n = steps_per_unit;
    let mut values = vec![0.0; grid.len() * dim];
    let mut source = BridgeEpochs::new(scheme, dim, steps_per_unit, seed)?;
    for j in 0..epochs {
        let current = source.next_epoch()?;
        values[j * n * dim..(j + 1) * n * dim].copy_from_slice(&current[..n * dim]);
    }
    // Epoch boundaries (including t = J) stay exactly zero.
    Ok(EpochedBridgePath {
        scheme,
        seed,
        path: Path::new(grid, dim, values)?,
    })
}

/// `t -> -B_{1 - t}` on a symmetric uniform grid.
fn reverse_negate(bridge: &[f64], dim: usize) -> Vec<f64> {
    let points = bridge.len() / dim;
    let mut out = vec![0.0; bridge.len()];
    for i in 0..points {
        let src = &bridge[(points - 1 - i) * dim..(points - i) * dim];
        for k in 0..dim {
            out[i * dim + k] = -src[k] + 0.0;
        }
    }
    out
}

/// Epoched Brownian motion `W_t = sqrt(T) X_{t/T} + (t / sqrt(T)) V` of period `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EbmPath {
    period: f64,
    bridge: EpochedBridgePath,
    drift: Vec<f64>,
    values: Path,
}

impl EbmPath {
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn bridge(&self) -> &EpochedBridgePath {
        &self.bridge
    }

    /// The standard Gaussian `V`.
    pub fn drift_gaussian(&self) -> &[f64] {
        &self.drift
    }

    pub fn path(&self) -> &Path {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    /// `W_T = sqrt(T) V`, exactly.
    pub fn endpoint(&self) -> Vec<f64> {
        let r = self.period.sqrt();
        self.drift.iter().map(|v| r * v).collect()
    }
}

/// Combines a bridge with an independent `V ~ N(0, I)` drawn from `drift_seed`.
pub fn assemble_ebm(bridge: EpochedBridgePath, period: f64, drift_seed: PathSeed) -> Result<EbmPath> {
    let drift = drift_gaussian(bridge.dim(), drift_seed);
    assemble_ebm_with(bridge, period, drift)
}

/// As [`assemble_ebm`] with a caller-supplied `V`.
pub fn assemble_ebm_with(bridge: EpochedBridgePath, period: f64, drift: Vec<f64>) -> Result<EbmPath> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::param("period", format!("T = {period} must be positive")));
    }
    let dim = bridge.dim();
    if drift.len() != dim {
        return Err(Error::param("drift", format!("length {} != dim {dim}", drift.len())));
    }
    let root = period.sqrt();
    let bgrid = *bridge.path().grid();
    let grid = bgrid.with_scale(period)?;
    let n = bgrid.steps_per_unit() as f64;
    let mut values = Vec::with_capacity(grid.len() * dim);
    for i in 0..grid.len() {
        let frac = i as f64 / n;
        let x = bridge.path().at(i);
        for k in 0..dim {
            values.push(root * x[k] + root * frac * drift[k]);
        }
    }
    Ok(EbmPath {
        period,
        bridge,
        drift,
        values: Path::new(grid, dim, values)?,
    })
}

/// Convenience: scheme bridge plus drift from one seed record.
pub fn sample_ebm(
    scheme: SchemeSpec,
    dim: usize,
    epochs: usize,
    steps_per_unit: usize,
    period: f64,
    seed: PathSeed,
) -> Result<EbmPath> {
    let bridge = sample_epoched_bridge(scheme, dim, epochs, steps_per_unit, seed)?;
    assemble_ebm(bridge, period, seed)
}

/// `V ~ N(0, I)` as drawn by [`assemble_ebm`] for `seed`.
pub fn drift_gaussian(dim: usize, seed: PathSeed) -> Vec<f64> {
    let mut rng = seed.lane(DRIFT_LANE);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Epoch-by-epoch values of the epoched Brownian motion that [`sample_ebm`]
/// would materialise for the same arguments, bit for bit.
#[derive(Clone, Debug)]
pub struct EbmEpochs {
    bridges: BridgeEpochs,
    period: f64,
    drift: Vec<f64>,
    values: Vec<f64>,
}

impl EbmEpochs {
    pub fn new(scheme: SchemeSpec, dim: usize, steps_per_unit: usize, period: f64, seed: PathSeed) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::param("period", format!("T = {period} must be positive")));
        }
        Ok(Self {
            bridges: BridgeEpochs::new(scheme, dim, steps_per_unit, seed)?,
            period,
            drift: drift_gaussian(dim, seed),
            values: Vec::new(),
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.bridges.dim()
    }

    pub fn steps_per_unit(&self) -> usize {
        self.bridges.steps_per_unit()
    }

    pub fn drift_gaussian(&self) -> &[f64] {
        &self.drift
    }

    /// `W_T = sqrt(T) V`.
    pub fn endpoint(&self) -> Vec<f64> {
        let r = self.period.sqrt();
        self.drift.iter().map(|v| r * v).collect()
    }

    /// Index of the epoch returned by the next call to [`EbmEpochs::next_epoch`].
    pub fn position(&self) -> usize {
        self.bridges.position()
    }

    /// Grid of one epoch in time units: point `i` of epoch `j` sits at
    /// `T * ((j n + i) / n)`.
    pub fn time(&self, epoch: usize, i: usize) -> f64 {
        let n = self.steps_per_unit();
        self.period * ((epoch * n + i) as f64 / n as f64)
    }

    /// Bridge values of the most recently returned epoch.
    pub fn bridge_epoch(&self) -> &[f64] {
        &self.bridges.current
    }

    /// Values of `W` on the next epoch's `steps_per_unit + 1` points.
    pub fn next_epoch(&mut self) -> Result<&[f64]> {
        let j = self.bridges.position();
        let n = self.bridges.steps_per_unit();
        let dim = self.drift.len();
        let root = self.period.sqrt();
        let x = self.bridges.next_epoch()?;
        self.values.clear();
        for i in 0..=n {
            let frac = (j * n + i) as f64 / n as f64;
            for k in 0..dim {
                self.values.push(root * x[i * dim + k] + root * frac * self.drift[k]);
            }
        }
        Ok(&self.values)
    }
}
