use std::path::Path as FsPath;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::SchemeSpec;
use crate::objectives::ObjectiveSpec;
use crate::schedule::Schedule;
use crate::sgdo::InputLaw;

/// Which suite a config file drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    Scaling,
    Coherence,
}

/// Error measure used for rate fits and envelopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMeasure {
    /// `|Y_t - y_inf|` at the checkpoint.
    Pointwise,
    /// `max |Y_s - y_inf|` over the last period `s in (t - T, t]`.
    EpochSup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub periods: Vec<f64>,
    /// Horizon in epochs, shared by every period.
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceSection {
    pub samples: usize,
    /// Maximal learning rate `h`; the driving period is `T = N h`.
    pub h: f64,
    pub sigma_eps: f64,
    pub theta_star: Vec<f64>,
    #[serde(default = "default_input")]
    pub input: InputLaw,
    /// Scheme of the discrete permutation stream; must equal the driver's.
    #[serde(default)]
    pub discrete_scheme: Option<SchemeSpec>,
    /// Replicates for the epoch-0 endpoint comparison (0 skips it).
    #[serde(default)]
    pub endpoint_replicates: usize,
}

fn default_input() -> InputLaw {
    InputLaw::StandardGaussian
}

fn default_alpha() -> f64 {
    0.42
}

fn default_margin() -> f64 {
    1.5
}

fn default_decades() -> f64 {
    2.0
}

fn default_envelope_from() -> f64 {
    100.0
}

fn default_slope_tolerance() -> f64 {
    0.15
}

fn default_pass_fraction() -> f64 {
    0.9
}

fn default_measure() -> ErrorMeasure {
    ErrorMeasure::Pointwise
}

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub scheme: SchemeSpec,
    pub beta: f64,
    pub c: f64,
    /// Period `T` of the driving epoched Brownian motion.
    #[serde(default = "one")]
    pub period: f64,
    /// Final time (time units, not epochs).
    pub horizon: f64,
    /// Grid points per epoch.
    pub steps_per_unit: usize,
    pub replicates: usize,
    pub seed: u64,
    /// `d x m` noise matrix (rows).
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    /// Start point; defaults to the predicted limit.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Rate fits use the final `fit_decades` decades of the horizon.
    #[serde(default = "default_decades")]
    pub fit_decades: f64,
    /// Envelopes are checked at checkpoints `t >= envelope_from`.
    #[serde(default = "default_envelope_from")]
    pub envelope_from: f64,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_pass_fraction")]
    pub pass_fraction: f64,
    #[serde(default = "default_measure")]
    pub error: ErrorMeasure,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub scaling: Option<ScalingSection>,
    #[serde(default)]
    pub coherence: Option<CoherenceSection>,
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The config with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.beta, self.c)
    }

    pub fn sigma_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.sigma {
            Some(rows) => linalg::matrix_from_rows(rows),
            None => Err(Error::Config("`sigma` is required for this experiment".into())),
        }
    }

    pub fn objective_spec(&self) -> Result<&ObjectiveSpec> {
        self.objective
            .as_ref()
            .ok_or_else(|| Error::Config("`objective` is required for this experiment".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.schedule()?;
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad(format!("period {} must be positive", self.period));
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.steps_per_unit < 2 {
            return bad("steps_per_unit must be >= 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha {} must lie in (0, 1/2)", self.alpha));
        }
        if !(self.fit_decades > 0.0 && self.margin > 0.0 && self.envelope_from > 0.0) {
            return bad("fit_decades, margin and envelope_from must be positive".into());
        }
        match self.kind {
            ExperimentKind::Convergence => {
                if !(self.horizon >= 10.0 * self.period) {
                    return bad(format!("horizon {} must be at least 10 T = {}", self.horizon, 10.0 * self.period));
                }
                self.check_problem()?;
            }
            ExperimentKind::Scaling => {
                let s = self
                    .scaling
                    .as_ref()
                    .ok_or_else(|| Error::Config("kind = scaling needs a [scaling] section".into()))?;
                if s.epochs < 10 {
                    return bad("scaling.epochs must be >= 10".into());
                }
                self.check_problem()?;
            }
            ExperimentKind::Coherence => {
                let c = self
                    .coherence
                    .as_ref()
                    .ok_or_else(|| Error::Config("kind = coherence needs a [coherence] section".into()))?;
                if let Some(s) = c.discrete_scheme {
                    if s != self.scheme {
                        return bad(format!("discrete scheme {s} differs from driver scheme {}", self.scheme));
                    }
                }
                if !(c.h > 0.0) || c.samples <= c.theta_star.len() {
                    return bad("coherence needs h > 0 and samples > d".into());
                }
                if !(self.horizon >= 10.0 * c.h * c.samples as f64) {
                    return bad("horizon must be at least 10 T with T = N h".into());
                }
            }
        }
        Ok(())
    }

    fn check_problem(&self) -> Result<()> {
        let spec = self.objective_spec()?;
        let obj = spec.build()?;
        let sigma = self.sigma_matrix()?;
        if sigma.nrows() != obj.dim() {
            return Err(Error::Config(format!(
                "sigma has {} rows but the objective has dimension {}",
                sigma.nrows(),
                obj.dim()
            )));
        }
        if let Some(y0) = &self.initial {
            if y0.len() != obj.dim() {
                return Err(Error::Config("initial point has the wrong dimension".into()));
            }
        }
        Ok(())
    }
}
