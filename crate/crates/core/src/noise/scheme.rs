//! Shuffling schemes and their cross-epoch copulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epoch coupling rule, shared by the bridge generator and the permutation stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    /// One bridge reused in every epoch.
    SingleShuffle,
    /// Independent bridges per epoch.
    RandomReshuffle,
    /// Even epochs repeat epoch 0, odd epochs are its time-reversed negation.
    FlipFlopSingle,
    /// Independent even epochs, each followed by its time-reversed negation.
    FlipFlopRandom,
}

impl SchemeSpec {
    pub const ALL: [SchemeSpec; 4] = [
        SchemeSpec::SingleShuffle,
        SchemeSpec::RandomReshuffle,
        SchemeSpec::FlipFlopSingle,
        SchemeSpec::FlipFlopRandom,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            SchemeSpec::SingleShuffle => "ss",
            SchemeSpec::RandomReshuffle => "rr",
            SchemeSpec::FlipFlopSingle => "ffs",
            SchemeSpec::FlipFlopRandom => "ffr",
        }
    }

    /// Number of distinct epoch paths, when finite.
    pub fn distinct_epochs(&self) -> Option<usize> {
        match self {
            SchemeSpec::SingleShuffle => Some(1),
            SchemeSpec::FlipFlopSingle => Some(2),
            SchemeSpec::RandomReshuffle | SchemeSpec::FlipFlopRandom => None,
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ss" | "single-shuffle" => Ok(SchemeSpec::SingleShuffle),
            "rr" | "random-reshuffle" | "random-reshuffling" => Ok(SchemeSpec::RandomReshuffle),
            "ffs" | "flip-flop-single" => Ok(SchemeSpec::FlipFlopSingle),
            "ffr" | "flip-flop-random" => Ok(SchemeSpec::FlipFlopRandom),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} outside [0, 1]")))
    }
}

/// `C^{ij}(s, t)`: joint law of epochs `i` and `j` expressed as a 2-copula.
pub fn copula(scheme: SchemeSpec, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    let comonotone = s.min(t);
    let reversed = (s + t - 1.0).max(0.0);
    let independent = s * t;
    if i == j {
        return Ok(comonotone);
    }
    Ok(match scheme {
        SchemeSpec::SingleShuffle => comonotone,
        SchemeSpec::RandomReshuffle => independent,
        SchemeSpec::FlipFlopSingle => {
            if i % 2 == j % 2 {
                comonotone
            } else {
                reversed
            }
        }
        // The reversed pair is {2k, 2k+1} in either order; covariance is symmetric.
        SchemeSpec::FlipFlopRandom => {
            if i / 2 == j / 2 {
                reversed
            } else {
                independent
            }
        }
    })
}

/// `E[B^i_s B^j_t]` per coordinate: `C^{ij}(s, t) - s t`.
pub fn cross_covariance(scheme: SchemeSpec, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    Ok(copula(scheme, i, j, s, t)? - s * t)
}
