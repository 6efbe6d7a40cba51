use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Angiography phase by time since dye injection.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Early,
    Mid,
    Late,
    #[default]
    Unknown,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Early, Phase::Mid, Phase::Late, Phase::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Early => "early",
            Phase::Mid => "mid",
            Phase::Late => "late",
            Phase::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = PhaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or(PhaseError::UnknownName)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PhaseError {
    #[error("negative injection-elapsed time {0} s")]
    NegativeElapsed(f64),
    #[error("injection-elapsed time is not a number")]
    NotANumber,
    #[error("unrecognized phase name")]
    UnknownName,
}

/// Start of the early phase (frames before it are pre-venous).
pub const EARLY_START_S: f64 = 25.0;
/// Last second still counted as early.
pub const EARLY_END_S: f64 = 60.0;
/// Last second still counted as mid.
pub const MID_END_S: f64 = 300.0;

/// `[25, 60]` early, `(60, 300]` mid, above 300 late; `[0, 25)` and an
/// absent time are unknown.
pub fn phase_bin(elapsed_s: Option<f64>) -> Result<Phase, PhaseError> {
    let Some(t) = elapsed_s else {
        return Ok(Phase::Unknown);
    };
    if t.is_nan() {
        return Err(PhaseError::NotANumber);
    }
    if t < 0.0 {
        return Err(PhaseError::NegativeElapsed(t));
    }
    Ok(if t < EARLY_START_S {
        Phase::Unknown
    } else if t <= EARLY_END_S {
        Phase::Early
    } else if t <= MID_END_S {
        Phase::Mid
    } else {
        Phase::Late
    })
}
