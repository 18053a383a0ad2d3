//! Observation and NWP series: ingestion, cleaning, windowing and splits.

mod diagnostics;
mod fill;
mod frame;
mod split;
mod wind;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use diagnostics::{correlation_diagnostics, pearson, CorrelationTables, LaggedCorrelation};
pub use fill::{fill_missing, Normalizer};
pub use frame::{parse_timestamp, NwpSeries, ObservedSeries, WeatherFrame, TIMESTAMP_FORMAT};
pub use split::{
    assign_windows, day_blocks, day_intervals, month_intervals, plan_splits, plan_splits_with, Fold, FoldWindows,
    Interval, SplitMode, SplitPlan, DEFAULT_FOLDS, ROLLING_INTERVALS,
};
pub use wind::{decompose_wind, recover_direction, wrap_degrees};
pub use window::{fct_indices, make_windows, SampleWindow, WindowLayout, WindowScaler};

/// The seven weather variables carried by observation and NWP files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    V,
    Vx,
    Vy,
    Theta,
    Tp,
    Rh,
    Slp,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::V,
        Variable::Vx,
        Variable::Vy,
        Variable::Theta,
        Variable::Tp,
        Variable::Rh,
        Variable::Slp,
    ];

    /// Variables that are forecast directly; direction is derived.
    pub const TARGETS: [Variable; 3] = [Variable::V, Variable::Vx, Variable::Vy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::V => "v",
            Variable::Vx => "vx",
            Variable::Vy => "vy",
            Variable::Theta => "theta",
            Variable::Tp => "tp",
            Variable::Rh => "rh",
            Variable::Slp => "slp",
        }
    }

    /// Every variable except `self`, in canonical order.
    pub fn others(self) -> Vec<Variable> {
        Self::ALL.into_iter().filter(|&v| v != self).collect()
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "v" => Variable::V,
            "vx" => Variable::Vx,
            "vy" => Variable::Vy,
            "theta" | "θ" => Variable::Theta,
            "tp" => Variable::Tp,
            "rh" => Variable::Rh,
            "slp" => Variable::Slp,
            other => return Err(Error::Argument(format!("unknown variable '{other}'"))),
        })
    }
}
