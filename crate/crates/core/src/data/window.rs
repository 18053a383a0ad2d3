use chrono::NaiveDateTime;
use chrono::Timelike;
use serde::{Deserialize, Serialize};

use super::fill::Normalizer;
use super::frame::WeatherFrame;
use super::Variable;
use crate::error::{Error, Result};

/// Which series feed a window and how long each block is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub target: Variable,
    /// Observed covariates appended after the target in the history block.
    pub history: Vec<Variable>,
    /// NWP covariates appended after the NWP target in the future block.
    pub future: Vec<Variable>,
    pub w: usize,
    pub k: usize,
    pub fct_hour: u32,
}

impl WindowLayout {
    /// Target-only layout with the default 24/24 window at hour 00.
    pub fn new(target: Variable) -> Self {
        Self {
            target,
            history: Vec::new(),
            future: Vec::new(),
            w: 24,
            k: 24,
            fct_hour: 0,
        }
    }

    pub fn with_covariates(mut self, history: Vec<Variable>, future: Vec<Variable>) -> Self {
        self.history = history.into_iter().filter(|&v| v != self.target).collect();
        self.future = future.into_iter().filter(|&v| v != self.target).collect();
        self
    }

    pub fn with_lengths(mut self, w: usize, k: usize) -> Self {
        self.w = w;
        self.k = k;
        self
    }

    /// Observed series in column order (target first).
    pub fn history_vars(&self) -> Vec<Variable> {
        std::iter::once(self.target)
            .chain(self.history.iter().copied())
            .collect()
    }

    /// NWP series in column order (target first).
    pub fn future_vars(&self) -> Vec<Variable> {
        std::iter::once(self.target)
            .chain(self.future.iter().copied())
            .collect()
    }

    pub fn history_width(&self) -> usize {
        1 + self.history.len()
    }

    pub fn future_width(&self) -> usize {
        1 + self.future.len()
    }
}

/// One forecasting instance at creation index `fct`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWindow {
    pub fct: usize,
    /// `W × history_width`, row-major, oldest step first.
    pub history: Vec<f64>,
    /// `K × future_width`, row-major.
    pub future: Vec<f64>,
    /// `K` observed target values.
    pub target: Vec<f64>,
}

/// Creation indices whose history `[t−W+1, t]` and horizon `[t+1, t+K]` both
/// fit in a timeline, at the given hour of day.
pub fn fct_indices(timeline: &[NaiveDateTime], w: usize, k: usize, fct_hour: u32) -> Vec<usize> {
    if w == 0 || k == 0 {
        return Vec::new();
    }
    timeline
        .iter()
        .enumerate()
        .filter(|(t, ts)| ts.hour() == fct_hour && ts.minute() == 0 && *t + 1 >= w && t + k < timeline.len())
        .map(|(t, _)| t)
        .collect()
}

/// Windows for one station, in chronological order. The frame must be
/// complete (see [`WeatherFrame::filled`]).
pub fn make_windows(frame: &WeatherFrame, station: usize, layout: &WindowLayout) -> Result<Vec<SampleWindow>> {
    if station >= frame.stations().len() {
        return Err(Error::Argument(format!("station index {station} out of range")));
    }
    if layout.w == 0 || layout.k == 0 {
        return Err(Error::Argument("window lengths must be positive".into()));
    }
    let hist: Vec<Vec<f64>> = layout
        .history_vars()
        .iter()
        .map(|&v| frame.series(station, v))
        .collect::<Result<_>>()?;
    let fut: Vec<&[f64]> = layout.future_vars().iter().map(|&v| frame.nwp(v)).collect();
    let target = &hist[0];
    let windows = fct_indices(frame.timeline(), layout.w, layout.k, layout.fct_hour)
        .into_iter()
        .map(|t| {
            let mut history = Vec::with_capacity(layout.w * hist.len());
            for i in t + 1 - layout.w..=t {
                history.extend(hist.iter().map(|s| s[i]));
            }
            let mut future = Vec::with_capacity(layout.k * fut.len());
            for i in t + 1..=t + layout.k {
                future.extend(fut.iter().map(|s| s[i]));
            }
            SampleWindow {
                fct: t,
                history,
                future,
                target: target[t + 1..=t + layout.k].to_vec(),
            }
        })
        .collect();
    Ok(windows)
}

/// Per-series normalizers for the columns of a window layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowScaler {
    /// One per history column; the first also scales the target block.
    pub history: Vec<Normalizer>,
    pub future: Vec<Normalizer>,
}

impl WindowScaler {
    /// Fits every series on the given timeline indices only.
    pub fn fit(frame: &WeatherFrame, station: usize, layout: &WindowLayout, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Argument("no training indices to fit normalization on".into()));
        }
        let pick = |s: &[f64]| indices.iter().map(|&i| s[i]).collect::<Vec<_>>();
        let history = layout
            .history_vars()
            .iter()
            .map(|&v| Normalizer::fit(&pick(&frame.series(station, v)?)))
            .collect::<Result<_>>()?;
        let future = layout
            .future_vars()
            .iter()
            .map(|&v| Normalizer::fit(&pick(frame.nwp(v))))
            .collect::<Result<_>>()?;
        Ok(Self { history, future })
    }

    pub fn target(&self) -> Normalizer {
        self.history[0]
    }

    pub fn apply(&self, window: &SampleWindow) -> SampleWindow {
        let scale = |values: &[f64], norms: &[Normalizer]| {
            values
                .iter()
                .enumerate()
                .map(|(i, &x)| norms[i % norms.len()].normalize(x))
                .collect()
        };
        SampleWindow {
            fct: window.fct,
            history: scale(&window.history, &self.history),
            future: scale(&window.future, &self.future),
            target: self.target().normalize_all(&window.target),
        }
    }
}
