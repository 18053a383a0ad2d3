use crate::data::{Variable, WeatherFrame};
use crate::error::{Error, Result};

const PERIOD: usize = 24;

/// Forecast for `(t, t+K]` repeating the observations of the last 24 hours.
/// The frame must be complete.
pub fn persistence_forecast(
    frame: &WeatherFrame,
    station: usize,
    var: Variable,
    fct: usize,
    k: usize,
) -> Result<Vec<f64>> {
    if fct + 1 < PERIOD {
        return Err(Error::Argument(format!(
            "persistence at index {fct} needs {PERIOD} hours of history"
        )));
    }
    let series = frame.series(station, var)?;
    if fct >= series.len() {
        return Err(Error::Argument(format!("creation index {fct} outside the frame")));
    }
    let first = fct + 1 - PERIOD;
    Ok((0..k).map(|h| series[first + h % PERIOD]).collect())
}

/// The NWP values of `var` over `(t, t+K]`.
pub fn nwp_forecast(frame: &WeatherFrame, var: Variable, fct: usize, k: usize) -> Result<Vec<f64>> {
    let series = frame.nwp(var);
    if fct + k >= series.len() {
        return Err(Error::Data(format!(
            "NWP rows end before horizon {k} of creation index {fct}"
        )));
    }
    Ok(series[fct + 1..=fct + k].to_vec())
}
