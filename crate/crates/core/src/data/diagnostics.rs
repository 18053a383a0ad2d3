use std::io::Write;
use std::path::Path;

use super::frame::WeatherFrame;
use super::Variable;
use crate::error::{Error, Result};

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `corr(x_t, y_{t+lag})` for `lag = 0..=max_lag`.
fn lagged(x: &[f64], y: &[f64], max_lag: usize) -> (Vec<f64>, bool) {
    let mut degenerate = false;
    let values = (0..=max_lag)
        .map(|lag| {
            if lag >= x.len() {
                degenerate = true;
                return 0.0;
            }
            pearson(&x[..x.len() - lag], &y[lag..]).unwrap_or_else(|| {
                degenerate = true;
                0.0
            })
        })
        .collect();
    (values, degenerate)
}

/// One correlation curve over lags.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedCorrelation {
    /// Leading series.
    pub from: String,
    /// Lagged series.
    pub to: String,
    pub values: Vec<f64>,
    /// Set when some lag involved a constant series; those lags read 0.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTables {
    pub variable: Variable,
    /// Per station, the variable against its own lags.
    pub auto: Vec<LaggedCorrelation>,
    /// Per station, each other observed variable and each NWP variable
    /// leading the target.
    pub cross: Vec<LaggedCorrelation>,
    /// Per ordered station pair, station `i` leading station `j`.
    pub spatial: Vec<LaggedCorrelation>,
}

/// Autocorrelation, covariate cross-correlation and station-to-station
/// correlation of one variable, for lags `0..=max_lag`. The frame must be
/// complete.
pub fn correlation_diagnostics(frame: &WeatherFrame, variable: Variable, max_lag: usize) -> Result<CorrelationTables> {
    let stations = frame.stations();
    let targets: Vec<Vec<f64>> = (0..stations.len())
        .map(|s| frame.series(s, variable))
        .collect::<Result<_>>()?;
    let mut auto = Vec::new();
    let mut cross = Vec::new();
    for (s, name) in stations.iter().enumerate() {
        let y = &targets[s];
        let (values, degenerate) = lagged(y, y, max_lag);
        auto.push(LaggedCorrelation {
            from: format!("{name}:{variable}"),
            to: format!("{name}:{variable}"),
            values,
            degenerate,
        });
        for other in variable.others() {
            let x = frame.series(s, other)?;
            let (values, degenerate) = lagged(&x, y, max_lag);
            cross.push(LaggedCorrelation {
                from: format!("{name}:{other}"),
                to: format!("{name}:{variable}"),
                values,
                degenerate,
            });
        }
        for nv in Variable::ALL {
            let (values, degenerate) = lagged(frame.nwp(nv), y, max_lag);
            cross.push(LaggedCorrelation {
                from: format!("nwp:{nv}"),
                to: format!("{name}:{variable}"),
                values,
                degenerate,
            });
        }
    }
    let mut spatial = Vec::new();
    for (i, a) in stations.iter().enumerate() {
        for (j, b) in stations.iter().enumerate() {
            if i == j {
                continue;
            }
            let (values, degenerate) = lagged(&targets[i], &targets[j], max_lag);
            spatial.push(LaggedCorrelation {
                from: format!("{a}:{variable}"),
                to: format!("{b}:{variable}"),
                values,
                degenerate,
            });
        }
    }
    Ok(CorrelationTables {
        variable,
        auto,
        cross,
        spatial,
    })
}

impl CorrelationTables {
    /// Long-format CSV: `kind,from,to,lag,value,degenerate`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "kind,from,to,lag,value,degenerate").map_err(io)?;
        for (kind, rows) in [("auto", &self.auto), ("cross", &self.cross), ("spatial", &self.spatial)] {
            for row in rows {
                for (lag, v) in row.values.iter().enumerate() {
                    writeln!(out, "{kind},{},{},{lag},{v},{}", row.from, row.to, row.degenerate).map_err(io)?;
                }
            }
        }
        out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_zero_autocorrelation_is_one() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 7919) % 101) as f64).collect();
        let (v, d) = lagged(&x, &x, 5);
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(!d);
    }

    #[test]
    fn shifted_copy_peaks_at_its_shift() {
        let base: Vec<f64> = (0..300).map(|i| ((i * 7919 + 13) % 97) as f64).collect();
        let shift = 4;
        let y: Vec<f64> = (0..296)
            .map(|t| if t >= shift { base[t - shift] } else { 0.0 })
            .collect();
        let x = &base[..296];
        let (v, _) = lagged(x, &y, 8);
        let peak = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, shift);
        assert!(v[shift] > 0.99);
    }

    #[test]
    fn daily_sine_repeats_at_lag_24() {
        let x: Vec<f64> = (0..24 * 20)
            .map(|i| (i as f64 / 24.0 * std::f64::consts::TAU).sin())
            .collect();
        let (v, _) = lagged(&x, &x, 24);
        assert!((v[24] - 1.0).abs() < 1e-9);
        assert!(v[12] < -0.99);
    }

    #[test]
    fn constant_series_reports_zero_and_flags() {
        let c = vec![3.0; 50];
        let (v, d) = lagged(&c, &c, 3);
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(d);
    }
}
