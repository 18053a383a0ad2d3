//! Ridge-weight importance scores for candidate input series and the
//! threshold selection built on them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Normalizer, Variable, WeatherFrame};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Historical,
    Future,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Historical => "historical",
            Branch::Future => "future",
        }
    }
}

/// Importance in `[0, 1]` for each candidate; the first candidate is always
/// the target's own series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub branch: Branch,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    /// Horizons whose weights were all equal and so contributed 0.5 each.
    pub degenerate_horizons: usize,
}

/// Closed-form ridge regression without intercept:
/// `w = (XᵀX + λI)⁻¹ Xᵀy` for row-major `rows: T × P`.
pub fn ridge_fit(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if rows.len() != y.len() {
        return Err(Error::dim("ridge_fit", &[rows.len()], &[y.len()]));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 || rows.is_empty() {
        return Err(Error::Argument(
            "ridge_fit needs at least one row and one column".into(),
        ));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::dim("ridge_fit", &[p], &[r.len()]));
    }
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let gram = x.transpose() * &x + DMatrix::identity(p, p) * lambda;
    let rhs = x.transpose() * yv;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Numeric(format!(
            "ridge normal equations are singular at lambda = {lambda}; use lambda > 0"
        ))
    })?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ridge solution is not finite; increase lambda".into()));
    }
    Ok(w.iter().copied().collect())
}

fn zscore(series: &[f64]) -> Result<Vec<f64>> {
    Ok(Normalizer::fit(series)?.normalize_all(series))
}

/// Absolute weights rescaled to `[0, 1]`; `None` when all are equal.
fn min_max_abs(w: &[f64]) -> Option<Vec<f64>> {
    let a: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * hi.max(1e-300)) {
        return None;
    }
    Some(a.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

fn check_lengths(len: usize, series: &[(&str, &[f64])]) -> Result<()> {
    for (id, s) in series {
        if s.len() != len {
            return Err(Error::Data(format!(
                "series {id} has length {} instead of {len}",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Historical-branch importance: for each horizon `k` regress `y_{t+k}` on
/// `[y_t, x_t]`, take absolute weights, min-max them, then average the
/// horizons.
pub fn importance_historical(
    target: (&str, &[f64]),
    covariates: &[(&str, &[f64])],
    k: usize,
    lambda: f64,
) -> Result<ImportanceVector> {
    let n = target.1.len();
    check_lengths(n, covariates)?;
    if k == 0 || n <= k + 1 {
        return Err(Error::Argument(format!(
            "need more than {} points for {k} horizons, got {n}",
            k + 1
        )));
    }
    let y = zscore(target.1)?;
    let cols: Vec<Vec<f64>> = std::iter::once(Ok(y.clone()))
        .chain(covariates.iter().map(|(_, s)| zscore(s)))
        .collect::<Result<_>>()?;
    let p = cols.len();
    let mut total = vec![0.0; p];
    let mut degenerate = 0;
    for h in 1..=k {
        let rows: Vec<Vec<f64>> = (0..n - h).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
        let w = ridge_fit(&rows, &y[h..], lambda)?;
        match min_max_abs(&w) {
            Some(scaled) => total.iter_mut().zip(scaled).for_each(|(t, s)| *t += s),
            None => {
                degenerate += 1;
                total.iter_mut().for_each(|t| *t += 0.5);
            }
        }
    }
    Ok(ImportanceVector {
        branch: Branch::Historical,
        ids: std::iter::once(target.0)
            .chain(covariates.iter().map(|c| c.0))
            .map(String::from)
            .collect(),
        values: total.into_iter().map(|t| t / k as f64).collect(),
        degenerate_horizons: degenerate,
    })
}

/// Future-branch importance: one point-to-point regression of the observed
/// target on the NWP target and NWP covariates at the same time step.
pub fn importance_future(
    observed: &[f64],
    nwp_target: (&str, &[f64]),
    nwp_covariates: &[(&str, &[f64])],
    lambda: f64,
) -> Result<ImportanceVector> {
    let n = observed.len();
    check_lengths(n, &[nwp_target])?;
    check_lengths(n, nwp_covariates)?;
    if n < 2 {
        return Err(Error::Argument("need at least two points".into()));
    }
    let y = zscore(observed)?;
    let cols: Vec<Vec<f64>> = std::iter::once(nwp_target.1)
        .chain(nwp_covariates.iter().map(|c| c.1))
        .map(zscore)
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..n).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
    let w = ridge_fit(&rows, &y, lambda)?;
    let (values, degenerate) = match min_max_abs(&w) {
        Some(v) => (v, 0),
        None => (vec![0.5; w.len()], 1),
    };
    Ok(ImportanceVector {
        branch: Branch::Future,
        ids: std::iter::once(nwp_target.0)
            .chain(nwp_covariates.iter().map(|c| c.0))
            .map(String::from)
            .collect(),
        values,
        degenerate_horizons: degenerate,
    })
}

/// Result of averaging importance vectors over stations and thresholding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub branch: Branch,
    pub ids: Vec<String>,
    pub mean: Vec<f64>,
    /// Chosen ids in candidate order; the self-series comes first.
    pub selected: Vec<String>,
}

/// Averages per-station vectors and keeps candidates strictly above
/// `threshold`. The self-series (first candidate) is always kept.
pub fn select(vectors: &[ImportanceVector], threshold: f64) -> Result<Selection> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Argument("select needs at least one importance vector".into()))?;
    for v in vectors {
        if v.ids != first.ids || v.branch != first.branch {
            return Err(Error::Argument(
                "importance vectors disagree on candidates or branch".into(),
            ));
        }
    }
    let mean: Vec<f64> = (0..first.ids.len())
        .map(|i| vectors.iter().map(|v| v.values[i]).sum::<f64>() / vectors.len() as f64)
        .collect();
    let selected = first
        .ids
        .iter()
        .zip(&mean)
        .enumerate()
        .filter(|(i, (_, &m))| *i == 0 || m > threshold)
        .map(|(_, (id, _))| id.clone())
        .collect();
    Ok(Selection {
        branch: first.branch,
        ids: first.ids.clone(),
        mean,
        selected,
    })
}

/// Both branches' importance for one station and target, fitted on the
/// contiguous timeline range `range`. Candidates are all seven variables,
/// self first.
pub fn station_importances(
    frame: &WeatherFrame,
    station: usize,
    target: Variable,
    range: std::ops::Range<usize>,
    k: usize,
    lambda: f64,
) -> Result<(ImportanceVector, ImportanceVector)> {
    if range.end > frame.len() || range.is_empty() {
        return Err(Error::Argument(format!("range {range:?} outside the frame")));
    }
    let y_full = frame.series(station, target)?;
    let others: Vec<(Variable, Vec<f64>)> = target
        .others()
        .into_iter()
        .map(|v| Ok((v, frame.series(station, v)?)))
        .collect::<Result<_>>()?;
    let y = &y_full[range.clone()];
    let hist_cov: Vec<(&str, &[f64])> = others.iter().map(|(v, s)| (v.name(), &s[range.clone()])).collect();
    let historical = importance_historical((target.name(), y), &hist_cov, k, lambda)?;
    let fut_cov: Vec<(&str, &[f64])> = target
        .others()
        .into_iter()
        .map(|v| (v.name(), &frame.nwp(v)[range.clone()]))
        .collect();
    let future = importance_future(y, (target.name(), &frame.nwp(target)[range.clone()]), &fut_cov, lambda)?;
    Ok((historical, future))
}

/// Selections for every (branch, target) computed by `select-covariates`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CovariateReport {
    pub threshold: f64,
    pub lambda: f64,
    pub entries: BTreeMap<(Branch, Variable), Selection>,
}

impl CovariateReport {
    /// Selected covariates excluding the target itself, as variables.
    pub fn covariates(&self, branch: Branch, target: Variable) -> Result<Vec<Variable>> {
        let sel = self.entries.get(&(branch, target)).ok_or_else(|| {
            Error::Data(format!(
                "covariate report has no {} section for {target}",
                branch.name()
            ))
        })?;
        sel.selected
            .iter()
            .map(|s| s.parse::<Variable>())
            .filter(|v| !matches!(v, Ok(x) if *x == target))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "threshold={}", self.threshold);
        let _ = writeln!(out, "lambda={}", self.lambda);
        for ((branch, target), sel) in &self.entries {
            let _ = writeln!(out, "\n[{} {}]", branch.name(), target);
            for (id, m) in sel.ids.iter().zip(&sel.mean) {
                let _ = writeln!(out, "{id}={m:.4}");
            }
            let _ = writeln!(out, "selected={}", sel.selected.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = CovariateReport {
            threshold: DEFAULT_THRESHOLD,
            lambda: DEFAULT_LAMBDA,
            entries: BTreeMap::new(),
        };
        let mut current: Option<(Branch, Variable)> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Data(format!("covariate report line {}: '{line}'", n + 1));
            if let Some(inner) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let mut parts = inner.split_whitespace();
                let branch = match parts.next() {
                    Some("historical") => Branch::Historical,
                    Some("future") => Branch::Future,
                    _ => return Err(bad()),
                };
                let target: Variable = parts.next().ok_or_else(bad)?.parse()?;
                report.entries.insert(
                    (branch, target),
                    Selection {
                        branch,
                        ids: Vec::new(),
                        mean: Vec::new(),
                        selected: Vec::new(),
                    },
                );
                current = Some((branch, target));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let (key, value) = (key.trim(), value.trim());
            match current {
                None => match key {
                    "threshold" => report.threshold = value.parse().map_err(|_| bad())?,
                    "lambda" => report.lambda = value.parse().map_err(|_| bad())?,
                    _ => return Err(bad()),
                },
                Some(section) => {
                    let sel = report.entries.get_mut(&section).expect("section inserted");
                    if key == "selected" {
                        sel.selected = value
                            .split(',')
                            .map(|s| s.trim().to_string())
                            .filter(|s| !s.is_empty())
                            .collect();
                    } else {
                        sel.ids.push(key.to_string());
                        sel.mean.push(value.parse().map_err(|_| bad())?);
                    }
                }
            }
        }
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Runs both branches for each target over every station on the
    /// timeline range `range` of a complete frame.
    pub fn compute(
        frame: &WeatherFrame,
        targets: &[Variable],
        range: std::ops::Range<usize>,
        k: usize,
        threshold: f64,
        lambda: f64,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for &target in targets {
            let (mut hist, mut fut) = (Vec::new(), Vec::new());
            for s in 0..frame.stations().len() {
                let (h, f) = station_importances(frame, s, target, range.clone(), k, lambda)?;
                hist.push(h);
                fut.push(f);
            }
            entries.insert((Branch::Historical, target), select(&hist, threshold)?);
            entries.insert((Branch::Future, target), select(&fut, threshold)?);
        }
        Ok(Self {
            threshold,
            lambda,
            entries,
        })
    }
}
