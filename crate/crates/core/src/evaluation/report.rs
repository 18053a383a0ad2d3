use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Variable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Rmse,
    Rrse,
    Amae,
    Namae,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Rrse => "rrse",
            Metric::Amae => "amae",
            Metric::Namae => "namae",
        }
    }

    /// Metrics reported for a variable.
    pub fn for_variable(var: Variable) -> &'static [Metric] {
        if var == Variable::Theta {
            &[Metric::Amae, Metric::Namae]
        } else {
            &[Metric::Rmse, Metric::Rrse]
        }
    }
}

/// One metric value of one station inside a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    pub station: String,
    pub variable: Variable,
    pub metric: Metric,
    pub value: f64,
}

/// Outcome of one (model, fold, seed) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub model: String,
    pub fold: usize,
    pub seed: u64,
    pub outcome: std::result::Result<Vec<Score>, String>,
}

/// Mean over all (station, fold, seed) scores, and the standard deviation
/// of the per-seed means.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub models: Vec<String>,
    pub stations: Vec<String>,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
}

pub const REPORT_VARIABLES: [Variable; 4] = [Variable::V, Variable::Vx, Variable::Vy, Variable::Theta];

impl MetricReport {
    pub fn failed(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }

    pub fn aggregate(&self, model: &str, variable: Variable, metric: Metric) -> Option<Aggregate> {
        let mut per_seed: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        let (mut sum, mut count) = (0.0, 0usize);
        for cell in self.cells.iter().filter(|c| c.model == model) {
            let Ok(scores) = &cell.outcome else { continue };
            for s in scores.iter().filter(|s| s.variable == variable && s.metric == metric) {
                sum += s.value;
                count += 1;
                let e = per_seed.entry(cell.seed).or_default();
                e.0 += s.value;
                e.1 += 1;
            }
        }
        if count == 0 {
            return None;
        }
        let means: Vec<f64> = per_seed.values().map(|(s, n)| s / *n as f64).collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let std = if means.len() > 1 {
            (means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Aggregate {
            mean: sum / count as f64,
            std,
            count,
        })
    }

    /// Key/value header, a model × metric table of `mean ± std`, and the
    /// list of failed cells.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "models={}", self.models.join(","));
        let _ = writeln!(out, "stations={}", self.stations.join(","));
        let _ = writeln!(out, "folds={}", self.folds);
        let _ = writeln!(out, "seeds={}", seeds.join(","));
        let _ = writeln!(out, "cells={}", self.cells.len());
        let _ = writeln!(out, "failed={}", self.failed().count());
        let _ = writeln!(out);
        let _ = writeln!(out, "[table]");
        let mut header = vec!["model".to_string()];
        for var in REPORT_VARIABLES {
            for m in Metric::for_variable(var) {
                header.push(format!("{var}_{}", m.name()));
            }
        }
        let _ = writeln!(out, "{}", header.join("\t"));
        for model in &self.models {
            let mut row = vec![model.clone()];
            for var in REPORT_VARIABLES {
                for &m in Metric::for_variable(var) {
                    row.push(match self.aggregate(model, var, m) {
                        Some(a) => format!("{:.4} ± {:.4}", a.mean, a.std),
                        None => "-".into(),
                    });
                }
            }
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        let failed: Vec<&Cell> = self.failed().collect();
        if !failed.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "[failed]");
            for c in failed {
                let reason = c.outcome.as_ref().err().map_or("", |s| s.as_str());
                let _ = writeln!(
                    out,
                    "model={} fold={} seed={} reason={}",
                    c.model,
                    c.fold,
                    c.seed,
                    reason.replace('\n', " ")
                );
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(v: f64) -> Score {
        Score {
            station: "a".into(),
            variable: Variable::V,
            metric: Metric::Rmse,
            value: v,
        }
    }

    #[test]
    fn aggregate_is_the_mean_of_cells() {
        let mut r = MetricReport {
            models: vec!["m".into()],
            stations: vec!["a".into()],
            folds: 2,
            seeds: vec![0, 1],
            cells: Vec::new(),
        };
        let values = [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 4.0), (1, 1, 5.0)];
        for (fold, seed, v) in values {
            r.cells.push(Cell {
                model: "m".into(),
                fold,
                seed,
                outcome: Ok(vec![score(v)]),
            });
        }
        r.cells.push(Cell {
            model: "m".into(),
            fold: 2,
            seed: 0,
            outcome: Err("boom".into()),
        });
        let a = r.aggregate("m", Variable::V, Metric::Rmse).unwrap();
        assert_eq!(a.mean, 3.0);
        assert_eq!(a.count, 4);
        // per-seed means 2.5 and 3.5
        assert!((a.std - 0.5f64.sqrt()).abs() < 1e-12);
        let text = r.to_text();
        assert!(text.contains("3.0000 ± 0.7071"));
        assert!(text.contains("reason=boom"));
        assert!(text.contains("failed=1"));
    }
}
