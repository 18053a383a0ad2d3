use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;

use super::baselines::{nwp_forecast, persistence_forecast};
use super::metrics::{amae, namae, rmse, rrse};
use super::report::{Cell, Metric, MetricReport, Score, REPORT_VARIABLES};
use crate::covariates::{Branch, CovariateReport};
use crate::data::{
    assign_windows, fct_indices, Interval, SplitPlan, Variable, WeatherFrame, WindowLayout, TIMESTAMP_FORMAT,
};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::training::{
    directions, predict, train_history_baseline, train_pipeline, PipelinePlan, PredictionSet, StageDepth, StationNets,
    TrainConfig,
};

/// Which covariates a trained model receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CovariateMode {
    /// Target series only.
    None,
    /// Covariates chosen by importance selection on the training range.
    Selected,
    /// Every other variable.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Persistence,
    Nwp,
    /// History-only LSTM.
    HistoryLstm,
    Mhstn(StageDepth),
}

/// A roster entry such as `nwp`, `mhstn-e` or `mhstn-t+c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub covariates: CovariateMode,
}

impl ModelSpec {
    pub fn is_trained(&self) -> bool {
        matches!(self.kind, ModelKind::HistoryLstm | ModelKind::Mhstn(_))
    }

    /// Parses a comma-separated roster.
    pub fn parse_roster(text: &str) -> Result<Vec<ModelSpec>> {
        let roster: Vec<ModelSpec> = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if roster.is_empty() {
            return Err(Error::Argument("empty model roster".into()));
        }
        Ok(roster)
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let base = match self.kind {
            ModelKind::Persistence => "persistence",
            ModelKind::Nwp => "nwp",
            ModelKind::HistoryLstm => "lstm-h",
            ModelKind::Mhstn(StageDepth::Temporal) => "mhstn-t",
            ModelKind::Mhstn(StageDepth::Spatial) => "mhstn-s",
            ModelKind::Mhstn(StageDepth::Ensemble) => "mhstn-e",
        };
        let suffix = match self.covariates {
            CovariateMode::None => "",
            CovariateMode::Selected => "+c",
            CovariateMode::All => "+c*",
        };
        write!(f, "{base}{suffix}")
    }
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (base, covariates) = if let Some(b) = s.strip_suffix("+c*") {
            (b, CovariateMode::All)
        } else if let Some(b) = s.strip_suffix("+c") {
            (b, CovariateMode::Selected)
        } else {
            (s.as_str(), CovariateMode::None)
        };
        let kind = match base {
            "persistence" => ModelKind::Persistence,
            "nwp" => ModelKind::Nwp,
            "lstm-h" => ModelKind::HistoryLstm,
            "mhstn-t" => ModelKind::Mhstn(StageDepth::Temporal),
            "mhstn-s" => ModelKind::Mhstn(StageDepth::Spatial),
            "mhstn-e" => ModelKind::Mhstn(StageDepth::Ensemble),
            _ => return Err(Error::Argument(format!("unknown model '{s}'"))),
        };
        if !matches!(kind, ModelKind::HistoryLstm | ModelKind::Mhstn(_)) && covariates != CovariateMode::None {
            return Err(Error::Argument(format!("model '{base}' takes no covariates")));
        }
        Ok(Self { kind, covariates })
    }
}

/// One line of a prediction dump.
#[derive(Clone, Debug, PartialEq)]
pub struct DumpRow {
    pub model: String,
    pub fold: usize,
    pub seed: u64,
    pub fct: NaiveDateTime,
    pub station: String,
    pub horizon: usize,
    pub variable: Variable,
    pub truth: Option<f64>,
    pub pred: Option<f64>,
}

/// Writes `model,fold,seed,fct,station,horizon,variable,truth,pred` rows;
/// unknown values are empty.
pub fn write_predictions(rows: &[DumpRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "model,fold,seed,fct,station,horizon,variable,truth,pred").map_err(io)?;
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.fold,
            r.seed,
            r.fct.format(TIMESTAMP_FORMAT),
            r.station,
            r.horizon,
            r.variable,
            cell(r.truth),
            cell(r.pred)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Everything needed to run the fold × seed × model grid.
#[derive(Clone, Debug)]
pub struct ExperimentSetup {
    pub intervals: Vec<Interval>,
    pub plan: SplitPlan,
    pub roster: Vec<ModelSpec>,
    pub seeds: Vec<u64>,
    pub config: TrainConfig,
    /// Keep every forecast for a prediction dump.
    pub collect_predictions: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Experiment {
    pub report: MetricReport,
    pub predictions: Vec<DumpRow>,
}

/// Scores a forecast set against the observations in `raw`. Cells with a
/// missing truth or an undefined predicted direction are skipped.
pub fn score_predictions(raw: &WeatherFrame, set: &PredictionSet) -> Result<Vec<Score>> {
    let mut scores = Vec::new();
    for (s, name) in set.stations.iter().enumerate() {
        for var in REPORT_VARIABLES {
            let (mut truth, mut pred) = (Vec::new(), Vec::new());
            for (i, &t) in set.fcts.iter().enumerate() {
                for h in 0..set.k {
                    if let (Some(y), Some(p)) = (raw.obs(s, var)[t + 1 + h], set.value(var, s, i, h)) {
                        truth.push(y);
                        pred.push(p);
                    }
                }
            }
            if truth.is_empty() {
                continue;
            }
            for &metric in Metric::for_variable(var) {
                let value = match metric {
                    Metric::Rmse => rmse(&truth, &pred)?,
                    Metric::Rrse => rrse(&truth, &pred)?,
                    Metric::Amae => amae(&truth, &pred)?,
                    Metric::Namae => namae(&truth, &pred)?,
                };
                scores.push(Score {
                    station: name.clone(),
                    variable: var,
                    metric,
                    value,
                });
            }
        }
    }
    Ok(scores)
}

fn dump_rows(raw: &WeatherFrame, set: &PredictionSet, model: &str, fold: usize, seed: u64) -> Vec<DumpRow> {
    let mut rows = Vec::new();
    for (i, &t) in set.fcts.iter().enumerate() {
        for (s, name) in set.stations.iter().enumerate() {
            for h in 0..set.k {
                for var in REPORT_VARIABLES {
                    rows.push(DumpRow {
                        model: model.to_string(),
                        fold,
                        seed,
                        fct: raw.timeline()[t],
                        station: name.clone(),
                        horizon: h + 1,
                        variable: var,
                        truth: raw.obs(s, var)[t + 1 + h],
                        pred: set.value(var, s, i, h),
                    });
                }
            }
        }
    }
    rows
}

/// Forecasts of a no-training baseline; the frame must be complete.
pub fn baseline_predictions(frame: &WeatherFrame, kind: ModelKind, fcts: &[usize], k: usize) -> Result<PredictionSet> {
    let n = frame.stations().len();
    let mut per_var: BTreeMap<Variable, Vec<Vec<Vec<f64>>>> = BTreeMap::new();
    for var in REPORT_VARIABLES {
        let mut stations = Vec::with_capacity(n);
        for s in 0..n {
            let rows = fcts
                .iter()
                .map(|&t| match kind {
                    ModelKind::Persistence => persistence_forecast(frame, s, var, t, k),
                    ModelKind::Nwp => nwp_forecast(frame, var, t, k),
                    _ => Err(Error::Argument("not a baseline model".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            stations.push(rows);
        }
        per_var.insert(var, stations);
    }
    let mut take = |v: Variable| per_var.remove(&v).unwrap_or_default();
    let theta = take(Variable::Theta)
        .into_iter()
        .map(|s| s.into_iter().map(|r| r.into_iter().map(Some).collect()).collect())
        .collect();
    Ok(PredictionSet {
        stations: frame.stations().to_vec(),
        fcts: fcts.to_vec(),
        k,
        v: take(Variable::V),
        vx: take(Variable::Vx),
        vy: take(Variable::Vy),
        theta,
    })
}

/// Window layout of one target under a covariate mode.
pub fn layout_for(
    target: Variable,
    mode: CovariateMode,
    report: Option<&CovariateReport>,
    cfg: &TrainConfig,
) -> Result<WindowLayout> {
    let mut layout = WindowLayout::new(target).with_lengths(cfg.w, cfg.k);
    layout.fct_hour = cfg.fct_hour;
    Ok(match mode {
        CovariateMode::None => layout,
        CovariateMode::All => layout.with_covariates(target.others(), target.others()),
        CovariateMode::Selected => {
            let r = report.ok_or_else(|| Error::State("covariate selection is missing".into()))?;
            layout.with_covariates(
                r.covariates(Branch::Historical, target)?,
                r.covariates(Branch::Future, target)?,
            )
        }
    })
}

struct FoldContext<'a> {
    filled: &'a WeatherFrame,
    plan: PipelinePlan,
    test_fcts: Vec<usize>,
    report: Option<CovariateReport>,
}

fn train_mhstn(
    ctx: &FoldContext,
    mode: CovariateMode,
    depth: StageDepth,
    cfg: &TrainConfig,
) -> Result<[StationNets; 3]> {
    let mut nets = Vec::with_capacity(3);
    for target in Variable::TARGETS {
        let layout = layout_for(target, mode, ctx.report.as_ref(), cfg)?;
        nets.push(train_pipeline(ctx.filled, &layout, &ctx.plan, cfg, depth)?.0);
    }
    Ok(nets.try_into().expect("three targets"))
}

fn history_predictions(ctx: &FoldContext, mode: CovariateMode, cfg: &TrainConfig) -> Result<PredictionSet> {
    let mut out = Vec::with_capacity(3);
    for target in Variable::TARGETS {
        let layout = layout_for(target, mode, ctx.report.as_ref(), cfg)?;
        let models = train_history_baseline(ctx.filled, &layout, &ctx.plan, cfg)?;
        out.push(models.forecast(ctx.filled, &ctx.test_fcts)?);
    }
    let vy = out.pop().expect("vy");
    let vx = out.pop().expect("vx");
    let mut v = out.pop().expect("v");
    if cfg.clip_speed {
        v.iter_mut().flatten().flatten().for_each(|x| *x = x.max(0.0));
    }
    Ok(PredictionSet {
        stations: ctx.filled.stations().to_vec(),
        fcts: ctx.test_fcts.clone(),
        k: cfg.k,
        theta: directions(&vx, &vy),
        v,
        vx,
        vy,
    })
}

/// Trains and scores every (model, fold, seed) combination. Failures of a
/// combination are recorded in its cell. Baselines give the same cell for
/// every seed.
pub fn run_experiment(raw: &WeatherFrame, setup: &ExperimentSetup) -> Result<Experiment> {
    if setup.seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }
    if setup.plan.n_intervals != setup.intervals.len() {
        return Err(Error::Argument(format!(
            "plan expects {} intervals, got {}",
            setup.plan.n_intervals,
            setup.intervals.len()
        )));
    }
    let cfg = &setup.config;
    cfg.validate()?;
    let filled = raw.filled()?;
    let fcts = fct_indices(filled.timeline(), cfg.w, cfg.k, cfg.fct_hour);
    let names: Vec<String> = setup.roster.iter().map(|m| m.to_string()).collect();
    let mut exp = Experiment {
        report: MetricReport {
            models: names.clone(),
            stations: filled.stations().to_vec(),
            folds: setup.plan.folds.len(),
            seeds: setup.seeds.clone(),
            cells: Vec::new(),
        },
        predictions: Vec::new(),
    };

    for (fi, fold) in setup.plan.folds.iter().enumerate() {
        let prepared = assign_windows(&fcts, cfg.w, cfg.k, &setup.intervals, fold).and_then(|fw| {
            if fw.test.is_empty() {
                return Err(Error::Data(format!("fold {fi} has no complete test window")));
            }
            let plan = PipelinePlan::from_fold(&fcts, &fw);
            let test_fcts: Vec<usize> = fw.test.iter().map(|&p| fcts[p]).collect();
            let needs_report = setup.roster.iter().any(|m| m.covariates == CovariateMode::Selected);
            let report = if needs_report {
                let lo = *plan
                    .norm_indices
                    .iter()
                    .min()
                    .ok_or_else(|| Error::Data("empty training range".into()))?;
                let hi = *plan.norm_indices.iter().max().expect("non-empty") + 1;
                Some(CovariateReport::compute(
                    &filled,
                    &Variable::TARGETS,
                    lo..hi,
                    cfg.k,
                    cfg.threshold,
                    cfg.ridge_lambda,
                )?)
            } else {
                None
            };
            Ok(FoldContext {
                filled: &filled,
                plan,
                test_fcts,
                report,
            })
        });
        let ctx = match prepared {
            Ok(c) => c,
            Err(e) => {
                for name in &names {
                    for &seed in &setup.seeds {
                        exp.report.cells.push(Cell {
                            model: name.clone(),
                            fold: fi,
                            seed,
                            outcome: Err(e.to_string()),
                        });
                    }
                }
                continue;
            }
        };

        let mut sets: BTreeMap<(usize, u64), Result<PredictionSet>> = BTreeMap::new();
        for (mi, spec) in setup.roster.iter().enumerate() {
            if !spec.is_trained() {
                let set = baseline_predictions(&filled, spec.kind, &ctx.test_fcts, cfg.k);
                for &seed in &setup.seeds {
                    let copy = set.as_ref().map(Clone::clone).map_err(|e| Error::State(e.to_string()));
                    sets.insert((mi, seed), copy);
                }
            }
        }
        for &seed in &setup.seeds {
            let mut cell_cfg = cfg.clone();
            cell_cfg.seed = derive_seed(cfg.seed, &[fi as u64, seed]);
            let mut modes: BTreeMap<CovariateMode, StageDepth> = BTreeMap::new();
            for spec in &setup.roster {
                if let ModelKind::Mhstn(d) = spec.kind {
                    let e = modes.entry(spec.covariates).or_insert(d);
                    *e = (*e).max(d);
                }
            }
            for (mode, depth) in modes {
                let trained = train_mhstn(&ctx, mode, depth, &cell_cfg);
                for (mi, spec) in setup.roster.iter().enumerate() {
                    if let ModelKind::Mhstn(d) = spec.kind {
                        if spec.covariates == mode {
                            let set = match &trained {
                                Ok(nets) => predict(
                                    [&nets[0], &nets[1], &nets[2]],
                                    &filled,
                                    &ctx.test_fcts,
                                    d,
                                    cfg.clip_speed,
                                    cfg.jobs,
                                ),
                                Err(e) => Err(Error::State(e.to_string())),
                            };
                            sets.insert((mi, seed), set);
                        }
                    }
                }
            }
            for (mi, spec) in setup.roster.iter().enumerate() {
                if spec.kind == ModelKind::HistoryLstm {
                    sets.insert((mi, seed), history_predictions(&ctx, spec.covariates, &cell_cfg));
                }
            }
        }
        for (mi, name) in names.iter().enumerate() {
            for &seed in &setup.seeds {
                let set = sets.remove(&(mi, seed)).expect("every cell has a forecast");
                let outcome = set.and_then(|s| {
                    if setup.collect_predictions {
                        exp.predictions.extend(dump_rows(raw, &s, name, fi, seed));
                    }
                    score_predictions(raw, &s)
                });
                exp.report.cells.push(Cell {
                    model: name.clone(),
                    fold: fi,
                    seed,
                    outcome: outcome.map_err(|e| e.to_string()),
                });
            }
        }
    }
    Ok(exp)
}
