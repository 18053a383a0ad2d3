use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use windcast::covariates::CovariateReport;
use windcast::data::{
    correlation_diagnostics, day_blocks, day_intervals, fct_indices, month_intervals, parse_timestamp,
    plan_splits_with, Fold, SplitMode, SplitPlan, Variable, WeatherFrame,
};
use windcast::evaluation::{layout_for, run_experiment, write_predictions, CovariateMode, ExperimentSetup, ModelSpec};
use windcast::synth::{synthesize, SynthSpec};
use windcast::training::{
    load_station_nets, predict, save_station_nets, train_pipeline, PipelinePlan, StageDepth, StationNets,
};
use windcast::{Error, Result};

use crate::settings::Settings;
use crate::{Cli, Command, Inputs};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const NWP_FILE: &str = "nwp.csv";

fn inputs(i: &Inputs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("observations", i.observations.as_ref().map(|p| p.display().to_string())),
        ("nwp", i.nwp.as_ref().map(|p| p.display().to_string())),
    ]
}

fn path_flag(key: &'static str, p: &Option<std::path::PathBuf>) -> (&'static str, Option<String>) {
    (key, p.as_ref().map(|p| p.display().to_string()))
}

fn load(s: &Settings) -> Result<WeatherFrame> {
    WeatherFrame::load(&s.path("observations")?, &s.path("nwp")?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn depth(s: &Settings) -> Result<StageDepth> {
    match s.get("depth").unwrap_or("ensemble") {
        "temporal" | "t" => Ok(StageDepth::Temporal),
        "spatial" | "s" => Ok(StageDepth::Spatial),
        "ensemble" | "e" => Ok(StageDepth::Ensemble),
        other => Err(Error::Argument(format!("unknown depth '{other}'"))),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Synth(a) => {
            let start = NaiveDate::parse_from_str(&a.start, "%Y-%m-%d")
                .map_err(|_| Error::Argument(format!("invalid start date '{}'", a.start)))?;
            let spec = SynthSpec {
                stations: a.stations,
                days: a.days,
                start,
                mean_speed: a.mean_speed,
                diurnal_amplitude: a.diurnal_amplitude,
                ar_coefficient: a.ar_coefficient,
                ar_noise: a.ar_noise,
                regional_coefficient: a.regional_coefficient,
                regional_noise: a.regional_noise,
                spatial_strength: a.spatial_strength,
                nwp_bias: a.nwp_bias,
                nwp_noise: a.nwp_noise,
                missing_rate: a.missing_rate,
                seed: a.seed,
            };
            let frame = synthesize(&spec)?;
            ensure_dir(&a.out_dir)?;
            frame.write_observations(&a.out_dir.join(OBSERVATIONS_FILE))?;
            frame.write_nwp(&a.out_dir.join(NWP_FILE))?;
            println!(
                "wrote {} stations x {} hours to {}",
                frame.stations().len(),
                frame.len(),
                a.out_dir.display()
            );
        }
        Command::Prepare(a) => {
            let mut flags = inputs(&a.inputs);
            flags.push(path_flag("out_dir", &a.out_dir));
            let s = Settings::resolve(config, flags)?;
            let raw = load(&s)?;
            let out = s.path("out_dir")?;
            let filled = raw.filled()?;
            ensure_dir(&out)?;
            filled.write_observations(&out.join(OBSERVATIONS_FILE))?;
            filled.write_nwp(&out.join(NWP_FILE))?;
            let mut text = String::from("station");
            for v in Variable::ALL {
                let _ = write!(text, ",{v}");
            }
            text.push('\n');
            for (name, counts) in raw.stations().iter().zip(raw.missing_counts()) {
                let cells: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(text, "{name},{}", cells.join(","));
            }
            let missing = out.join("missing.csv");
            std::fs::write(&missing, text).map_err(|e| Error::Io {
                path: missing,
                source: e,
            })?;
            println!(
                "prepared {} stations x {} hours; {} complete days",
                raw.stations().len(),
                raw.len(),
                day_intervals(raw.timeline()).len()
            );
        }
        Command::SelectCovariates(a) => {
            let mut flags = inputs(&a.inputs);
            flags.extend(a.tuning.pairs());
            flags.push(path_flag("out", &a.out));
            flags.push(("train_days", a.train_days.map(|d| d.to_string())));
            let s = Settings::resolve(config, flags)?;
            let cfg = s.train_config()?;
            let frame = load(&s)?.filled()?;
            let days = day_intervals(frame.timeline());
            let n = s.parsed::<usize>("train_days")?.unwrap_or(days.len());
            if n == 0 || n > days.len() {
                return Err(Error::Argument(format!("train_days must be 1..={}", days.len())));
            }
            let range = days[0].start..days[n - 1].end;
            let report = CovariateReport::compute(
                &frame,
                &Variable::TARGETS,
                range,
                cfg.k,
                cfg.threshold,
                cfg.ridge_lambda,
            )?;
            let out = s.path("out")?;
            report.write(&out)?;
            print!("{}", report.to_text());
        }
        Command::Train(a) => {
            let mut flags = inputs(&a.inputs);
            flags.extend(a.tuning.pairs());
            flags.push(path_flag("checkpoints", &a.checkpoints));
            flags.push(path_flag("covariates", &a.covariates));
            flags.push(("depth", a.depth.clone()));
            flags.push(("validation_days", a.validation_days.map(|d| d.to_string())));
            let s = Settings::resolve(config, flags)?;
            let cfg = s.train_config()?;
            let depth = depth(&s)?;
            let frame = load(&s)?.filled()?;
            let dir = s.path("checkpoints")?;
            let report = match s.get("covariates") {
                Some(p) => Some(CovariateReport::read(Path::new(p))?),
                None => None,
            };
            let mode = if report.is_some() {
                CovariateMode::Selected
            } else {
                CovariateMode::None
            };
            let days = day_intervals(frame.timeline()).len();
            let val = s.parsed::<usize>("validation_days")?.unwrap_or((days / 5).max(1));
            if val == 0 || val >= days {
                return Err(Error::Argument(format!("validation_days must be 1..{days}")));
            }
            let blocks = day_blocks(frame.timeline(), &[days - val, val])?;
            let fcts = fct_indices(frame.timeline(), cfg.w, cfg.k, cfg.fct_hour);
            let fold = Fold {
                train: vec![0],
                validation: 1,
                test: 1,
            };
            let fw = windcast::data::assign_windows(&fcts, cfg.w, cfg.k, &blocks, &fold)?;
            let plan = PipelinePlan::from_fold(&fcts, &fw);
            ensure_dir(&dir)?;
            let mut summary = String::new();
            for target in Variable::TARGETS {
                let layout = layout_for(target, mode, report.as_ref(), &cfg)?;
                let (nets, rep) = train_pipeline(&frame, &layout, &plan, &cfg, depth)?;
                let paths = save_station_nets(&nets, &dir)?;
                for st in &rep.stages {
                    for ((name, rmse), rec) in nets.stations().iter().zip(&st.validation_rmse).zip(&st.records) {
                        let _ = writeln!(
                            summary,
                            "target={target} stage={} station={name} epochs={} best_epoch={} validation_rmse={rmse:.6}",
                            st.depth.name(),
                            rec.epochs(),
                            rec.best_epoch
                        );
                    }
                }
                println!("{target}: wrote {} checkpoints", paths.len());
            }
            let log = dir.join("training.txt");
            std::fs::write(&log, &summary).map_err(|e| Error::Io { path: log, source: e })?;
            print!("{summary}");
        }
        Command::Predict(a) => {
            let mut flags = inputs(&a.inputs);
            flags.extend(a.tuning.pairs());
            flags.push(path_flag("checkpoints", &a.checkpoints));
            flags.push(path_flag("out", &a.out));
            flags.push(("depth", a.depth.clone()));
            flags.push(("from", a.from.clone()));
            flags.push(("to", a.to.clone()));
            let s = Settings::resolve(config, flags)?;
            let cfg = s.train_config()?;
            let raw = load(&s)?;
            let frame = raw.filled()?;
            let dir = s.path("checkpoints")?;
            let nets: Vec<StationNets> = Variable::TARGETS
                .iter()
                .map(|&t| load_station_nets(&dir, t, frame.stations()))
                .collect::<Result<_>>()?;
            let depth = match s.get("depth") {
                Some(_) => depth(&s)?,
                None => nets
                    .iter()
                    .map(StationNets::depth)
                    .min()
                    .unwrap_or(StageDepth::Temporal),
            };
            let layout = &nets[0].layout;
            let from = s.get("from").map(parse_timestamp).transpose()?;
            let to = s.get("to").map(parse_timestamp).transpose()?;
            let tl = frame.timeline();
            let fcts: Vec<usize> = fct_indices(tl, layout.w, layout.k, layout.fct_hour)
                .into_iter()
                .filter(|&t| from.is_none_or(|f| tl[t] >= f) && to.is_none_or(|e| tl[t] <= e))
                .collect();
            if fcts.is_empty() {
                return Err(Error::Data("no complete forecast window in the requested range".into()));
            }
            let set = predict(
                [&nets[0], &nets[1], &nets[2]],
                &frame,
                &fcts,
                depth,
                cfg.clip_speed,
                cfg.jobs,
            )?;
            let out = s.path("out")?;
            set.write_csv(&out, tl, Some(&raw))?;
            println!("wrote {} forecasts to {}", fcts.len(), out.display());
        }
        Command::Evaluate(a) => {
            let mut flags = inputs(&a.inputs);
            flags.extend(a.tuning.pairs());
            flags.push(("models", a.models.clone()));
            flags.push(("seeds", a.seeds.clone()));
            flags.push(("protocol", a.protocol.clone()));
            flags.push(("folds", a.folds.map(|x| x.to_string())));
            flags.push(("window", a.window.map(|x| x.to_string())));
            flags.push(("holdout_days", a.holdout_days.clone()));
            flags.push(path_flag("out", &a.out));
            flags.push(path_flag("dump", &a.dump));
            let s = Settings::resolve(config, flags)?;
            let cfg = s.train_config()?;
            let raw = load(&s)?;
            let roster = ModelSpec::parse_roster(s.get("models").unwrap_or("persistence,nwp,mhstn-t,mhstn-s,mhstn-e"))?;
            let seeds: Vec<u64> = s
                .get("seeds")
                .unwrap_or("0")
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Argument(format!("invalid seed '{x}'")))
                })
                .collect::<Result<_>>()?;
            let (intervals, plan) = match s.get("protocol").unwrap_or("holdout") {
                "holdout" => {
                    let n = day_intervals(raw.timeline()).len();
                    let counts: Vec<usize> = match s.get("holdout_days") {
                        Some(text) => text
                            .split(',')
                            .map(|x| {
                                x.trim()
                                    .parse()
                                    .map_err(|_| Error::Argument(format!("invalid day count '{x}'")))
                            })
                            .collect::<Result<_>>()?,
                        None => {
                            let val = n / 5;
                            vec![n - 2 * val, val, val]
                        }
                    };
                    if counts.len() != 3 {
                        return Err(Error::Argument("holdout_days needs train,validation,test".into()));
                    }
                    let plan = SplitPlan {
                        mode: SplitMode::Incremental,
                        n_intervals: 3,
                        folds: vec![Fold {
                            train: vec![0],
                            validation: 1,
                            test: 2,
                        }],
                    };
                    (day_blocks(raw.timeline(), &counts)?, plan)
                }
                other => {
                    let mode: SplitMode = other.parse()?;
                    let months = month_intervals(raw.timeline());
                    let folds = s.parsed("folds")?.unwrap_or(windcast::data::DEFAULT_FOLDS);
                    let window = s.parsed("window")?.unwrap_or(windcast::data::ROLLING_INTERVALS);
                    let plan = plan_splits_with(months.len(), mode, folds, window)?;
                    (months, plan)
                }
            };
            let setup = ExperimentSetup {
                intervals,
                plan,
                roster,
                seeds,
                config: cfg,
                collect_predictions: s.get("dump").is_some(),
            };
            let exp = run_experiment(&raw, &setup)?;
            if let Some(p) = s.get("dump") {
                write_predictions(&exp.predictions, Path::new(p))?;
            }
            let text = exp.report.to_text();
            if let Some(p) = s.get("out") {
                exp.report.write(Path::new(p))?;
            }
            print!("{text}");
        }
        Command::Diagnose(a) => {
            let mut flags = inputs(&a.inputs);
            flags.push(("variable", a.variable.clone()));
            flags.push(("max_lag", a.max_lag.map(|x| x.to_string())));
            flags.push(path_flag("out", &a.out));
            let s = Settings::resolve(config, flags)?;
            let frame = load(&s)?.filled()?;
            let var: Variable = s.get("variable").unwrap_or("v").parse()?;
            let max_lag = s.parsed("max_lag")?.unwrap_or(48);
            let tables = correlation_diagnostics(&frame, var, max_lag)?;
            let out = s.path("out")?;
            tables.write_csv(&out)?;
            println!(
                "wrote {} auto, {} cross and {} station curves to {}",
                tables.auto.len(),
                tables.cross.len(),
                tables.spatial.len(),
                out.display()
            );
        }
    }
    Ok(())
}
