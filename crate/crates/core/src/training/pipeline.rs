use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::stage::{train_stage, StageRecord};
use crate::data::{make_windows, FoldWindows, SampleWindow, WeatherFrame, WindowLayout, WindowScaler};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_jobs};
use crate::model::{
    ensemble_init, EnsembleNet, HistoryNet, HistoryShape, Network, SpatialNet, SpatialShape, TemporalNet, TemporalShape,
};
use crate::numerics::Tensor;

/// How many of the three stages to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageDepth {
    Temporal,
    Spatial,
    Ensemble,
}

impl StageDepth {
    pub fn name(self) -> &'static str {
        match self {
            StageDepth::Temporal => "temporal",
            StageDepth::Spatial => "spatial",
            StageDepth::Ensemble => "ensemble",
        }
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }
}

/// Forecast creation indices used for fitting and early stopping, plus the
/// timeline indices the normalizers are fitted on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelinePlan {
    pub train_fcts: Vec<usize>,
    pub validation_fcts: Vec<usize>,
    pub norm_indices: Vec<usize>,
}

impl PipelinePlan {
    /// Converts window positions of a fold into creation indices.
    pub fn from_fold(fcts: &[usize], fold: &FoldWindows) -> Self {
        Self {
            train_fcts: fold.train.iter().map(|&p| fcts[p]).collect(),
            validation_fcts: fold.validation.iter().map(|&p| fcts[p]).collect(),
            norm_indices: fold.train_indices.clone(),
        }
    }
}

/// Trained networks and normalization of one station.
#[derive(Clone, Debug, PartialEq)]
pub struct StationModel {
    pub station: String,
    pub scaler: WindowScaler,
    pub temporal: TemporalNet,
    pub spatial: Option<SpatialNet>,
    pub ensemble: Option<EnsembleNet>,
}

/// Per-station networks for one target variable.
#[derive(Clone, Debug, PartialEq)]
pub struct StationNets {
    pub layout: WindowLayout,
    pub models: Vec<StationModel>,
}

/// Training records of one stage, one entry per station.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub depth: StageDepth,
    pub records: Vec<StageRecord>,
    /// Validation RMSE in original units.
    pub validation_rmse: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
}

impl PipelineReport {
    pub fn stage(&self, depth: StageDepth) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.depth == depth)
    }

    /// Validation RMSE averaged over stations.
    pub fn mean_validation_rmse(&self, depth: StageDepth) -> Option<f64> {
        let s = self.stage(depth)?;
        Some(s.validation_rmse.iter().sum::<f64>() / s.validation_rmse.len() as f64)
    }
}

/// Normalized windows of every station, addressable by creation index.
pub(crate) struct StationWindows {
    pub scalers: Vec<WindowScaler>,
    windows: Vec<Vec<SampleWindow>>,
    raw: Vec<Vec<SampleWindow>>,
}

impl StationWindows {
    pub fn fit(frame: &WeatherFrame, layout: &WindowLayout, norm_indices: &[usize]) -> Result<Self> {
        let n = frame.stations().len();
        let scalers = (0..n)
            .map(|s| WindowScaler::fit(frame, s, layout, norm_indices))
            .collect::<Result<Vec<_>>>()?;
        Self::with_scalers(frame, layout, scalers)
    }

    pub fn with_scalers(frame: &WeatherFrame, layout: &WindowLayout, scalers: Vec<WindowScaler>) -> Result<Self> {
        let raw = (0..scalers.len())
            .map(|s| make_windows(frame, s, layout))
            .collect::<Result<Vec<_>>>()?;
        let windows = raw
            .iter()
            .zip(&scalers)
            .map(|(ws, sc)| ws.iter().map(|w| sc.apply(w)).collect())
            .collect();
        Ok(Self { scalers, windows, raw })
    }

    fn position(&self, fct: usize) -> Result<usize> {
        self.raw[0]
            .binary_search_by_key(&fct, |w| w.fct)
            .map_err(|_| Error::Argument(format!("no complete window at creation index {fct}")))
    }

    pub fn normalized(&self, station: usize, fct: usize) -> Result<&SampleWindow> {
        Ok(&self.windows[station][self.position(fct)?])
    }

    pub fn raw(&self, station: usize, fct: usize) -> Result<&SampleWindow> {
        Ok(&self.raw[station][self.position(fct)?])
    }

    /// `[B×W×hw]` history and `[B×K·fw]` future tensors.
    pub fn batch(&self, station: usize, fcts: &[usize]) -> Result<(Tensor, Tensor)> {
        let (mut h, mut f) = (Vec::new(), Vec::new());
        for &t in fcts {
            let w = self.normalized(station, t)?;
            h.extend_from_slice(&w.history);
            f.extend_from_slice(&w.future);
        }
        let b = fcts.len();
        let hl = h.len() / b.max(1);
        let fl = f.len() / b.max(1);
        Ok((Tensor::new(vec![b, hl], h)?, Tensor::new(vec![b, fl], f)?))
    }
}

fn temporal_shape(layout: &WindowLayout, cfg: &TrainConfig) -> TemporalShape {
    let mut s = TemporalShape::new(layout.w, layout.k, layout.history_width(), layout.future_width());
    s.lstm_hidden = cfg.lstm_hidden;
    s.future_multiplier = cfg.future_multiplier;
    s
}

fn temporal_dataset(net: &TemporalNet, sw: &StationWindows, station: usize, fcts: &[usize]) -> Result<Dataset> {
    let mut d = Dataset::new(net.input_shapes(), net.outputs());
    for &t in fcts {
        let w = sw.normalized(station, t)?;
        d.push(&[&w.history, &w.future], &w.target)?;
    }
    Ok(d)
}

/// Per-station outputs of the trained stages, normalized, for a list of
/// creation indices: `[station][fct][value]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct StageOutputs {
    pub temporal: Vec<Vec<Vec<f64>>>,
    pub representation: Vec<Vec<Vec<f64>>>,
    pub spatial: Option<Vec<Vec<Vec<f64>>>>,
    pub ensemble: Option<Vec<Vec<Vec<f64>>>>,
}

fn split_rows(t: &Tensor) -> Vec<Vec<f64>> {
    let width = t.shape().last().copied().unwrap_or(1).max(1);
    t.values().chunks(width).map(|c| c.to_vec()).collect()
}

fn temporal_outputs(
    temporal: &[&TemporalNet],
    sw: &StationWindows,
    fcts: &[usize],
    jobs: usize,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    let rows = map_jobs(temporal, jobs, |s, net| -> Result<_> {
        if fcts.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let (h, f) = sw.batch(s, fcts)?;
        let sh = net.shape;
        let h = h.reshaped(vec![fcts.len(), sh.w, sh.history_width])?;
        let (p, r) = net.forward_batch(&h, &f)?;
        Ok((split_rows(&p), split_rows(&r)))
    });
    let mut preds = Vec::new();
    let mut reps = Vec::new();
    for r in rows {
        let (p, q) = r?;
        preds.push(p);
        reps.push(q);
    }
    Ok((preds, reps))
}

/// Flattened `[N×V]` feature map for one creation index.
fn feature_map(reps: &[Vec<Vec<f64>>], i: usize) -> Vec<f64> {
    let v = reps.len();
    let n = reps[0][i].len();
    let mut out = vec![0.0; n * v];
    for (c, station) in reps.iter().enumerate() {
        for (j, x) in station[i].iter().enumerate() {
            out[j * v + c] = *x;
        }
    }
    out
}

fn spatial_outputs(
    nets: &[&SpatialNet],
    reps: &[Vec<Vec<f64>>],
    count: usize,
    jobs: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    map_jobs(nets, jobs, |_, net| -> Result<_> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let sh = net.shape;
        let mut values = Vec::with_capacity(count * sh.n * sh.stations);
        for i in 0..count {
            values.extend(feature_map(reps, i));
        }
        let x = Tensor::new(vec![count, sh.n, sh.stations], values)?;
        Ok(split_rows(&net.predict(&[x])?))
    })
    .into_iter()
    .collect()
}

fn ensemble_outputs(
    nets: &[&EnsembleNet],
    temporal: &[Vec<Vec<f64>>],
    spatial: &[Vec<Vec<f64>>],
) -> Result<Vec<Vec<Vec<f64>>>> {
    nets.iter()
        .enumerate()
        .map(|(s, net)| {
            temporal[s]
                .iter()
                .zip(&spatial[s])
                .map(|(l, r)| crate::model::ensemble_forward(l, r, net))
                .collect()
        })
        .collect()
}

fn rmse_original(sw: &StationWindows, station: usize, fcts: &[usize], preds: &[Vec<f64>]) -> Result<f64> {
    let norm = sw.scalers[station].target();
    let (mut sum, mut n) = (0.0, 0usize);
    for (&t, p) in fcts.iter().zip(preds) {
        let truth = &sw.raw(station, t)?.target;
        for (y, yhat) in truth.iter().zip(p) {
            let e = y - norm.denormalize(*yhat);
            sum += e * e;
            n += 1;
        }
    }
    Ok((sum / n.max(1) as f64).sqrt())
}

impl StationNets {
    pub fn stations(&self) -> Vec<String> {
        self.models.iter().map(|m| m.station.clone()).collect()
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    /// Deepest stage every station has been trained through.
    pub fn depth(&self) -> StageDepth {
        if self.models.iter().all(|m| m.ensemble.is_some()) {
            StageDepth::Ensemble
        } else if self.models.iter().all(|m| m.spatial.is_some()) {
            StageDepth::Spatial
        } else {
            StageDepth::Temporal
        }
    }

    pub(crate) fn windows(&self, frame: &WeatherFrame) -> Result<StationWindows> {
        if frame.stations() != self.stations().as_slice() {
            return Err(Error::Data(format!(
                "frame stations {:?} do not match the trained stations {:?}",
                frame.stations(),
                self.stations()
            )));
        }
        StationWindows::with_scalers(
            frame,
            &self.layout,
            self.models.iter().map(|m| m.scaler.clone()).collect(),
        )
    }

    pub(crate) fn stage_outputs(&self, sw: &StationWindows, fcts: &[usize], jobs: usize) -> Result<StageOutputs> {
        let temporal: Vec<&TemporalNet> = self.models.iter().map(|m| &m.temporal).collect();
        let (tp, reps) = temporal_outputs(&temporal, sw, fcts, jobs)?;
        let mut out = StageOutputs {
            temporal: tp,
            representation: reps,
            ..Default::default()
        };
        let spatial: Option<Vec<&SpatialNet>> = self.models.iter().map(|m| m.spatial.as_ref()).collect();
        if let Some(nets) = spatial {
            let sp = spatial_outputs(&nets, &out.representation, fcts.len(), jobs)?;
            let ensemble: Option<Vec<&EnsembleNet>> = self.models.iter().map(|m| m.ensemble.as_ref()).collect();
            if let Some(e) = ensemble {
                out.ensemble = Some(ensemble_outputs(&e, &out.temporal, &sp)?);
            }
            out.spatial = Some(sp);
        }
        Ok(out)
    }

    /// Forecasts in original units, `[station][fct][horizon]`, from the
    /// output of the given stage. The frame must be complete.
    pub fn forecast(
        &self,
        frame: &WeatherFrame,
        fcts: &[usize],
        depth: StageDepth,
        jobs: usize,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        let sw = self.windows(frame)?;
        let out = self.stage_outputs(&sw, fcts, jobs)?;
        let normalized = match depth {
            StageDepth::Temporal => out.temporal,
            StageDepth::Spatial => out
                .spatial
                .ok_or_else(|| Error::State("spatial stage has not been trained".into()))?,
            StageDepth::Ensemble => out
                .ensemble
                .ok_or_else(|| Error::State("ensemble stage has not been trained".into()))?,
        };
        Ok(normalized
            .into_iter()
            .zip(&self.models)
            .map(|(rows, m)| rows.iter().map(|r| m.scaler.target().denormalize_all(r)).collect())
            .collect())
    }
}

fn stage_seeds(cfg: &TrainConfig, depth: StageDepth, station: usize) -> (u64, u64) {
    let s = station as u64;
    (
        derive_seed(cfg.seed, &[depth.id(), s, 0]),
        derive_seed(cfg.seed, &[depth.id(), s, 1]),
    )
}

/// Trains the temporal modules of every station, then (depending on
/// `depth`) the spatial modules on frozen representations, then the
/// ensembles on both frozen predictions. The frame must be complete.
pub fn train_pipeline(
    frame: &WeatherFrame,
    layout: &WindowLayout,
    plan: &PipelinePlan,
    cfg: &TrainConfig,
    depth: StageDepth,
) -> Result<(StationNets, PipelineReport)> {
    cfg.validate()?;
    let n_stations = frame.stations().len();
    if n_stations == 0 {
        return Err(Error::Argument("no stations to train".into()));
    }
    let sw = StationWindows::fit(frame, layout, &plan.norm_indices)?;
    let shape = temporal_shape(layout, cfg);
    let stations: Vec<usize> = (0..n_stations).collect();
    let mut report = PipelineReport::default();

    let trained = map_jobs(&stations, cfg.jobs, |_, &s| -> Result<_> {
        let (init, shuffle) = stage_seeds(cfg, StageDepth::Temporal, s);
        let mut net = TemporalNet::new(shape, &mut ChaCha8Rng::seed_from_u64(init))?;
        let train = temporal_dataset(&net, &sw, s, &plan.train_fcts)?;
        let val = temporal_dataset(&net, &sw, s, &plan.validation_fcts)?;
        let record = train_stage(&mut net, &train, &val, cfg, shuffle)?;
        Ok((net, record))
    });
    let mut models = Vec::with_capacity(n_stations);
    let mut records = Vec::with_capacity(n_stations);
    for (s, r) in trained.into_iter().enumerate() {
        let (net, record) = r?;
        records.push(record);
        models.push(StationModel {
            station: frame.stations()[s].clone(),
            scaler: sw.scalers[s].clone(),
            temporal: net,
            spatial: None,
            ensemble: None,
        });
    }
    let mut nets = StationNets {
        layout: layout.clone(),
        models,
    };
    let val_out = nets.stage_outputs(&sw, &plan.validation_fcts, cfg.jobs)?;
    report.stages.push(StageReport {
        depth: StageDepth::Temporal,
        records,
        validation_rmse: (0..n_stations)
            .map(|s| rmse_original(&sw, s, &plan.validation_fcts, &val_out.temporal[s]))
            .collect::<Result<_>>()?,
    });
    if depth == StageDepth::Temporal {
        return Ok((nets, report));
    }

    let train_out = nets.stage_outputs(&sw, &plan.train_fcts, cfg.jobs)?;
    let n = shape.representation();
    let mut sshape = SpatialShape::new(n, n_stations, layout.k);
    sshape.filters = cfg.spatial_filters;
    sshape.kernel = cfg.spatial_kernel;
    let spatial_data = |reps: &[Vec<Vec<f64>>], fcts: &[usize], s: usize| -> Result<Dataset> {
        let mut d = Dataset::new(vec![vec![n, n_stations]], layout.k);
        for (i, &t) in fcts.iter().enumerate() {
            d.push(&[&feature_map(reps, i)], &sw.normalized(s, t)?.target)?;
        }
        Ok(d)
    };
    let trained = map_jobs(&stations, cfg.jobs, |_, &s| -> Result<_> {
        let (init, shuffle) = stage_seeds(cfg, StageDepth::Spatial, s);
        let mut net = SpatialNet::new(sshape, &mut ChaCha8Rng::seed_from_u64(init))?;
        let train = spatial_data(&train_out.representation, &plan.train_fcts, s)?;
        let val = spatial_data(&val_out.representation, &plan.validation_fcts, s)?;
        let record = train_stage(&mut net, &train, &val, cfg, shuffle)?;
        Ok((net, record))
    });
    let mut records = Vec::with_capacity(n_stations);
    for (s, r) in trained.into_iter().enumerate() {
        let (net, record) = r?;
        records.push(record);
        nets.models[s].spatial = Some(net);
    }
    let val_out = nets.stage_outputs(&sw, &plan.validation_fcts, cfg.jobs)?;
    let val_spatial = val_out.spatial.as_ref().expect("spatial nets are set");
    report.stages.push(StageReport {
        depth: StageDepth::Spatial,
        records,
        validation_rmse: (0..n_stations)
            .map(|s| rmse_original(&sw, s, &plan.validation_fcts, &val_spatial[s]))
            .collect::<Result<_>>()?,
    });
    if depth == StageDepth::Spatial {
        return Ok((nets, report));
    }

    let train_out = nets.stage_outputs(&sw, &plan.train_fcts, cfg.jobs)?;
    let train_spatial = train_out.spatial.as_ref().expect("spatial nets are set");
    let k = layout.k;
    let ensemble_data = |tp: &[Vec<f64>], sp: &[Vec<f64>], fcts: &[usize], s: usize| -> Result<Dataset> {
        let mut d = Dataset::new(vec![vec![k], vec![k]], k);
        for (i, &t) in fcts.iter().enumerate() {
            d.push(&[&tp[i], &sp[i]], &sw.normalized(s, t)?.target)?;
        }
        Ok(d)
    };
    let trained = map_jobs(&stations, cfg.jobs, |_, &s| -> Result<_> {
        let (_, shuffle) = stage_seeds(cfg, StageDepth::Ensemble, s);
        let mut net = ensemble_init(k)?;
        let train = ensemble_data(&train_out.temporal[s], &train_spatial[s], &plan.train_fcts, s)?;
        let val = ensemble_data(&val_out.temporal[s], &val_spatial[s], &plan.validation_fcts, s)?;
        let record = train_stage(&mut net, &train, &val, cfg, shuffle)?;
        Ok((net, record))
    });
    let mut records = Vec::with_capacity(n_stations);
    for (s, r) in trained.into_iter().enumerate() {
        let (net, record) = r?;
        records.push(record);
        nets.models[s].ensemble = Some(net);
    }
    let val_out = nets.stage_outputs(&sw, &plan.validation_fcts, cfg.jobs)?;
    let val_ensemble = val_out.ensemble.as_ref().expect("ensemble nets are set");
    report.stages.push(StageReport {
        depth: StageDepth::Ensemble,
        records,
        validation_rmse: (0..n_stations)
            .map(|s| rmse_original(&sw, s, &plan.validation_fcts, &val_ensemble[s]))
            .collect::<Result<_>>()?,
    });
    Ok((nets, report))
}

/// History-only LSTM baselines, one per station.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryModels {
    pub layout: WindowLayout,
    pub stations: Vec<String>,
    pub scalers: Vec<WindowScaler>,
    pub nets: Vec<HistoryNet>,
    pub records: Vec<StageRecord>,
}

impl HistoryModels {
    /// Forecasts in original units, `[station][fct][horizon]`.
    pub fn forecast(&self, frame: &WeatherFrame, fcts: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
        let sw = StationWindows::with_scalers(frame, &self.layout, self.scalers.clone())?;
        self.nets
            .iter()
            .enumerate()
            .map(|(s, net)| {
                if fcts.is_empty() {
                    return Ok(Vec::new());
                }
                let (h, _) = sw.batch(s, fcts)?;
                let h = h.reshaped(vec![fcts.len(), net.shape.w, net.shape.history_width])?;
                let p = net.predict(&[h])?;
                Ok(split_rows(&p)
                    .iter()
                    .map(|r| self.scalers[s].target().denormalize_all(r))
                    .collect())
            })
            .collect()
    }
}

/// Trains the history-only baseline for every station.
pub fn train_history_baseline(
    frame: &WeatherFrame,
    layout: &WindowLayout,
    plan: &PipelinePlan,
    cfg: &TrainConfig,
) -> Result<HistoryModels> {
    cfg.validate()?;
    let sw = StationWindows::fit(frame, layout, &plan.norm_indices)?;
    let mut shape = HistoryShape::new(layout.w, layout.k, layout.history_width());
    shape.lstm_hidden = cfg.lstm_hidden;
    let stations: Vec<usize> = (0..frame.stations().len()).collect();
    let data = |net: &HistoryNet, s: usize, fcts: &[usize]| -> Result<Dataset> {
        let mut d = Dataset::new(net.input_shapes(), net.outputs());
        for &t in fcts {
            let w = sw.normalized(s, t)?;
            d.push(&[&w.history], &w.target)?;
        }
        Ok(d)
    };
    let trained = map_jobs(&stations, cfg.jobs, |_, &s| -> Result<_> {
        let init = derive_seed(cfg.seed, &[9, s as u64, 0]);
        let shuffle = derive_seed(cfg.seed, &[9, s as u64, 1]);
        let mut net = HistoryNet::new(shape, &mut ChaCha8Rng::seed_from_u64(init))?;
        let train = data(&net, s, &plan.train_fcts)?;
        let val = data(&net, s, &plan.validation_fcts)?;
        let record = train_stage(&mut net, &train, &val, cfg, shuffle)?;
        Ok((net, record))
    });
    let mut nets = Vec::new();
    let mut records = Vec::new();
    for r in trained {
        let (n, rec) = r?;
        nets.push(n);
        records.push(rec);
    }
    Ok(HistoryModels {
        layout: layout.clone(),
        stations: frame.stations().to_vec(),
        scalers: sw.scalers,
        nets,
        records,
    })
}
