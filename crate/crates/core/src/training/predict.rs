use std::io::Write;
use std::path::Path;

use super::pipeline::{StageDepth, StationNets};
use crate::data::{recover_direction, Variable, WeatherFrame, TIMESTAMP_FORMAT};
use crate::error::{Error, Result};

/// Forecasts of all stations for a list of creation indices, indexed
/// `[station][fct][horizon]`, in original units.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub stations: Vec<String>,
    pub fcts: Vec<usize>,
    pub k: usize,
    pub v: Vec<Vec<Vec<f64>>>,
    pub vx: Vec<Vec<Vec<f64>>>,
    pub vy: Vec<Vec<Vec<f64>>>,
    /// Direction from the predicted components; `None` for a calm vector.
    pub theta: Vec<Vec<Vec<Option<f64>>>>,
}

impl PredictionSet {
    /// Predicted value of one variable, `None` only for undefined θ.
    pub fn value(&self, var: Variable, station: usize, i: usize, h: usize) -> Option<f64> {
        match var {
            Variable::V => Some(self.v[station][i][h]),
            Variable::Vx => Some(self.vx[station][i][h]),
            Variable::Vy => Some(self.vy[station][i][h]),
            Variable::Theta => self.theta[station][i][h],
            _ => None,
        }
    }

    /// Writes `fct,station,horizon,variable,truth,pred` rows for v, vx, vy
    /// and θ. Truth comes from `frame` when given; unknown cells are empty.
    pub fn write_csv(
        &self,
        path: &Path,
        timeline: &[chrono::NaiveDateTime],
        truth: Option<&WeatherFrame>,
    ) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "fct,station,horizon,variable,truth,pred").map_err(io)?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for (i, &t) in self.fcts.iter().enumerate() {
            let stamp = timeline[t].format(TIMESTAMP_FORMAT);
            for (s, name) in self.stations.iter().enumerate() {
                for h in 0..self.k {
                    for var in Variable::TARGETS.iter().copied().chain([Variable::Theta]) {
                        let y = truth.and_then(|f| f.obs(s, var).get(t + 1 + h).copied().flatten());
                        writeln!(
                            out,
                            "{stamp},{name},{},{var},{},{}",
                            h + 1,
                            cell(y),
                            cell(self.value(var, s, i, h))
                        )
                        .map_err(io)?;
                    }
                }
            }
        }
        out.flush().map_err(io)
    }
}

/// Direction per horizon from component forecasts.
pub fn directions(vx: &[Vec<Vec<f64>>], vy: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<Option<f64>>>> {
    vx.iter()
        .zip(vy)
        .map(|(sx, sy)| {
            sx.iter()
                .zip(sy)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| recover_direction(x, y).ok()).collect())
                .collect()
        })
        .collect()
}

/// Forecasts v, vx and vy from their own networks and derives θ from the
/// component forecasts. `clip_speed` floors speed forecasts at zero.
pub fn predict(
    nets: [&StationNets; 3],
    frame: &WeatherFrame,
    fcts: &[usize],
    depth: StageDepth,
    clip_speed: bool,
    jobs: usize,
) -> Result<PredictionSet> {
    for (net, want) in nets.iter().zip(Variable::TARGETS) {
        if net.layout.target != want {
            return Err(Error::Argument(format!(
                "expected networks for {want}, got {}",
                net.layout.target
            )));
        }
    }
    let k = nets[0].k();
    if nets.iter().any(|n| n.k() != k) {
        return Err(Error::Argument("networks disagree on the horizon count".into()));
    }
    let mut v = nets[0].forecast(frame, fcts, depth, jobs)?;
    if clip_speed {
        v.iter_mut().flatten().flatten().for_each(|x| *x = x.max(0.0));
    }
    let vx = nets[1].forecast(frame, fcts, depth, jobs)?;
    let vy = nets[2].forecast(frame, fcts, depth, jobs)?;
    let theta = directions(&vx, &vy);
    Ok(PredictionSet {
        stations: nets[0].stations(),
        fcts: fcts.to_vec(),
        k,
        v,
        vx,
        vy,
        theta,
    })
}
