//! Binary checkpoints: an 8-byte magic, a little-endian `u32` format
//! version, a `u64` header length, a JSON header, then every parameter as a
//! little-endian `f64`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::{StationModel, StationNets};
use crate::data::{Variable, WindowLayout, WindowScaler};
use crate::error::{Error, Result};
use crate::model::{ensemble_init, EnsembleNet, SpatialNet, SpatialShape, TemporalNet, TemporalShape};
use crate::numerics::Parameterized;

pub const MAGIC: [u8; 8] = *b"WINDCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Temporal,
    Spatial,
    Ensemble,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Temporal => "temporal",
            NetKind::Spatial => "spatial",
            NetKind::Ensemble => "ensemble",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NetShape {
    Temporal(TemporalShape),
    Spatial(SpatialShape),
    Ensemble { k: usize },
}

/// Metadata stored ahead of the parameter values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub kind: NetKind,
    pub station: String,
    pub layout: WindowLayout,
    pub scaler: WindowScaler,
    pub shape: NetShape,
    pub param_shapes: Vec<Vec<usize>>,
}

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, values: &[f64]) -> Result<()> {
    let expected: usize = header.param_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if expected != values.len() {
        return Err(Error::dim("write_checkpoint", &[expected], &[values.len()]));
    }
    let json = serde_json::to_vec(header)?;
    let mut buf = Vec::with_capacity(20 + json.len() + 8 * values.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Data(format!("{}: {m}", path.display()));
    if bytes.len() < 20 || bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..20 + len).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let data = &bytes[20 + len..];
    let expected: usize = header.param_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if data.len() != expected * 8 {
        return Err(bad(&format!(
            "expected {expected} parameters, found {} bytes",
            data.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

fn shapes<P: Parameterized>(net: &P) -> Vec<Vec<usize>> {
    net.params().iter().map(|t| t.shape().to_vec()).collect()
}

/// Path of one network's checkpoint under `dir`.
pub fn checkpoint_path(dir: &Path, target: Variable, station: &str, kind: NetKind) -> PathBuf {
    dir.join(target.name()).join(format!("{station}_{}.ckpt", kind.name()))
}

/// Writes one file per trained network and station; returns the paths.
pub fn save_station_nets(nets: &StationNets, dir: &Path) -> Result<Vec<PathBuf>> {
    let target = nets.layout.target;
    let sub = dir.join(target.name());
    std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let mut paths = Vec::new();
    for m in &nets.models {
        let header = |kind, shape, param_shapes| CheckpointHeader {
            kind,
            station: m.station.clone(),
            layout: nets.layout.clone(),
            scaler: m.scaler.clone(),
            shape,
            param_shapes,
        };
        let mut items = vec![(
            header(
                NetKind::Temporal,
                NetShape::Temporal(m.temporal.shape),
                shapes(&m.temporal),
            ),
            m.temporal.flat_values(),
        )];
        if let Some(s) = &m.spatial {
            items.push((
                header(NetKind::Spatial, NetShape::Spatial(s.shape), shapes(s)),
                s.flat_values(),
            ));
        }
        if let Some(e) = &m.ensemble {
            items.push((
                header(NetKind::Ensemble, NetShape::Ensemble { k: e.k() }, shapes(e)),
                e.flat_values(),
            ));
        }
        for (h, values) in items {
            let path = checkpoint_path(dir, target, &m.station, h.kind);
            write_checkpoint(&path, &h, &values)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

fn restore<P: Parameterized>(mut net: P, header: &CheckpointHeader, values: &[f64], path: &Path) -> Result<P> {
    if shapes(&net) != header.param_shapes {
        return Err(Error::Data(format!(
            "{}: parameter shapes do not match the network",
            path.display()
        )));
    }
    net.load_flat(values)?;
    Ok(net)
}

/// Loads the networks of `stations` for `target`. Spatial and ensemble
/// files are optional, but must be present for every station or none.
pub fn load_station_nets(dir: &Path, target: Variable, stations: &[String]) -> Result<StationNets> {
    let mut models = Vec::with_capacity(stations.len());
    let mut layout: Option<WindowLayout> = None;
    for station in stations {
        let path = checkpoint_path(dir, target, station, NetKind::Temporal);
        let (h, values) = read_checkpoint(&path)?;
        let NetShape::Temporal(shape) = h.shape else {
            return Err(Error::Data(format!("{}: not a temporal checkpoint", path.display())));
        };
        if h.layout.target != target || h.station != *station {
            return Err(Error::Data(format!(
                "{}: checkpoint is for another target or station",
                path.display()
            )));
        }
        match &layout {
            Some(l) if *l != h.layout => {
                return Err(Error::Data(format!(
                    "{}: window layout differs between stations",
                    path.display()
                )))
            }
            _ => layout = Some(h.layout.clone()),
        }
        let temporal = restore(TemporalNet::zeroed(shape)?, &h, &values, &path)?;
        let mut model = StationModel {
            station: station.clone(),
            scaler: h.scaler,
            temporal,
            spatial: None,
            ensemble: None,
        };
        let sp = checkpoint_path(dir, target, station, NetKind::Spatial);
        if sp.exists() {
            let (h, values) = read_checkpoint(&sp)?;
            let NetShape::Spatial(shape) = h.shape else {
                return Err(Error::Data(format!("{}: not a spatial checkpoint", sp.display())));
            };
            model.spatial = Some(restore(SpatialNet::zeroed(shape)?, &h, &values, &sp)?);
        }
        let ep = checkpoint_path(dir, target, station, NetKind::Ensemble);
        if ep.exists() {
            let (h, values) = read_checkpoint(&ep)?;
            let NetShape::Ensemble { k } = h.shape else {
                return Err(Error::Data(format!("{}: not an ensemble checkpoint", ep.display())));
            };
            let net: EnsembleNet = restore(ensemble_init(k)?, &h, &values, &ep)?;
            model.ensemble = Some(net);
        }
        models.push(model);
    }
    let layout = layout.ok_or_else(|| Error::Argument("no stations to load".into()))?;
    let spatial = models.iter().filter(|m| m.spatial.is_some()).count();
    let ensemble = models.iter().filter(|m| m.ensemble.is_some()).count();
    if (spatial != 0 && spatial != models.len()) || (ensemble != 0 && ensemble != models.len()) {
        return Err(Error::Data(format!(
            "incomplete checkpoint set for {target}: spatial {spatial}, ensemble {ensemble} of {}",
            models.len()
        )));
    }
    Ok(StationNets { layout, models })
}
