use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use super::fill::fill_missing;
use super::wind::{decompose_wind, recover_direction, wrap_degrees};
use super::Variable;
use crate::error::{Error, Result};

/// Format used when writing timestamps.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

const ACCEPTED_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Reads `YYYY-MM-DD[T ]HH:MM[:SS]`.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| Error::Data(format!("unparseable timestamp '{s}'")))
}

/// Raw per-station observations as read from file. Wind components are not
/// part of the input; they are derived from speed and direction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservedSeries {
    pub v: Vec<Option<f64>>,
    pub theta: Vec<Option<f64>>,
    pub tp: Vec<Option<f64>>,
    pub rh: Vec<Option<f64>>,
    pub slp: Vec<Option<f64>>,
}

impl ObservedSeries {
    pub fn missing(len: usize) -> Self {
        Self {
            v: vec![None; len],
            theta: vec![None; len],
            tp: vec![None; len],
            rh: vec![None; len],
            slp: vec![None; len],
        }
    }
}

/// Complete NWP series for all seven variables, indexed by [`Variable::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct NwpSeries(pub Vec<Vec<f64>>);

/// Aligned hourly observations for every station plus one shared NWP stream.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherFrame {
    timeline: Vec<NaiveDateTime>,
    stations: Vec<String>,
    /// `[station][variable][time]`
    obs: Vec<Vec<Vec<Option<f64>>>>,
    /// `[variable][time]`
    nwp: Vec<Vec<f64>>,
}

impl WeatherFrame {
    /// Validates and aligns raw inputs. Direction `0` is read as `360`, and
    /// the observed components are derived wherever speed and direction are
    /// both present.
    pub fn new(
        timeline: Vec<NaiveDateTime>,
        stations: Vec<String>,
        observations: Vec<ObservedSeries>,
        nwp: NwpSeries,
    ) -> Result<Self> {
        let t = timeline.len();
        if t == 0 {
            return Err(Error::Data("empty timeline".into()));
        }
        for pair in timeline.windows(2) {
            if pair[1] - pair[0] != Duration::hours(1) {
                return Err(Error::Data(format!(
                    "timeline is not hourly and gap-free between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        if stations.is_empty() || stations.len() != observations.len() {
            return Err(Error::Data(format!(
                "{} station ids for {} observation sets",
                stations.len(),
                observations.len()
            )));
        }
        let mut nwp = nwp.0;
        if nwp.len() != Variable::ALL.len() || nwp.iter().any(|s| s.len() != t) {
            return Err(Error::Data("NWP series do not cover the timeline".into()));
        }
        for var in Variable::ALL {
            let series = &mut nwp[var.index()];
            if let Some(i) = series.iter().position(|x| !x.is_finite()) {
                return Err(Error::Data(format!("NWP {var} is missing at {}", timeline[i])));
            }
            if var == Variable::Theta {
                series.iter_mut().for_each(|x| *x = wrap_degrees(*x));
            }
        }

        let mut obs = Vec::with_capacity(stations.len());
        for (name, raw) in stations.iter().zip(observations) {
            let columns = [&raw.v, &raw.theta, &raw.tp, &raw.rh, &raw.slp];
            if columns.iter().any(|c| c.len() != t) {
                return Err(Error::Data(format!(
                    "station {name}: series length differs from timeline"
                )));
            }
            let mut theta = raw.theta;
            for (i, x) in theta.iter_mut().enumerate() {
                if let Some(d) = x {
                    if *d == 0.0 {
                        *d = 360.0;
                    }
                    if !(*d > 0.0 && *d <= 360.0) {
                        return Err(Error::Data(format!(
                            "station {name}: direction {d} out of range at {}",
                            timeline[i]
                        )));
                    }
                }
            }
            for (i, x) in raw.v.iter().enumerate() {
                if let Some(s) = x {
                    if !(*s >= 0.0) || !s.is_finite() {
                        return Err(Error::Data(format!(
                            "station {name}: negative speed {s} at {}",
                            timeline[i]
                        )));
                    }
                }
            }
            let (vx, vy) = derive_components(&raw.v, &theta)?;
            let mut per_var = vec![Vec::new(); Variable::ALL.len()];
            per_var[Variable::V.index()] = raw.v;
            per_var[Variable::Vx.index()] = vx;
            per_var[Variable::Vy.index()] = vy;
            per_var[Variable::Theta.index()] = theta;
            per_var[Variable::Tp.index()] = raw.tp;
            per_var[Variable::Rh.index()] = raw.rh;
            per_var[Variable::Slp.index()] = raw.slp;
            obs.push(per_var);
        }
        Ok(Self {
            timeline,
            stations,
            obs,
            nwp,
        })
    }

    pub fn timeline(&self) -> &[NaiveDateTime] {
        &self.timeline
    }

    pub fn len(&self) -> usize {
        self.timeline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timeline.is_empty()
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn station_index(&self, name: &str) -> Option<usize> {
        self.stations.iter().position(|s| s == name)
    }

    pub fn obs(&self, station: usize, var: Variable) -> &[Option<f64>] {
        &self.obs[station][var.index()]
    }

    pub fn nwp(&self, var: Variable) -> &[f64] {
        &self.nwp[var.index()]
    }

    pub fn is_complete(&self) -> bool {
        self.obs.iter().flatten().flatten().all(Option::is_some)
    }

    /// Number of missing observation values per station and variable.
    pub fn missing_counts(&self) -> Vec<Vec<usize>> {
        self.obs
            .iter()
            .map(|s| s.iter().map(|v| v.iter().filter(|x| x.is_none()).count()).collect())
            .collect()
    }

    /// A complete observation series; fails if any value is missing.
    pub fn series(&self, station: usize, var: Variable) -> Result<Vec<f64>> {
        let station_obs = self
            .obs
            .get(station)
            .ok_or_else(|| Error::Argument(format!("station index {station} out of range")))?;
        station_obs[var.index()]
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x.ok_or_else(|| {
                    Error::Data(format!(
                        "{var} at station {} is missing at {}; fill the frame first",
                        self.stations[station], self.timeline[i]
                    ))
                })
            })
            .collect()
    }

    /// Fills every observation gap.
    ///
    /// Scalar series use [`fill_missing`]. Missing directions are taken from
    /// the filled wind components, after which the components are recomputed
    /// from the filled speed and direction so the two stay consistent.
    pub fn filled(&self) -> Result<WeatherFrame> {
        let mut obs = Vec::with_capacity(self.obs.len());
        for (name, per_var) in self.stations.iter().zip(&self.obs) {
            let ctx = |e: Error| Error::Data(format!("station {name}: {e}"));
            let fill = |v: Variable| fill_missing(&per_var[v.index()]).map_err(ctx);
            let v = fill(Variable::V)?;
            let vx = fill(Variable::Vx)?;
            let vy = fill(Variable::Vy)?;
            let theta_fallback = fill(Variable::Theta)?;
            let theta: Vec<f64> = per_var[Variable::Theta.index()]
                .iter()
                .enumerate()
                .map(|(i, x)| match x {
                    Some(d) => *d,
                    None => recover_direction(vx[i], vy[i]).unwrap_or(theta_fallback[i]),
                })
                .collect();
            let mut cx = Vec::with_capacity(v.len());
            let mut cy = Vec::with_capacity(v.len());
            for (s, d) in v.iter().zip(&theta) {
                let (x, y) = decompose_wind(*s, *d)?;
                cx.push(x);
                cy.push(y);
            }
            let mut out = vec![Vec::new(); Variable::ALL.len()];
            let wrap = |xs: Vec<f64>| xs.into_iter().map(Some).collect::<Vec<_>>();
            out[Variable::V.index()] = wrap(v);
            out[Variable::Vx.index()] = wrap(cx);
            out[Variable::Vy.index()] = wrap(cy);
            out[Variable::Theta.index()] = wrap(theta);
            for var in [Variable::Tp, Variable::Rh, Variable::Slp] {
                out[var.index()] = wrap(fill(var)?);
            }
            obs.push(out);
        }
        Ok(WeatherFrame {
            timeline: self.timeline.clone(),
            stations: self.stations.clone(),
            obs,
            nwp: self.nwp.clone(),
        })
    }

    /// Reads an observation file and an NWP file and aligns them on the NWP
    /// timeline. Stations keep the order of their first appearance.
    pub fn load(obs_path: &Path, nwp_path: &Path) -> Result<Self> {
        let (timeline, nwp) = read_nwp(nwp_path)?;
        let (stations, observations) = read_observations(obs_path, &timeline)?;
        Self::new(timeline, stations, observations, nwp)
    }

    /// Writes the observation file (raw speed, direction and scalars; the
    /// derived components are never written).
    pub fn write_observations(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["timestamp", "station", "v", "theta", "tp", "rh", "slp"])?;
        let cols = [Variable::V, Variable::Theta, Variable::Tp, Variable::Rh, Variable::Slp];
        for (i, ts) in self.timeline.iter().enumerate() {
            let stamp = ts.format(TIMESTAMP_FORMAT).to_string();
            for (s, name) in self.stations.iter().enumerate() {
                let mut row = vec![stamp.clone(), name.clone()];
                for var in cols {
                    row.push(self.obs[s][var.index()][i].map(|x| x.to_string()).unwrap_or_default());
                }
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_nwp(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["timestamp"];
        header.extend(Variable::ALL.iter().map(|v| v.name()));
        w.write_record(&header)?;
        for (i, ts) in self.timeline.iter().enumerate() {
            let mut row = vec![ts.format(TIMESTAMP_FORMAT).to_string()];
            row.extend(Variable::ALL.iter().map(|v| self.nwp[v.index()][i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn derive_components(v: &[Option<f64>], theta: &[Option<f64>]) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    let mut vx = Vec::with_capacity(v.len());
    let mut vy = Vec::with_capacity(v.len());
    for (s, d) in v.iter().zip(theta) {
        match (s, d) {
            (Some(s), Some(d)) => {
                let (x, y) = decompose_wind(*s, *d)?;
                vx.push(Some(x));
                vy.push(Some(y));
            }
            _ => {
                vx.push(None);
                vy.push(None);
            }
        }
    }
    Ok((vx, vy))
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column_map(headers: &csv::StringRecord, required: &[&str], path: &Path) -> Result<HashMap<String, usize>> {
    let map: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_ascii_lowercase(), i))
        .collect();
    for col in required {
        if !map.contains_key(*col) {
            return Err(Error::Data(format!("{}: missing column '{col}'", path.display())));
        }
    }
    Ok(map)
}

fn parse_cell(record: &csv::StringRecord, idx: usize, line: u64) -> Result<Option<f64>> {
    let raw = record.get(idx).unwrap_or("");
    if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Data(format!("line {line}: cannot parse number '{raw}'")))
}

fn read_nwp(path: &Path) -> Result<(Vec<NaiveDateTime>, NwpSeries)> {
    let mut reader = open_reader(path)?;
    let mut required = vec!["timestamp"];
    required.extend(Variable::ALL.iter().map(|v| v.name()));
    let cols = column_map(reader.headers()?, &required, path)?;
    let mut rows: BTreeMap<NaiveDateTime, Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let ts = parse_timestamp(record.get(cols["timestamp"]).unwrap_or(""))?;
        let mut values = Vec::with_capacity(Variable::ALL.len());
        for var in Variable::ALL {
            let x = parse_cell(&record, cols[var.name()], line)?
                .ok_or_else(|| Error::Data(format!("{}: NWP {var} missing at {ts}", path.display())))?;
            values.push(x);
        }
        if rows.insert(ts, values).is_some() {
            return Err(Error::Data(format!("{}: duplicate NWP row at {ts}", path.display())));
        }
    }
    let timeline: Vec<NaiveDateTime> = rows.keys().copied().collect();
    let mut series = vec![Vec::with_capacity(timeline.len()); Variable::ALL.len()];
    for values in rows.values() {
        for (s, x) in series.iter_mut().zip(values) {
            s.push(*x);
        }
    }
    Ok((timeline, NwpSeries(series)))
}

fn read_observations(path: &Path, timeline: &[NaiveDateTime]) -> Result<(Vec<String>, Vec<ObservedSeries>)> {
    let mut reader = open_reader(path)?;
    let cols = column_map(
        reader.headers()?,
        &["timestamp", "station", "v", "theta", "tp", "rh", "slp"],
        path,
    )?;
    let position: HashMap<NaiveDateTime, usize> = timeline.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut stations: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut series: Vec<ObservedSeries> = Vec::new();
    let mut seen: Vec<Vec<bool>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let ts = parse_timestamp(record.get(cols["timestamp"]).unwrap_or(""))?;
        let t = *position
            .get(&ts)
            .ok_or_else(|| Error::Data(format!("{}: observation at {ts} has no NWP row", path.display())))?;
        let name = record.get(cols["station"]).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(Error::Data(format!(
                "{}: line {line}: empty station id",
                path.display()
            )));
        }
        let s = *index.entry(name.clone()).or_insert_with(|| {
            stations.push(name.clone());
            series.push(ObservedSeries::missing(timeline.len()));
            seen.push(vec![false; timeline.len()]);
            stations.len() - 1
        });
        if std::mem::replace(&mut seen[s][t], true) {
            return Err(Error::Data(format!(
                "{}: duplicate row for {name} at {ts}",
                path.display()
            )));
        }
        let row = &mut series[s];
        row.v[t] = parse_cell(&record, cols["v"], line)?;
        row.theta[t] = parse_cell(&record, cols["theta"], line)?;
        row.tp[t] = parse_cell(&record, cols["tp"], line)?;
        row.rh[t] = parse_cell(&record, cols["rh"], line)?;
        row.slp[t] = parse_cell(&record, cols["slp"], line)?;
    }
    if stations.is_empty() {
        return Err(Error::Data(format!("{}: no observation rows", path.display())));
    }
    Ok((stations, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn hours(n: usize) -> Vec<NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1)
            .unwrap()
            .and_hms_opt(1, 0, 0)
            .unwrap();
        (0..n).map(|i| start + Duration::hours(i as i64)).collect()
    }

    fn nwp(n: usize) -> NwpSeries {
        let mut s = vec![vec![1.0; n]; 7];
        s[Variable::Theta.index()] = vec![90.0; n];
        NwpSeries(s)
    }

    fn obs(v: Vec<Option<f64>>, theta: Vec<Option<f64>>) -> ObservedSeries {
        let n = v.len();
        ObservedSeries {
            v,
            theta,
            tp: vec![Some(20.0); n],
            rh: vec![Some(50.0); n],
            slp: vec![Some(1010.0); n],
        }
    }

    #[test]
    fn components_are_derived_and_zero_direction_wraps() {
        let f = WeatherFrame::new(
            hours(3),
            vec!["a".into()],
            vec![obs(
                vec![Some(1.0), Some(2.0), None],
                vec![Some(90.0), Some(0.0), Some(10.0)],
            )],
            nwp(3),
        )
        .unwrap();
        assert_eq!(f.obs(0, Variable::Theta)[1], Some(360.0));
        let vx = f.obs(0, Variable::Vx);
        assert!((vx[0].unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(vx[2], None);
        let vy = f.obs(0, Variable::Vy);
        assert!((vy[1].unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad_speed = obs(vec![Some(-1.0)], vec![Some(10.0)]);
        assert!(WeatherFrame::new(hours(1), vec!["a".into()], vec![bad_speed], nwp(1)).is_err());
        let bad_dir = obs(vec![Some(1.0)], vec![Some(361.0)]);
        assert!(WeatherFrame::new(hours(1), vec!["a".into()], vec![bad_dir], nwp(1)).is_err());
        let mut gappy = hours(3);
        gappy[2] += Duration::hours(1);
        let ok = obs(vec![Some(1.0); 3], vec![Some(10.0); 3]);
        assert!(WeatherFrame::new(gappy, vec!["a".into()], vec![ok.clone()], nwp(3)).is_err());
        let mut holes = nwp(3);
        holes.0[Variable::Tp.index()][1] = f64::NAN;
        assert!(WeatherFrame::new(hours(3), vec!["a".into()], vec![ok], holes).is_err());
    }

    #[test]
    fn filling_keeps_components_consistent() {
        let f = WeatherFrame::new(
            hours(4),
            vec!["a".into()],
            vec![obs(
                vec![Some(2.0), None, Some(2.0), Some(4.0)],
                vec![Some(80.0), Some(90.0), None, Some(100.0)],
            )],
            nwp(4),
        )
        .unwrap();
        let g = f.filled().unwrap();
        assert!(g.is_complete());
        let theta = g.series(0, Variable::Theta).unwrap();
        assert_eq!(theta[0], 80.0);
        assert_eq!(theta[1], 90.0);
        assert!(theta[2] > 80.0 && theta[2] < 100.0);
        let v = g.series(0, Variable::V).unwrap();
        assert_eq!(v, vec![2.0, 2.0, 2.0, 4.0]);
        let vx = g.series(0, Variable::Vx).unwrap();
        let vy = g.series(0, Variable::Vy).unwrap();
        for i in 0..4 {
            let (x, y) = decompose_wind(v[i], theta[i]).unwrap();
            assert!((x - vx[i]).abs() < 1e-9 && (y - vy[i]).abs() < 1e-9);
        }
        assert!(f.series(0, Variable::V).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = WeatherFrame::new(
            hours(3),
            vec!["s1".into(), "s2".into()],
            vec![
                obs(
                    vec![Some(1.5), None, Some(0.25)],
                    vec![Some(45.0), Some(90.0), Some(360.0)],
                ),
                obs(vec![Some(3.0); 3], vec![Some(180.0), None, Some(1.0)]),
            ],
            nwp(3),
        )
        .unwrap();
        let (o, n) = (dir.path().join("obs.csv"), dir.path().join("nwp.csv"));
        f.write_observations(&o).unwrap();
        f.write_nwp(&n).unwrap();
        let g = WeatherFrame::load(&o, &n).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn observations_outside_the_nwp_timeline_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (o, n) = (dir.path().join("obs.csv"), dir.path().join("nwp.csv"));
        std::fs::write(
            &n,
            "timestamp,v,vx,vy,theta,tp,rh,slp\n2021-01-01T01:00:00,1,0,0,90,1,1,1\n",
        )
        .unwrap();
        std::fs::write(
            &o,
            "timestamp,station,v,theta,tp,rh,slp\n2021-01-01T02:00:00,a,1,90,1,1,1\n",
        )
        .unwrap();
        assert!(matches!(WeatherFrame::load(&o, &n), Err(Error::Data(_))));
    }
}
