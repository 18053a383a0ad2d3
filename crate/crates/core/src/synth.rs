//! Synthetic observation and NWP generator with known structure.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{decompose_wind, wrap_degrees, NwpSeries, ObservedSeries, Variable, WeatherFrame};
use crate::error::{Error, Result};

/// Parameters of a synthetic airfield.
///
/// Every station sees a shared diurnal cycle plus a regional AR(1) anomaly
/// scaled by `spatial_strength`, plus its own AR(1) noise. The NWP stream
/// sees the same diurnal cycle and regional anomaly, offset by `nwp_bias`
/// and perturbed by white noise of scale `nwp_noise`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub stations: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub mean_speed: f64,
    pub diurnal_amplitude: f64,
    /// Station AR(1) coefficient.
    pub ar_coefficient: f64,
    /// Station AR(1) innovation scale.
    pub ar_noise: f64,
    pub regional_coefficient: f64,
    pub regional_noise: f64,
    pub spatial_strength: f64,
    pub nwp_bias: f64,
    pub nwp_noise: f64,
    /// Share of observation cells blanked at random.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            stations: 3,
            days: 30,
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            mean_speed: 7.0,
            diurnal_amplitude: 1.5,
            ar_coefficient: 0.8,
            ar_noise: 0.15,
            regional_coefficient: 0.9,
            regional_noise: 0.5,
            spatial_strength: 1.0,
            nwp_bias: 1.0,
            nwp_noise: 0.1,
            missing_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.stations == 0 {
            return bad("at least one station is required".into());
        }
        if self.days < 3 {
            return bad(format!("at least 3 days are required, got {}", self.days));
        }
        for (name, phi) in [
            ("ar_coefficient", self.ar_coefficient),
            ("regional_coefficient", self.regional_coefficient),
        ] {
            if !(phi > -1.0 && phi < 1.0) {
                return bad(format!("{name} must lie in (-1, 1), got {phi}"));
            }
        }
        let scales = [
            ("ar_noise", self.ar_noise),
            ("regional_noise", self.regional_noise),
            ("nwp_noise", self.nwp_noise),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("spatial_strength", self.spatial_strength),
            ("mean_speed", self.mean_speed),
        ];
        for (name, x) in scales {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        if !self.nwp_bias.is_finite() {
            return bad("nwp_bias must be finite".into());
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing_rate must lie in [0, 1), got {}", self.missing_rate));
        }
        Ok(())
    }
}

struct Ar1 {
    phi: f64,
    scale: f64,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let sd = scale / (1.0 - phi * phi).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Self {
            phi,
            scale,
            state: sd * z,
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.state = self.phi * self.state + self.scale * z;
        self.state
    }
}

/// Generates a frame whose timeline starts at 01:00 on `spec.start`.
pub fn synthesize(spec: &SynthSpec) -> Result<WeatherFrame> {
    spec.validate()?;
    let n = spec.days * 24;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = spec.start.and_hms_opt(1, 0, 0).expect("valid time");
    let timeline: Vec<_> = (0..n).map(|i| start + Duration::hours(i as i64)).collect();
    let tau = std::f64::consts::TAU;
    let day_phase: Vec<f64> = (0..n).map(|i| ((i + 1) % 24) as f64 / 24.0 * tau).collect();

    let mut regional = Ar1::new(spec.regional_coefficient, spec.regional_noise, &mut rng);
    let r: Vec<f64> = (0..n)
        .map(|_| regional.step(&mut rng) * spec.spatial_strength)
        .collect();
    let base_speed: Vec<f64> = (0..n)
        .map(|i| spec.mean_speed + spec.diurnal_amplitude * day_phase[i].sin() + r[i])
        .collect();
    let base_dir: Vec<f64> = (0..n)
        .map(|i| 220.0 + 70.0 * (i as f64 / (24.0 * 5.0) * tau).sin() + 8.0 * r[i])
        .collect();
    let base_tp: Vec<f64> = (0..n).map(|i| 15.0 + 5.0 * day_phase[i].sin() + 0.6 * r[i]).collect();
    let base_rh: Vec<f64> = (0..n).map(|i| 65.0 - 12.0 * day_phase[i].sin() - 2.0 * r[i]).collect();
    let base_slp: Vec<f64> = (0..n)
        .map(|i| 1013.0 + 4.0 * (i as f64 / (24.0 * 7.0) * tau).cos() + 0.5 * r[i])
        .collect();

    let mut observations = Vec::with_capacity(spec.stations);
    for _ in 0..spec.stations {
        let mut e = Ar1::new(spec.ar_coefficient, spec.ar_noise, &mut rng);
        let mut obs = ObservedSeries::missing(n);
        for i in 0..n {
            let noise = e.step(&mut rng);
            obs.v[i] = Some((base_speed[i] + noise).max(0.0));
            obs.theta[i] = Some(wrap_degrees(base_dir[i] + 10.0 * noise));
            obs.tp[i] = Some(base_tp[i] + 0.5 * noise);
            obs.rh[i] = Some(base_rh[i] - 2.0 * noise);
            obs.slp[i] = Some(base_slp[i] + 0.3 * noise);
        }
        if spec.missing_rate > 0.0 {
            for col in [&mut obs.v, &mut obs.theta, &mut obs.tp, &mut obs.rh, &mut obs.slp] {
                for cell in col.iter_mut().skip(1).take(n.saturating_sub(2)) {
                    if rng.random::<f64>() < spec.missing_rate {
                        *cell = None;
                    }
                }
            }
        }
        observations.push(obs);
    }

    let mut nwp = vec![vec![0.0; n]; Variable::ALL.len()];
    let mut gauss = |s: f64| s * rng.sample::<f64, _>(StandardNormal);
    for i in 0..n {
        let v = (base_speed[i] + spec.nwp_bias + gauss(spec.nwp_noise)).max(0.0);
        let theta = wrap_degrees(base_dir[i] + gauss(10.0 * spec.nwp_noise));
        let (vx, vy) = decompose_wind(v, theta)?;
        nwp[Variable::V.index()][i] = v;
        nwp[Variable::Theta.index()][i] = theta;
        nwp[Variable::Vx.index()][i] = vx;
        nwp[Variable::Vy.index()][i] = vy;
        nwp[Variable::Tp.index()][i] = base_tp[i] + gauss(spec.nwp_noise);
        nwp[Variable::Rh.index()][i] = base_rh[i] + gauss(4.0 * spec.nwp_noise);
        nwp[Variable::Slp.index()][i] = base_slp[i] + gauss(spec.nwp_noise);
    }
    let stations = (1..=spec.stations).map(|s| format!("S{s:02}")).collect();
    WeatherFrame::new(timeline, stations, observations, NwpSeries(nwp))
}
