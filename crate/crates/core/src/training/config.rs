use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Optimizer schedule, stopping rule and architecture sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub lr_min: f64,
    pub batch: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub k: usize,
    pub w: usize,
    pub fct_hour: u32,
    pub lstm_hidden: usize,
    pub future_multiplier: usize,
    pub spatial_filters: usize,
    pub spatial_kernel: usize,
    pub threshold: f64,
    pub ridge_lambda: f64,
    pub clip_speed: bool,
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-3,
            lr_factor: 0.5,
            lr_patience: 3,
            lr_min: 1e-4,
            batch: 32,
            early_stop_patience: 30,
            max_epochs: 1000,
            seed: 0,
            k: 24,
            w: 24,
            fct_hour: 0,
            lstm_hidden: 32,
            future_multiplier: 2,
            spatial_filters: 64,
            spatial_kernel: 5,
            threshold: 0.2,
            ridge_lambda: 1.0,
            clip_speed: false,
            jobs: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Argument(format!("invalid value '{value}' for {key}")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 19] = [
        "lr_init",
        "lr_factor",
        "lr_patience",
        "lr_min",
        "batch",
        "early_stop_patience",
        "max_epochs",
        "seed",
        "k",
        "w",
        "fct_hour",
        "lstm_hidden",
        "future_multiplier",
        "spatial_filters",
        "spatial_kernel",
        "threshold",
        "ridge_lambda",
        "clip_speed",
        "jobs",
    ];

    /// Sets one field by name. Returns `Ok(false)` for keys this struct does
    /// not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lr_init" => self.lr_init = parse(key, value)?,
            "lr_factor" => self.lr_factor = parse(key, value)?,
            "lr_patience" => self.lr_patience = parse(key, value)?,
            "lr_min" => self.lr_min = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "early_stop_patience" => self.early_stop_patience = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "w" => self.w = parse(key, value)?,
            "fct_hour" => self.fct_hour = parse(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse(key, value)?,
            "future_multiplier" => self.future_multiplier = parse(key, value)?,
            "spatial_filters" => self.spatial_filters = parse(key, value)?,
            "spatial_kernel" => self.spatial_kernel = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "ridge_lambda" => self.ridge_lambda = parse(key, value)?,
            "clip_speed" => self.clip_speed = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "lr_init" => self.lr_init.to_string(),
            "lr_factor" => self.lr_factor.to_string(),
            "lr_patience" => self.lr_patience.to_string(),
            "lr_min" => self.lr_min.to_string(),
            "batch" => self.batch.to_string(),
            "early_stop_patience" => self.early_stop_patience.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "seed" => self.seed.to_string(),
            "k" => self.k.to_string(),
            "w" => self.w.to_string(),
            "fct_hour" => self.fct_hour.to_string(),
            "lstm_hidden" => self.lstm_hidden.to_string(),
            "future_multiplier" => self.future_multiplier.to_string(),
            "spatial_filters" => self.spatial_filters.to_string(),
            "spatial_kernel" => self.spatial_kernel.to_string(),
            "threshold" => self.threshold.to_string(),
            "ridge_lambda" => self.ridge_lambda.to_string(),
            "clip_speed" => self.clip_speed.to_string(),
            "jobs" => self.jobs.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_patience", self.lr_patience),
            ("batch", self.batch),
            ("early_stop_patience", self.early_stop_patience),
            ("max_epochs", self.max_epochs),
            ("k", self.k),
            ("w", self.w),
            ("lstm_hidden", self.lstm_hidden),
            ("future_multiplier", self.future_multiplier),
            ("spatial_filters", self.spatial_filters),
            ("spatial_kernel", self.spatial_kernel),
            ("jobs", self.jobs),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("{k} must be positive")));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_init && self.lr_init.is_finite()) {
            return Err(Error::Argument(format!(
                "need 0 < lr_min ({}) <= lr_init ({})",
                self.lr_min, self.lr_init
            )));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::Argument(format!(
                "lr_factor must lie in (0, 1), got {}",
                self.lr_factor
            )));
        }
        if self.fct_hour > 23 {
            return Err(Error::Argument(format!(
                "fct_hour must be 0..=23, got {}",
                self.fct_hour
            )));
        }
        if !(self.ridge_lambda >= 0.0) || !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Argument(
                "ridge_lambda must be >= 0 and threshold in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("config line {}: expected key=value, got '{raw}'", n + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Argument(format!("config line {}: empty key", n + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_protocol() {
        let c = TrainConfig::default();
        assert_eq!((c.lr_init, c.lr_factor, c.lr_patience, c.lr_min), (1e-3, 0.5, 3, 1e-4));
        assert_eq!((c.batch, c.early_stop_patience, c.k, c.w), (32, 30, 24, 24));
        c.validate().unwrap();
    }

    #[test]
    fn every_key_round_trips() {
        let mut c = TrainConfig::default();
        for key in TrainConfig::KEYS {
            let v = c.get(key).unwrap();
            assert!(c.set(key, &v).unwrap(), "{key}");
        }
        assert_eq!(c, TrainConfig::default());
        assert!(!c.set("obs", "x.csv").unwrap());
        assert!(c.set("batch", "many").is_err());
    }

    #[test]
    fn key_value_parsing() {
        let m = parse_key_values("# comment\nbatch = 16\n\nseed=3 # trailing\nbatch=8\n").unwrap();
        assert_eq!(m["batch"], "8");
        assert_eq!(m["seed"], "3");
        assert!(parse_key_values("nonsense").is_err());
    }

    #[test]
    fn invalid_combinations() {
        assert!(TrainConfig {
            lr_min: 0.01,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
