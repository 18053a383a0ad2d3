use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use windcast::training::{read_key_values, TrainConfig};
use windcast::{Error, Result};

/// Keys accepted in a config file besides the training fields.
pub const EXTRA_KEYS: [&str; 20] = [
    "observations",
    "nwp",
    "out",
    "out_dir",
    "covariates",
    "checkpoints",
    "dump",
    "models",
    "seeds",
    "protocol",
    "folds",
    "window",
    "holdout_days",
    "validation_days",
    "train_days",
    "depth",
    "variable",
    "max_lag",
    "from",
    "to",
];

/// Resolved key/value settings: flag over config file over default.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(config: Option<&Path>, flags: Vec<(&'static str, Option<String>)>) -> Result<Self> {
        let mut values = match config {
            Some(p) => read_key_values(p)?,
            None => BTreeMap::new(),
        };
        for key in values.keys() {
            if !TrainConfig::KEYS.contains(&key.as_str()) && !EXTRA_KEYS.contains(&key.as_str()) {
                return Err(Error::Argument(format!("unknown config key '{key}'")));
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { values })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (k, v) in &self.values {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.get(key).map(PathBuf::from).ok_or_else(|| {
            Error::Argument(format!(
                "missing --{} (or '{key}' in the config file)",
                key.replace('_', "-")
            ))
        })
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Argument(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }
}
