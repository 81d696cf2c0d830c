//! Flat `key = value` configuration files (`#` starts a comment).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::classifier::MlpConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key {key:?}: {message}")]
    Value { key: String, message: String },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: ToString,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key not listed in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }
}

/// Keys understood by [`apply_classifier_keys`].
pub const CLASSIFIER_KEYS: [&str; 8] = [
    "hidden_dims",
    "learning_rate",
    "epochs",
    "batch_size",
    "seed",
    "l2",
    "optimizer",
    "class_weights",
];

/// Overrides classifier hyperparameters present in `kv`. `hidden_dims` is a
/// comma list; an empty value means no hidden layer.
pub fn apply_classifier_keys(kv: &KeyValues, cfg: &mut MlpConfig) -> Result<(), ConfigError> {
    if let Some(dims) = kv.get("hidden_dims") {
        cfg.hidden_dims = dims
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>().map_err(|e| ConfigError::Value {
                    key: "hidden_dims".into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = kv.parse_value("learning_rate")? {
        cfg.learning_rate = v;
    }
    if let Some(v) = kv.parse_value("epochs")? {
        cfg.epochs = v;
    }
    if let Some(v) = kv.parse_value("batch_size")? {
        cfg.batch_size = v;
    }
    if let Some(v) = kv.parse_value("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = kv.parse_value("l2")? {
        cfg.l2 = v;
    }
    if let Some(v) = kv.parse_value("optimizer")? {
        cfg.optimizer = v;
    }
    if let Some(v) = kv.parse_value("class_weights")? {
        cfg.class_weights = v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ClassWeights, Optimizer};

    #[test]
    fn parses_and_applies() {
        let kv = KeyValues::parse(
            "# head\nepochs = 5\nhidden_dims = 32, 16 # two layers\nclass_weights=balanced\noptimizer = sgd\n",
        )
        .unwrap();
        let mut cfg = MlpConfig::new(3, 2);
        apply_classifier_keys(&kv, &mut cfg).unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.hidden_dims, [32, 16]);
        assert_eq!(cfg.class_weights, ClassWeights::Balanced);
        assert_eq!(cfg.optimizer, Optimizer::Sgd);
        assert!(kv.reject_unknown(&CLASSIFIER_KEYS).is_ok());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            KeyValues::parse("novalue\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KeyValues::parse("a=1\na=2\n"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        let kv = KeyValues::parse("epochs = many\nfoo = 1").unwrap();
        let mut cfg = MlpConfig::new(3, 2);
        assert!(apply_classifier_keys(&kv, &mut cfg).is_err());
        assert!(matches!(kv.reject_unknown(&CLASSIFIER_KEYS), Err(ConfigError::UnknownKey(k)) if k == "foo"));
        assert!(matches!(kv.require("data"), Err(ConfigError::Missing(_))));
    }
}
