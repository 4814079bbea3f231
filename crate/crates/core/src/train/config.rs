use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::reduce::{ReductionConfig, ReductionMode};

/// Training protocol and model hyperparameters.
///
/// Serialized as flat JSON whose keys are listed in [`TrainConfig::KEYS`];
/// the reduction settings appear as `reduce.mode` and `reduce.k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub class_count: usize,
    pub hidden_size: usize,
    pub dropout: f64,
    /// Global-norm gradient clip; off when `None`.
    pub clip_norm: Option<f64>,
    pub reduction: ReductionConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 5,
            validation_fraction: 0.1,
            seed: 0,
            class_count: 4,
            hidden_size: 100,
            dropout: 0.2,
            clip_norm: None,
            reduction: ReductionConfig::default(),
        }
    }
}

/// One configuration key with its description.
#[derive(Debug, Clone, Copy)]
pub struct ConfigKey {
    pub name: &'static str,
    pub help: &'static str,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl TrainConfig {
    pub const KEYS: &'static [ConfigKey] = &[
        ConfigKey {
            name: "folds",
            help: "number of stratified cross-validation folds",
        },
        ConfigKey {
            name: "epochs",
            help: "maximum training epochs per fold",
        },
        ConfigKey {
            name: "batch-size",
            help: "mini-batch size (last batch may be short)",
        },
        ConfigKey {
            name: "learning-rate",
            help: "Adam step size (0.0001 is a slower alternative)",
        },
        ConfigKey {
            name: "patience",
            help: "epochs without strict validation-accuracy gain before stopping",
        },
        ConfigKey {
            name: "validation-fraction",
            help: "stratified share of each training split held out for early stopping",
        },
        ConfigKey {
            name: "seed",
            help: "base seed; fold f trains with seed + f",
        },
        ConfigKey {
            name: "class-count",
            help: "severity classes C; FMS 1-10 is split into C contiguous ranges",
        },
        ConfigKey {
            name: "hidden-size",
            help: "units per LSTM layer",
        },
        ConfigKey {
            name: "dropout",
            help: "dropout after each LSTM layer",
        },
        ConfigKey {
            name: "clip-norm",
            help: "global gradient-norm clip, \"none\" to disable",
        },
        ConfigKey {
            name: "reduce.mode",
            help: "temporal reduction: concat (k frames per step) or max-pool",
        },
        ConfigKey {
            name: "reduce.k",
            help: "frames per reduction window",
        },
    ];

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.batch_size == 0 {
            return fail("batch-size must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return fail(format!(
                "validation-fraction must be in (0, 0.5), got {}",
                self.validation_fraction
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning-rate must be positive, got {}", self.learning_rate));
        }
        if self.class_count < 2 {
            return fail(format!("class-count must be at least 2, got {}", self.class_count));
        }
        if self.hidden_size == 0 {
            return fail("hidden-size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("clip-norm must be positive, got {c}"));
            }
        }
        self.reduction.validate()
    }

    /// Sets one key from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "folds" => self.folds = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "validation-fraction" => self.validation_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "class-count" => self.class_count = parse(key, value)?,
            "hidden-size" => self.hidden_size = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "clip-norm" => {
                self.clip_norm = match value {
                    "none" | "null" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "reduce.mode" => self.reduction.mode = value.parse::<ReductionMode>()?,
            "reduce.k" => self.reduction.window = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "folds" => self.folds.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch-size" => self.batch_size.to_string(),
            "learning-rate" => self.learning_rate.to_string(),
            "patience" => self.patience.to_string(),
            "validation-fraction" => self.validation_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "class-count" => self.class_count.to_string(),
            "hidden-size" => self.hidden_size.to_string(),
            "dropout" => self.dropout.to_string(),
            "clip-norm" => self.clip_norm.map_or_else(|| "none".into(), |c| c.to_string()),
            "reduce.mode" => self.reduction.mode.to_string(),
            "reduce.k" => self.reduction.window.to_string(),
            _ => return None,
        })
    }

    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("folds".into(), self.folds.into());
        m.insert("epochs".into(), self.epochs.into());
        m.insert("batch-size".into(), self.batch_size.into());
        m.insert("learning-rate".into(), self.learning_rate.into());
        m.insert("patience".into(), self.patience.into());
        m.insert("validation-fraction".into(), self.validation_fraction.into());
        m.insert("seed".into(), self.seed.into());
        m.insert("class-count".into(), self.class_count.into());
        m.insert("hidden-size".into(), self.hidden_size.into());
        m.insert("dropout".into(), self.dropout.into());
        m.insert("clip-norm".into(), self.clip_norm.map_or(Value::Null, Value::from));
        m.insert("reduce.mode".into(), self.reduction.mode.to_string().into());
        m.insert("reduce.k".into(), self.reduction.window.into());
        m
    }

    /// Applies every key of a flat JSON object on top of `self`.
    pub fn apply_json(&mut self, map: &Map<String, Value>) -> Result<()> {
        for (k, v) in map {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Null => "none".into(),
                Value::Number(n) => n.to_string(),
                other => return Err(Error::Config(format!("{k}: unsupported value {other}"))),
            };
            self.set(k, &text)?;
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::json("config", e))?;
        let Value::Object(map) = value else {
            return Err(Error::Config("config must be a flat JSON object".into()));
        };
        let mut cfg = Self::default();
        cfg.apply_json(&map)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_through_flat_keys() {
        let mut cfg = TrainConfig::default();
        cfg.set("reduce.mode", "max-pool").unwrap();
        cfg.set("reduce.k", "15").unwrap();
        cfg.set("clip-norm", "2.5").unwrap();
        cfg.set("learning-rate", "0.0001").unwrap();
        let text = serde_json::to_string(&cfg.to_json()).unwrap();
        assert_eq!(TrainConfig::from_json_str(&text).unwrap(), cfg);
    }

    #[test]
    fn every_key_is_gettable_and_settable() {
        let mut cfg = TrainConfig::default();
        for key in TrainConfig::KEYS {
            let v = cfg.get(key.name).unwrap();
            cfg.set(key.name, &v).unwrap();
            assert!(cfg.to_json().contains_key(key.name));
        }
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.to_json().len(), TrainConfig::KEYS.len());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(TrainConfig::from_json_str(r#"{"foldz": 3}"#).is_err());
        assert!(TrainConfig::from_json_str(r#"{"folds": "x"}"#).is_err());
        assert!(TrainConfig::from_json_str("[1]").is_err());
        let bad = TrainConfig {
            validation_fraction: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig {
            folds: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        TrainConfig::default().validate().unwrap();
    }
}
