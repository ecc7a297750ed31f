//! Run configuration: one flat struct covering training, evaluation, mining,
//! and seeds, serializable to a `key = value` text file.
//!
//! Precedence is defaults < config file < command-line flags; the CLI applies
//! flags after loading any file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::Activation;
use crate::sampler::MiningMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub loss: LossKind,
    pub margin_alpha: f64,
    /// `None` picks the per-loss default: 120 for triplet, 128 otherwise.
    pub batch_size: Option<usize>,
    pub embedding_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning-rate multiplier for the final layer.
    pub last_layer_lr_multiplier: f64,
    pub max_iterations: usize,
    /// Training stops early once the loss drops below this floor (0 disables).
    pub loss_floor: f64,
    pub mining_mode: MiningMode,
    pub negatives_per_positive_element: usize,
    pub candidate_pool_size: usize,
    /// Restrict the lifted losses to a balanced negative subsample per batch.
    pub subsample_negatives: bool,
    pub eval_ks: Vec<usize>,
    pub data_seed: u64,
    pub init_seed: u64,
    pub sampler_seed: u64,
    pub train_fraction: f64,
    /// Append wall-clock milliseconds to the training log. Off by default so
    /// identical runs produce byte-identical logs.
    pub log_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::LiftedSmooth,
            margin_alpha: 1.0,
            batch_size: None,
            embedding_dim: 64,
            hidden_widths: vec![32],
            hidden_activation: Activation::Relu,
            learning_rate: 0.01,
            momentum: 0.9,
            last_layer_lr_multiplier: 1.0,
            max_iterations: 20_000,
            loss_floor: 0.0,
            mining_mode: MiningMode::WithinBatch,
            negatives_per_positive_element: 1,
            candidate_pool_size: 256,
            subsample_negatives: false,
            eval_ks: vec![1, 2, 4, 8],
            data_seed: 0,
            init_seed: 0,
            sampler_seed: 0,
            train_fraction: 0.5,
            log_wall_time: false,
        }
    }
}

impl RunConfig {
    /// Batch size after applying the per-loss default.
    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.loss {
            LossKind::Triplet => 120,
            _ => 128,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.margin_alpha < 0.0 || !self.margin_alpha.is_finite() {
            return Err(Error::Config("margin_alpha must be >= 0".into()));
        }
        let m = self.effective_batch_size();
        if m < 4 {
            return Err(Error::Config("batch_size must be >= 4".into()));
        }
        match self.loss {
            LossKind::Contrastive if !m.is_multiple_of(2) => {
                return Err(Error::Config(format!(
                    "contrastive loss requires an even batch size, got {m}"
                )));
            }
            LossKind::Triplet if !m.is_multiple_of(3) => {
                return Err(Error::Config(format!(
                    "triplet loss requires a batch size divisible by 3, got {m}"
                )));
            }
            _ => {}
        }
        if self.embedding_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.eval_ks.is_empty() {
            return Err(Error::Config("eval_ks must not be empty".into()));
        }
        if self.candidate_pool_size < m {
            return Err(Error::Config(
                "candidate_pool_size must be >= batch_size".into(),
            ));
        }
        Ok(())
    }

    /// Serializes to `key = value` lines, one per field, in a fixed order.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("loss", self.loss.to_string());
        put("margin_alpha", self.margin_alpha.to_string());
        put(
            "batch_size",
            self.batch_size
                .map(|b| b.to_string())
                .unwrap_or_else(|| "default".into()),
        );
        put("embedding_dim", self.embedding_dim.to_string());
        put(
            "hidden_widths",
            self.hidden_widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("hidden_activation", self.hidden_activation.as_str().into());
        put("learning_rate", self.learning_rate.to_string());
        put("momentum", self.momentum.to_string());
        put(
            "last_layer_lr_multiplier",
            self.last_layer_lr_multiplier.to_string(),
        );
        put("max_iterations", self.max_iterations.to_string());
        put("loss_floor", self.loss_floor.to_string());
        put("mining_mode", self.mining_mode.as_str().into());
        put(
            "negatives_per_positive_element",
            self.negatives_per_positive_element.to_string(),
        );
        put("candidate_pool_size", self.candidate_pool_size.to_string());
        put("subsample_negatives", self.subsample_negatives.to_string());
        put(
            "eval_ks",
            self.eval_ks
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("data_seed", self.data_seed.to_string());
        put("init_seed", self.init_seed.to_string());
        put("sampler_seed", self.sampler_seed.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("log_wall_time", self.log_wall_time.to_string());
        out
    }

    /// Applies one `key = value` assignment.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value `{value}` for `{what}`"));
        match key {
            "loss" => self.loss = value.parse()?,
            "margin_alpha" => self.margin_alpha = value.parse().map_err(|_| bad(key))?,
            "batch_size" => {
                self.batch_size = if value == "default" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key))?)
                }
            }
            "embedding_dim" => self.embedding_dim = value.parse().map_err(|_| bad(key))?,
            "hidden_widths" => {
                self.hidden_widths = parse_list(value).map_err(|_| bad(key))?;
            }
            "hidden_activation" => self.hidden_activation = value.parse()?,
            "learning_rate" => self.learning_rate = value.parse().map_err(|_| bad(key))?,
            "momentum" => self.momentum = value.parse().map_err(|_| bad(key))?,
            "last_layer_lr_multiplier" => {
                self.last_layer_lr_multiplier = value.parse().map_err(|_| bad(key))?
            }
            "max_iterations" => self.max_iterations = value.parse().map_err(|_| bad(key))?,
            "loss_floor" => self.loss_floor = value.parse().map_err(|_| bad(key))?,
            "mining_mode" => self.mining_mode = value.parse()?,
            "negatives_per_positive_element" => {
                self.negatives_per_positive_element = value.parse().map_err(|_| bad(key))?
            }
            "candidate_pool_size" => {
                self.candidate_pool_size = value.parse().map_err(|_| bad(key))?
            }
            "subsample_negatives" => {
                self.subsample_negatives = value.parse().map_err(|_| bad(key))?
            }
            "eval_ks" => self.eval_ks = parse_list(value).map_err(|_| bad(key))?,
            "data_seed" => self.data_seed = value.parse().map_err(|_| bad(key))?,
            "init_seed" => self.init_seed = value.parse().map_err(|_| bad(key))?,
            "sampler_seed" => self.sampler_seed = value.parse().map_err(|_| bad(key))?,
            "train_fraction" => self.train_fraction = value.parse().map_err(|_| bad(key))?,
            "log_wall_time" => self.log_wall_time = value.parse().map_err(|_| bad(key))?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a full `key = value` document (blank lines and `#` comments
    /// allowed) on top of the current values.
    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Flat echo of the effective configuration for reports.
    pub fn echo(&self) -> std::collections::BTreeMap<String, String> {
        self.to_kv_string()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, ()> {
    value
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| ()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = RunConfig {
            loss: LossKind::Triplet,
            batch_size: Some(33),
            hidden_widths: vec![16, 8],
            eval_ks: vec![1, 5, 10],
            subsample_negatives: true,
            learning_rate: 0.007,
            ..Default::default()
        };
        cfg.mining_mode = MiningMode::PoolMined;
        let text = cfg.to_kv_string();
        let parsed = RunConfig::from_kv_str(&text).unwrap();
        assert_eq!(cfg, parsed);
        assert_eq!(text, parsed.to_kv_string());
    }

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        let parsed = RunConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn per_loss_batch_defaults() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.effective_batch_size(), 128);
        cfg.loss = LossKind::Triplet;
        assert_eq!(cfg.effective_batch_size(), 120);
    }

    #[test]
    fn triplet_batch_size_must_divide_by_three() {
        let cfg = RunConfig {
            loss: LossKind::Triplet,
            batch_size: Some(121),
            candidate_pool_size: 256,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_key() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_kv("bogus", "1").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::from_kv_str("# a comment\n\nloss = triplet\n").unwrap();
        assert_eq!(cfg.loss, LossKind::Triplet);
    }
}
