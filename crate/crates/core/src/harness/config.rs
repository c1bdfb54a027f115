//! Run configuration: flat `key = value` files with `#` comments.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{invalid, ClpError, Result};
use crate::graph::SplitRatios;
use crate::model::ModelConfig;
use crate::quantile::QuantileConfig;
use crate::sampler::SamplerConfig;

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    EdgeList {
        edges: PathBuf,
        features: Option<PathBuf>,
        num_nodes: Option<usize>,
    },
    Synthetic(SynthSpec),
}

/// Power-law base graph plus optional clique injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub nodes: usize,
    pub beta: f64,
    pub d_min: usize,
    pub clique_size: usize,
    pub clique_count: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            nodes: 2000,
            beta: 2.5,
            d_min: 2,
            clique_size: 0,
            clique_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub ratios: SplitRatios,
    pub feature_dim: usize,
    pub model: ModelConfig,
    pub quantile: QuantileConfig,
    /// `sampler.seed` is ignored; per-trial seeds are derived from `seed`.
    pub sampler: SamplerConfig,
    pub run_sampled_arm: bool,
    pub seed: u64,
    /// Independent random splits.
    pub splits: usize,
    /// Repetitions per split; each varies model, quantile and sampler seeds.
    pub repetitions: usize,
    pub data: DataSource,
}

impl Default for RunConfig {
    /// Desk-scale settings: small networks, 5 splits x 4 repetitions.
    fn default() -> Self {
        Self {
            alpha: 0.1,
            ratios: SplitRatios::default(),
            feature_dim: 1,
            model: desk_model(),
            quantile: desk_quantile(),
            sampler: SamplerConfig::default(),
            run_sampled_arm: true,
            seed: 0,
            splits: 5,
            repetitions: 4,
            data: DataSource::Synthetic(SynthSpec::default()),
        }
    }
}

fn desk_model() -> ModelConfig {
    ModelConfig {
        layers: 2,
        hidden_dim: 32,
        scorer_hidden: 32,
        epochs: 100,
        learning_rate: 0.2,
        ..ModelConfig::default()
    }
}

fn desk_quantile() -> QuantileConfig {
    QuantileConfig {
        hidden_dim: 32,
        epochs: 100,
        learning_rate: 0.05,
        ..QuantileConfig::default()
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        Self::default()
    }

    /// `desk` restores the defaults' networks and protocol; `paper` switches
    /// to the full-size networks and 5 splits x 10 repetitions.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        match name {
            "paper" => {
                self.model = ModelConfig::default();
                self.quantile = QuantileConfig::default();
                self.splits = 5;
                self.repetitions = 10;
            }
            "desk" => {
                self.model = desk_model();
                self.quantile = desk_quantile();
                self.splits = 5;
                self.repetitions = 4;
            }
            other => return Err(invalid(format!("unknown preset {other:?}"))),
        }
        Ok(())
    }

    pub fn trials(&self) -> usize {
        self.splits * self.repetitions
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.trials() == 0 {
            return Err(invalid("need at least one trial"));
        }
        if self.feature_dim == 0 {
            return Err(invalid("feature_dim must be positive"));
        }
        self.ratios.validate()?;
        self.model.validate()?;
        self.quantile.validate()?;
        self.sampler.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            if s.nodes < 10 || s.d_min == 0 || !(s.beta > 1.0) {
                return Err(invalid("synthetic graph needs nodes >= 10, d_min >= 1, beta > 1"));
            }
        }
        Ok(())
    }

    /// Parses a config document on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text`. A `preset` line is applied
    /// first so that explicit keys override it.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ClpError::Parse {
                line: lineno + 1,
                message: format!("expected key = value, found {trimmed:?}"),
            })?;
            pairs.push((lineno + 1, key.trim().to_string(), value.trim().to_string()));
        }
        pairs.sort_by_key(|(_, k, _)| k != "preset");
        for (line, key, value) in pairs {
            self.set(&key, &value).map_err(|e| match e {
                ClpError::Validation(message) => ClpError::Parse { line, message },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| invalid(format!("bad value {value:?} for {key}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(invalid(format!("bad boolean {value:?} for {key}"))),
            }
        }
        fn synth(data: &mut DataSource) -> &mut SynthSpec {
            if !matches!(data, DataSource::Synthetic(_)) {
                *data = DataSource::Synthetic(SynthSpec::default());
            }
            match data {
                DataSource::Synthetic(s) => s,
                DataSource::EdgeList { .. } => unreachable!(),
            }
        }
        match key {
            "preset" => self.apply_preset(value)?,
            "alpha" => self.alpha = num(key, value)?,
            "split" => {
                let parts = value
                    .split(',')
                    .map(|p| num::<f64>(key, p.trim()))
                    .collect::<Result<Vec<f64>>>()?;
                if parts.len() != 4 {
                    return Err(invalid("split needs four comma-separated ratios"));
                }
                self.ratios = SplitRatios::new(parts[0], parts[1], parts[2], parts[3])?;
            }
            "feature_dim" => self.feature_dim = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "splits" => self.splits = num(key, value)?,
            "repetitions" => self.repetitions = num(key, value)?,
            "sampled_arm" => self.run_sampled_arm = flag(key, value)?,
            "model.layers" => self.model.layers = num(key, value)?,
            "model.hidden" => self.model.hidden_dim = num(key, value)?,
            "model.scorer_hidden" => self.model.scorer_hidden = num(key, value)?,
            "model.aggregation" => self.model.aggregation = value.parse()?,
            "model.epochs" => self.model.epochs = num(key, value)?,
            "model.lr" => self.model.learning_rate = num(key, value)?,
            "model.momentum" => self.model.momentum = num(key, value)?,
            "model.batch" => self.model.batch_size = num(key, value)?,
            "quantile.hidden" => self.quantile.hidden_dim = num(key, value)?,
            "quantile.epochs" => self.quantile.epochs = num(key, value)?,
            "quantile.lr" => self.quantile.learning_rate = num(key, value)?,
            "quantile.momentum" => self.quantile.momentum = num(key, value)?,
            "quantile.batch" => self.quantile.batch_size = num(key, value)?,
            "sampler.lambda" => self.sampler.lambda = num(key, value)?,
            "sampler.mode" => self.sampler.mode = value.parse()?,
            "sampler.agg" => self.sampler.aggregation = value.parse()?,
            "dataset.edges" => {
                let (features, num_nodes) = match &self.data {
                    DataSource::EdgeList {
                        features,
                        num_nodes,
                        ..
                    } => (features.clone(), *num_nodes),
                    DataSource::Synthetic(_) => (None, None),
                };
                self.data = DataSource::EdgeList {
                    edges: PathBuf::from(value),
                    features,
                    num_nodes,
                };
            }
            "dataset.features" | "dataset.nodes" => match &mut self.data {
                DataSource::EdgeList {
                    features,
                    num_nodes,
                    ..
                } => {
                    if key == "dataset.features" {
                        *features = Some(PathBuf::from(value));
                    } else {
                        *num_nodes = Some(num(key, value)?);
                    }
                }
                DataSource::Synthetic(_) => {
                    return Err(invalid(format!("{key} requires dataset.edges to be set first")))
                }
            },
            "synth.nodes" => synth(&mut self.data).nodes = num(key, value)?,
            "synth.beta" => synth(&mut self.data).beta = num(key, value)?,
            "synth.d_min" => synth(&mut self.data).d_min = num(key, value)?,
            "synth.clique_size" => synth(&mut self.data).clique_size = num(key, value)?,
            "synth.clique_count" => synth(&mut self.data).clique_count = num(key, value)?,
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Every effective setting as sorted `key -> value` strings; feeding the
    /// echo back through [`RunConfig::set`] reproduces the configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("alpha", self.alpha.to_string());
        let r = self.ratios;
        put("split", format!("{},{},{},{}", r.train, r.val, r.calib, r.test));
        put("feature_dim", self.feature_dim.to_string());
        put("seed", self.seed.to_string());
        put("splits", self.splits.to_string());
        put("repetitions", self.repetitions.to_string());
        put("sampled_arm", self.run_sampled_arm.to_string());
        put("model.layers", self.model.layers.to_string());
        put("model.hidden", self.model.hidden_dim.to_string());
        put("model.scorer_hidden", self.model.scorer_hidden.to_string());
        put("model.aggregation", self.model.aggregation.to_string());
        put("model.epochs", self.model.epochs.to_string());
        put("model.lr", self.model.learning_rate.to_string());
        put("model.momentum", self.model.momentum.to_string());
        put("model.batch", self.model.batch_size.to_string());
        put("quantile.hidden", self.quantile.hidden_dim.to_string());
        put("quantile.epochs", self.quantile.epochs.to_string());
        put("quantile.lr", self.quantile.learning_rate.to_string());
        put("quantile.momentum", self.quantile.momentum.to_string());
        put("quantile.batch", self.quantile.batch_size.to_string());
        put("sampler.lambda", self.sampler.lambda.to_string());
        put("sampler.mode", self.sampler.mode.to_string());
        put("sampler.agg", self.sampler.aggregation.to_string());
        match &self.data {
            DataSource::EdgeList {
                edges,
                features,
                num_nodes,
            } => {
                put("dataset.edges", edges.display().to_string());
                if let Some(f) = features {
                    put("dataset.features", f.display().to_string());
                }
                if let Some(n) = num_nodes {
                    put("dataset.nodes", n.to_string());
                }
            }
            DataSource::Synthetic(s) => {
                put("synth.nodes", s.nodes.to_string());
                put("synth.beta", s.beta.to_string());
                put("synth.d_min", s.d_min.to_string());
                put("synth.clique_size", s.clique_size.to_string());
                put("synth.clique_count", s.clique_count.to_string());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::SamplerMode;

    #[test]
    fn parses_documented_keys() {
        let text = "# desk run\npreset = desk\nalpha = 0.2\nsplit = 0.6, 0.1, 0.15, 0.15\n\
                    sampler.lambda = 0.45\nsampler.mode = literal\nmodel.aggregation = mean\n\
                    synth.clique_size = 25\nsynth.clique_count = 5\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.ratios.train, 0.6);
        assert_eq!(cfg.sampler.mode, SamplerMode::Literal);
        assert_eq!(cfg.model.hidden_dim, 32);
        match cfg.data {
            DataSource::Synthetic(s) => assert_eq!((s.clique_size, s.clique_count), (25, 5)),
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn explicit_keys_override_preset_regardless_of_order() {
        let cfg = RunConfig::from_text("model.epochs = 7\npreset = paper\n").unwrap();
        assert_eq!(cfg.model.epochs, 7);
        assert_eq!(cfg.model.hidden_dim, 128);
        assert_eq!(cfg.repetitions, 10);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match RunConfig::from_text("alpha = 0.1\nbogus = 3\n") {
            Err(ClpError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_text("alpha\n").is_err());
        assert!(RunConfig::from_text("split = 0.5,0.5\n").is_err());
    }

    #[test]
    fn echo_reproduces_config() {
        let mut cfg = RunConfig::desk();
        cfg.set("dataset.edges", "/tmp/g.txt").unwrap();
        cfg.set("dataset.features", "/tmp/f.txt").unwrap();
        cfg.alpha = 0.05;
        let mut again = RunConfig::default();
        for (k, v) in cfg.echo() {
            if k.starts_with("dataset.") && k != "dataset.edges" {
                continue;
            }
            again.set(&k, &v).unwrap();
        }
        again.set("dataset.features", "/tmp/f.txt").unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.1;
        cfg.splits = 0;
        assert!(cfg.validate().is_err());
    }
}
