//! Flat `key = value` run configuration with command-line overrides.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::ItsConfig;
use crate::rouge::TruncationPolicy;
use crate::text::{OracleObjective, DEFAULT_CAPACITY};
use crate::training::TrainConfig;

/// Everything a command needs besides its paths.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub its: ItsConfig,
    pub train: TrainConfig,
    pub policy: TruncationPolicy,
    /// Vocabulary size including the reserved ids.
    pub vocab_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            its: ItsConfig::default(),
            train: TrainConfig::default(),
            policy: TruncationPolicy::None,
            vocab_capacity: DEFAULT_CAPACITY,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_oracle(value: &str) -> Result<OracleObjective> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("oracle: unknown objective {value:?}")))
}

fn oracle_name(o: OracleObjective) -> String {
    serde_json::to_value(o)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl RunConfig {
    /// Tiny network with a fast schedule, sized for the marker corpus.
    pub fn synthetic() -> Self {
        RunConfig {
            its: ItsConfig::tiny(0),
            train: TrainConfig {
                learning_rate: 0.003,
                anneal_period: 50,
                epochs: 100,
                batch_size: 4,
                l2: 0.0,
                keep_prob: 1.0,
                ..TrainConfig::default()
            },
            policy: TruncationPolicy::None,
            vocab_capacity: DEFAULT_CAPACITY,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut run = match name {
            "default" => Ok(RunConfig::default()),
            "tiny" => Ok(RunConfig {
                its: ItsConfig::tiny(0),
                ..RunConfig::default()
            }),
            "synthetic" => Ok(RunConfig::synthetic()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }?;
        run.its.keep_prob = run.train.keep_prob;
        Ok(run)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let its = &mut self.its;
        let train = &mut self.train;
        match key.trim() {
            "iterations" => its.iterations = parse(key, value)?,
            "hidden" => its.hidden = parse(key, value)?,
            "embedding" => its.embedding = parse(key, value)?,
            "gate_hidden" => its.gate_hidden = parse(key, value)?,
            "label_hidden" => its.label_hidden = parse(key, value)?,
            "max_words" => its.max_words = parse(key, value)?,
            "use_selective_reading" => its.use_selective_reading = parse(key, value)?,
            "use_concat_labeling" => its.use_concat_labeling = parse(key, value)?,
            "tie_iteration_params" => its.tie_iteration_params = parse(key, value)?,
            "vocab_capacity" => self.vocab_capacity = parse(key, value)?,
            "learning_rate" => train.learning_rate = parse(key, value)?,
            "anneal_factor" => train.anneal_factor = parse(key, value)?,
            "anneal_period" => train.anneal_period = parse(key, value)?,
            "epochs" => train.epochs = parse(key, value)?,
            "batch_size" => train.batch_size = parse(key, value)?,
            "l2" => train.l2 = parse(key, value)?,
            "keep_prob" => {
                train.keep_prob = parse(key, value)?;
                its.keep_prob = train.keep_prob;
            }
            "max_select" => train.max_select = parse(key, value)?,
            "seed" => train.seed = parse(key, value)?,
            "oracle" => train.oracle = parse_oracle(value)?,
            "recompute_labels" => train.recompute_labels = parse(key, value)?,
            "policy" => self.policy = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply<'a>(&mut self, assignments: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for a in assignments {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {a:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Reads `key = value` lines on top of `self`. `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i + 1, format!("expected key = value, got {line:?}")))?;
            self.set(k, v).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.vocab_capacity < 3 {
            return Err(Error::Config(
                "vocab_capacity must leave room for one real token".into(),
            ));
        }
        // vocab_size is only known once the vocabulary is built
        ItsConfig {
            vocab_size: self.vocab_capacity,
            ..self.its.clone()
        }
        .validate()
    }

    /// Canonical text form; reading it back yields the same config.
    pub fn to_text(&self) -> String {
        let its = &self.its;
        let t = &self.train;
        let mut out = String::new();
        let pairs: [(&str, String); 22] = [
            ("iterations", its.iterations.to_string()),
            ("hidden", its.hidden.to_string()),
            ("embedding", its.embedding.to_string()),
            ("gate_hidden", its.gate_hidden.to_string()),
            ("label_hidden", its.label_hidden.to_string()),
            ("max_words", its.max_words.to_string()),
            ("use_selective_reading", its.use_selective_reading.to_string()),
            ("use_concat_labeling", its.use_concat_labeling.to_string()),
            ("tie_iteration_params", its.tie_iteration_params.to_string()),
            ("vocab_capacity", self.vocab_capacity.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("anneal_factor", t.anneal_factor.to_string()),
            ("anneal_period", t.anneal_period.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("l2", t.l2.to_string()),
            ("keep_prob", t.keep_prob.to_string()),
            ("max_select", t.max_select.to_string()),
            ("seed", t.seed.to_string()),
            ("oracle", oracle_name(t.oracle)),
            ("recompute_labels", t.recompute_labels.to_string()),
            ("policy", self.policy.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::synthetic();
        cfg.policy = TruncationPolicy::Bytes(75);
        cfg.train.oracle = OracleObjective::Rouge1Recall;
        let mut back = RunConfig::default();
        back.merge_text(&cfg.to_text(), "test").unwrap();
        back.its.vocab_size = cfg.its.vocab_size;
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = RunConfig::default();
        cfg.merge_text("# tiny run\niterations = 3  # K\n\nepochs=2\n", "t")
            .unwrap();
        cfg.apply(["epochs=4", "policy=words:10"]).unwrap();
        assert_eq!(cfg.its.iterations, 3);
        assert_eq!(cfg.train.epochs, 4);
        assert_eq!(cfg.policy, TruncationPolicy::Words(10));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut cfg = RunConfig::default();
        let err = cfg.merge_text("epochs = 3\nbogus = 1\n", "run.cfg").unwrap_err();
        assert!(err.to_string().contains("run.cfg line 2"), "{err}");
        assert!(cfg.apply(["epochs"]).is_err());
        assert!(cfg.set("epochs", "many").is_err());
        assert!(cfg.set("oracle", "best").is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(RunConfig::preset("default").unwrap(), RunConfig::default());
        let tiny = RunConfig::preset("tiny").unwrap();
        assert_eq!(tiny.its.hidden, 8);
        assert_eq!(tiny.its.keep_prob, tiny.train.keep_prob);
        assert!(RunConfig::preset("huge").is_err());
    }
}
