//! Supervised training: cross-entropy on oracle labels, Adam with a step
//! annealing schedule, L2 on non-bias parameters, and the ablation switches.

mod adam;
mod loss;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ItsConfig, ItsModel, Mode};
use crate::tensor::{GradCheck, GradCheckReport, GradCheckRow, SeededRng, Tensor};
use crate::text::{
    greedy_oracle_labels_with, tokenize_and_pad, Document, LabelVector, OracleObjective, TokenGrid, Vocabulary,
};

pub use adam::Adam;
pub use loss::{l2_penalty, label_loss, loss, regularized_names, EPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub anneal_factor: f64,
    /// Epochs between learning-rate reductions.
    pub anneal_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub keep_prob: f64,
    pub max_select: usize,
    pub seed: u64,
    pub oracle: OracleObjective,
    /// Ignore labels stored in the corpus and rerun the oracle.
    pub recompute_labels: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            anneal_factor: 0.5,
            anneal_period: 6,
            epochs: 30,
            batch_size: 64,
            l2: 1e-5,
            keep_prob: 0.7,
            max_select: 3,
            seed: 1,
            oracle: OracleObjective::default(),
            recompute_labels: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("anneal_factor", self.anneal_factor),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
        }
        if self.epochs == 0 || self.anneal_period == 0 || self.batch_size == 0 || self.max_select == 0 {
            return Err(Error::Config(
                "epochs, anneal_period, batch_size and max_select must be at least 1".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "keep_prob must lie in (0, 1], got {}",
                self.keep_prob
            )));
        }
        Ok(())
    }
}

/// `initial * factor^floor(epoch / period)`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let drops = (epoch / cfg.anneal_period) as i32;
    cfg.learning_rate * cfg.anneal_factor.powi(drops)
}

/// Model variants with one mechanism removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    NoSelective,
    NoIteration,
    NoConcat,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoSelective,
        Ablation::NoIteration,
        Ablation::NoConcat,
    ];

    pub fn apply(self, mut config: ItsConfig) -> ItsConfig {
        match self {
            Ablation::Full => {}
            Ablation::NoSelective => config.use_selective_reading = false,
            Ablation::NoIteration => config.iterations = 1,
            Ablation::NoConcat => config.use_concat_labeling = false,
        }
        config
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSelective => "no_selective",
            Ablation::NoIteration => "no_iteration",
            Ablation::NoConcat => "no_concat",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}")))
    }
}

/// A document ready for the network.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub grid: TokenGrid,
    pub labels: LabelVector,
}

/// Tokenizes documents and attaches labels: stored labels when present
/// (unless `recompute_labels`), otherwise the greedy oracle's.
pub fn prepare_examples(
    docs: &[Document],
    vocab: &Vocabulary,
    max_words: usize,
    cfg: &TrainConfig,
) -> Result<Vec<Example>> {
    docs.iter()
        .map(|doc| {
            let labels = match (&doc.labels, cfg.recompute_labels) {
                (Some(stored), false) => LabelVector::new(stored.clone()),
                _ => greedy_oracle_labels_with(doc, cfg.max_select, cfg.oracle)?,
            };
            Ok(Example {
                id: doc.id.clone(),
                grid: tokenize_and_pad(doc, vocab, max_words)?,
                labels,
            })
        })
        .collect()
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    /// Fraction of sentences whose thresholded score (>= 0.5) equals the label,
    /// measured on the training forward passes.
    pub label_accuracy: f64,
    pub wall_seconds: f64,
}

impl EpochMetrics {
    /// Wall time is left out so that logs of identical runs are identical.
    pub const CSV_HEADER: &'static str = "epoch,lr,mean_loss,label_accuracy";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.lr, self.mean_loss, self.label_accuracy)
    }
}

/// Per-document objective: mean label cross-entropy plus the L2 term.
pub struct DocumentStep {
    pub loss: f64,
    pub grads: Vec<Tensor>,
    pub correct: usize,
    pub sentences: usize,
}

/// Forward and backward for one document.
pub fn document_step(model: &ItsModel, example: &Example, l2: f64, mode: Mode<'_>) -> Result<DocumentStep> {
    let mut pass = model.forward(&example.grid, mode)?;
    let scores = pass.score_vector();
    let data_loss = label_loss(&mut pass.tape, pass.scores, &example.labels)?;
    let objective = match l2_penalty(&mut pass.tape, model.params(), &pass.param_vars, l2)? {
        Some(penalty) => pass.tape.add(data_loss, penalty)?,
        None => data_loss,
    };
    let loss = pass.tape.value(objective).item()?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("loss is {loss} on document {:?}", example.id)));
    }
    let mut grads = pass.tape.backward(objective)?;
    let grads = pass.param_vars.iter().map(|&v| grads.take(v)).collect();
    let correct = scores
        .as_slice()
        .iter()
        .zip(example.labels.as_slice())
        .filter(|(&s, &y)| (s >= 0.5) == (y == 1))
        .count();
    Ok(DocumentStep {
        loss,
        grads,
        correct,
        sentences: example.labels.len(),
    })
}

/// Value of the per-document objective without recording gradients.
pub fn document_objective(model: &ItsModel, example: &Example, l2: f64) -> Result<f64> {
    let mut pass = model.forward(&example.grid, Mode::Eval)?;
    let data_loss = label_loss(&mut pass.tape, pass.scores, &example.labels)?;
    let objective = match l2_penalty(&mut pass.tape, model.params(), &pass.param_vars, l2)? {
        Some(penalty) => pass.tape.add(data_loss, penalty)?,
        None => data_loss,
    };
    pass.tape.value(objective).item()
}

/// Compares backpropagated gradients of the document objective with central
/// differences, one report per parameter tensor. Dropout is not applied.
pub fn check_model_gradients(
    model: &ItsModel,
    example: &Example,
    l2: f64,
    settings: GradCheck,
) -> Result<Vec<(String, GradCheckReport)>> {
    let analytic = document_step(model, example, l2, Mode::Eval)?.grads;
    let ids: Vec<_> = model.params().ids().collect();
    ids.into_par_iter()
        .map(|id| {
            let name = model.params().spec(id).name.clone();
            let base = model.params().get(id).clone();
            let rows = (0..base.len())
                .map(|c| {
                    let at = |delta: f64| -> Result<f64> {
                        let mut data = base.to_vec();
                        data[c] += delta;
                        let mut probe = model.clone();
                        probe.params_mut().set(id, Tensor::new(base.shape().to_vec(), data)?)?;
                        document_objective(&probe, example, l2)
                    };
                    let numeric = (at(settings.step)? - at(-settings.step)?) / (2.0 * settings.step);
                    let a = analytic[id.0].data()[c];
                    Ok(GradCheckRow {
                        coordinate: c,
                        analytic: a,
                        numeric,
                        rel_err: settings.relative_error(a, numeric),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name, GradCheckReport::from_rows(rows, settings.tol)))
        })
        .collect()
}

/// Mini-batch trainer owning the authoritative parameters.
pub struct Trainer {
    pub model: ItsModel,
    pub optimizer: Adam,
    pub config: TrainConfig,
    /// Epochs already completed.
    pub epoch: usize,
}

impl Trainer {
    pub fn new(model: ItsModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Adam::new(model.params().tensors());
        Ok(Trainer {
            model,
            optimizer,
            config,
            epoch: 0,
        })
    }

    pub fn resume(model: ItsModel, optimizer: Adam, epoch: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if !optimizer.matches(model.params().tensors()) {
            return Err(Error::Data(
                "optimizer state does not match the model parameters".into(),
            ));
        }
        Ok(Trainer {
            model,
            optimizer,
            config,
            epoch,
        })
    }

    /// Gradient of the mean objective over `batch`; documents run in
    /// parallel and are reduced in batch order.
    fn batch_gradients(&self, batch: &[(usize, &Example)], epoch: usize) -> Result<(Vec<Tensor>, f64, usize, usize)> {
        let root = SeededRng::new(self.config.seed).derive(1 + epoch as u64);
        let steps: Vec<DocumentStep> = batch
            .par_iter()
            .map(|&(index, ex)| {
                let mut rng = root.derive(index as u64);
                document_step(&self.model, ex, self.config.l2, Mode::Train(&mut rng))
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / steps.len() as f64;
        let mut sums: Vec<Vec<f64>> = self
            .model
            .params()
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        let (mut loss, mut correct, mut sentences) = (0.0, 0, 0);
        for step in &steps {
            for (acc, g) in sums.iter_mut().zip(&step.grads) {
                for (a, v) in acc.iter_mut().zip(g.data()) {
                    *a += v;
                }
            }
            loss += step.loss;
            correct += step.correct;
            sentences += step.sentences;
        }
        let grads = sums
            .into_iter()
            .zip(self.model.params().tensors())
            .map(|(s, t)| Tensor::new(t.shape().to_vec(), s.into_iter().map(|v| v * scale).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok((grads, loss, correct, sentences))
    }

    /// One optimizer step on `batch`, returning the batch's mean objective.
    pub fn step_batch(&mut self, batch: &[&Example], lr: f64) -> Result<f64> {
        let indexed: Vec<(usize, &Example)> = batch.iter().copied().enumerate().collect();
        let (grads, loss, _, _) = self.batch_gradients(&indexed, self.epoch)?;
        self.apply(&grads, lr)?;
        Ok(loss / batch.len() as f64)
    }

    fn apply(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        let names: Vec<String> = self.model.params().specs().iter().map(|s| s.name.clone()).collect();
        let mut tensors = self.model.params().tensors().to_vec();
        self.optimizer.step(&mut tensors, grads, lr, |i| names[i].clone())?;
        let ids: Vec<_> = self.model.params().ids().collect();
        for (id, t) in ids.into_iter().zip(tensors) {
            self.model.params_mut().set(id, t)?;
        }
        Ok(())
    }

    /// Runs the next epoch over `examples` in a seeded shuffled order.
    pub fn run_epoch(&mut self, examples: &[Example]) -> Result<EpochMetrics> {
        if examples.is_empty() {
            return Err(Error::Data("training corpus is empty".into()));
        }
        let start = Instant::now();
        let epoch = self.epoch;
        let lr = lr_schedule(epoch, &self.config);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        SeededRng::new(self.config.seed)
            .derive(0x5eed_0000 + epoch as u64)
            .shuffle(&mut order);

        let (mut total_loss, mut correct, mut sentences) = (0.0, 0, 0);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<(usize, &Example)> = chunk.iter().map(|&i| (i, &examples[i])).collect();
            let (grads, loss, c, s) = self.batch_gradients(&batch, epoch)?;
            self.apply(&grads, lr)?;
            total_loss += loss;
            correct += c;
            sentences += s;
        }
        self.epoch += 1;
        Ok(EpochMetrics {
            epoch,
            lr,
            mean_loss: total_loss / examples.len() as f64,
            label_accuracy: correct as f64 / sentences as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Trains until `config.epochs` epochs are complete, calling `on_epoch`
    /// after each one.
    pub fn train(
        &mut self,
        examples: &[Example],
        mut on_epoch: impl FnMut(&Trainer, &EpochMetrics) -> Result<()>,
    ) -> Result<Vec<EpochMetrics>> {
        let mut log = Vec::new();
        while self.epoch < self.config.epochs {
            let metrics = self.run_epoch(examples)?;
            on_epoch(self, &metrics)?;
            log.push(metrics);
        }
        Ok(log)
    }
}

/// Builds a fresh model for `its` under `ablation` with the dropout rate of `train`.
pub fn build_model(its: &ItsConfig, train: &TrainConfig, ablation: Ablation, embedding: Tensor) -> Result<ItsModel> {
    let mut config = ablation.apply(its.clone());
    config.keep_prob = train.keep_prob;
    let mut rng = SeededRng::new(train.seed).derive(0x1417);
    ItsModel::new(config, embedding, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_halves_every_six_epochs() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 0.001);
        assert_eq!(lr_schedule(5, &cfg), 0.001);
        assert_eq!(lr_schedule(6, &cfg), 0.0005);
        assert_eq!(lr_schedule(12, &cfg), 0.00025);
    }

    #[test]
    fn schedule_has_ceil_epochs_over_period_values() {
        for (epochs, period) in [(30, 6), (31, 6), (7, 3), (5, 10)] {
            let cfg = TrainConfig {
                epochs,
                anneal_period: period,
                ..TrainConfig::default()
            };
            let mut values: Vec<f64> = (0..epochs).map(|e| lr_schedule(e, &cfg)).collect();
            assert!(values.windows(2).all(|w| w[1] <= w[0]));
            values.dedup();
            assert_eq!(values.len(), epochs.div_ceil(period));
        }
    }

    #[test]
    fn ablation_flags() {
        let base = ItsConfig::tiny(10);
        assert!(!Ablation::NoSelective.apply(base.clone()).use_selective_reading);
        assert_eq!(Ablation::NoIteration.apply(base.clone()).iterations, 1);
        assert!(!Ablation::NoConcat.apply(base.clone()).use_concat_labeling);
        assert_eq!(Ablation::Full.apply(base.clone()), base);
        assert_eq!("no_concat".parse::<Ablation>().unwrap(), Ablation::NoConcat);
        assert!("nope".parse::<Ablation>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
