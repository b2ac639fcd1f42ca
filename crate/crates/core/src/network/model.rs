use serde::{Deserialize, Serialize};

use super::layers::{
    decode_features, encode_context, init_doc_repr, iterate_doc, label_scores, positional_encode, selective_gate,
    selective_pass, GateMlpVars, GruVars, HeadVars,
};
use super::params::{ItsParameters, Layout, ParamId};
use super::ItsConfig;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, SeededRng, Tape, Tensor, Var};
use crate::text::TokenGrid;

/// Per-sentence extraction probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices of the `k` highest scores, best first; ties go to the lower index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order.truncate(k);
        order
    }
}

pub enum Mode<'a> {
    Eval,
    /// Dropout active, masks drawn from the generator.
    Train(&'a mut SeededRng),
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// `D_0 .. D_K`.
    pub doc_reprs: Vec<Tensor>,
    /// Stacked gate logits `F` per iteration (empty without selective reading).
    pub gate_logits: Vec<Tensor>,
    /// Normalized gates per iteration, one row per sentence.
    pub gates: Vec<Tensor>,
    /// Labeling head applied to each iteration's features alone, `[k][i]`.
    pub aux_scores: Vec<Vec<f64>>,
    /// Sentences with no non-padding token; they were encoded as zero vectors.
    pub empty_sentences: Vec<usize>,
    /// Context vectors `s_i` that feed every iteration.
    pub context: Vec<Tensor>,
}

/// A recorded forward pass, ready for `backward`.
pub struct ForwardPass {
    pub tape: Tape,
    /// Tape handle of parameter `i` is `param_vars[i]`.
    pub param_vars: Vec<Var>,
    pub scores: Var,
    pub diagnostics: Diagnostics,
}

impl ForwardPass {
    pub fn score_vector(&self) -> ScoreVector {
        ScoreVector(self.tape.value(self.scores).to_vec())
    }

    pub fn param_var(&self, id: ParamId) -> Var {
        self.param_vars[id.0]
    }
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub scores: ScoreVector,
    pub diagnostics: Diagnostics,
}

/// The iterative extractive summarizer.
#[derive(Clone, Debug)]
pub struct ItsModel {
    config: ItsConfig,
    layout: Layout,
    params: ItsParameters,
}

impl ItsModel {
    pub fn new(config: ItsConfig, embedding: Tensor, rng: &mut SeededRng) -> Result<Self> {
        let (layout, params) = ItsParameters::init(&config, embedding, rng)?;
        Ok(ItsModel { config, layout, params })
    }

    pub fn from_parts(config: ItsConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let (layout, params) = ItsParameters::from_named(&config, named)?;
        Ok(ItsModel { config, layout, params })
    }

    pub fn config(&self) -> &ItsConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &ItsParameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ItsParameters {
        &mut self.params
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        self.params
            .specs()
            .iter()
            .map(|s| s.name.clone())
            .zip(self.params.tensors().iter().cloned())
            .collect()
    }

    pub fn predict(&self, grid: &TokenGrid) -> Result<Prediction> {
        let pass = self.forward(grid, Mode::Eval)?;
        Ok(Prediction {
            scores: pass.score_vector(),
            diagnostics: pass.diagnostics,
        })
    }

    /// Records the full computation for one document.
    pub fn forward(&self, grid: &TokenGrid, mode: Mode<'_>) -> Result<ForwardPass> {
        let cfg = &self.config;
        let mut rng = match mode {
            Mode::Train(rng) if cfg.keep_prob < 1.0 => Some(rng),
            _ => None,
        };
        let keep = cfg.keep_prob;
        let mut drop = |tape: &mut Tape, v: Var| -> Result<Var> {
            match rng.as_deref_mut() {
                Some(rng) => {
                    let mask = rng.bernoulli_mask(tape.value(v).shape(), keep);
                    tape.dropout(v, keep, &mask)
                }
                None => Ok(v),
            }
        };

        let mut tape = Tape::new();
        let param_vars: Vec<Var> = self.params.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let layout = &self.layout;
        let mut diagnostics = Diagnostics::default();

        // sentence vectors
        let embedding = param_vars[layout.embedding.0];
        let mut sentence_vecs = Vec::with_capacity(grid.num_sentences());
        for i in 0..grid.num_sentences() {
            let ids = grid.words(i);
            if ids.is_empty() {
                diagnostics.empty_sentences.push(i);
                sentence_vecs.push(tape.constant(Tensor::zeros(&[cfg.embedding])));
                continue;
            }
            if let Some(&bad) = ids.iter().find(|&&id| id >= cfg.vocab_size) {
                return Err(Error::Data(format!(
                    "token id {bad} outside vocabulary of {}",
                    cfg.vocab_size
                )));
            }
            let words = tape.gather_rows(embedding, &ids)?;
            let words = drop(&mut tape, words)?;
            sentence_vecs.push(positional_encode(&mut tape, words)?);
        }

        let ctx_fwd = GruVars::bind(&layout.context_fwd, &param_vars);
        let ctx_bwd = GruVars::bind(&layout.context_bwd, &param_vars);
        let ctx_states = encode_context(&mut tape, &ctx_fwd, &ctx_bwd, &sentence_vecs)?;
        let mut doc = init_doc_repr(
            &mut tape,
            param_vars[layout.doc_w.0],
            param_vars[layout.doc_b.0],
            &ctx_states,
        )?;
        let context = ctx_states
            .combined(&mut tape)?
            .into_iter()
            .map(|v| drop(&mut tape, v))
            .collect::<Result<Vec<_>>>()?;
        diagnostics.context = context.iter().map(|&v| tape.value(v).clone()).collect();
        diagnostics.doc_reprs.push(tape.value(doc).clone());

        let zero_state = tape.constant(Tensor::zeros(&[cfg.hidden]));
        let mut features: Vec<Vec<Var>> = Vec::with_capacity(cfg.iterations);
        for k in 0..cfg.iterations {
            let block = layout.block(k);
            let gates = match &block.gate {
                Some(ids) => {
                    let mlp = GateMlpVars::bind(ids, &param_vars);
                    let g = selective_gate(&mut tape, &mlp, &context, doc)?;
                    diagnostics.gate_logits.push(tape.value(g.logits).clone());
                    let rows: Vec<&Tensor> = g.gates.iter().map(|&v| tape.value(v)).collect();
                    diagnostics.gates.push(Tensor::stack(&rows)?);
                    Some(g.gates)
                }
                None => None,
            };
            let sel_fwd = GruVars::bind(&block.select_fwd, &param_vars);
            let sel_bwd = GruVars::bind(&block.select_bwd, &param_vars);
            let pass = selective_pass(&mut tape, &sel_fwd, &sel_bwd, &context, gates.as_deref(), zero_state)?;
            let final_state = drop(&mut tape, pass.final_state)?;

            let unit = GruVars::bind(&block.unit, &param_vars);
            doc = iterate_doc(&mut tape, &unit, final_state, doc)?;
            diagnostics.doc_reprs.push(tape.value(doc).clone());

            let dec_fwd = GruVars::bind(&block.decoder_fwd, &param_vars);
            let dec_bwd = GruVars::bind(&block.decoder_bwd, &param_vars);
            let decoded = decode_features(&mut tape, &dec_fwd, &dec_bwd, &context, doc)?
                .into_iter()
                .map(|v| drop(&mut tape, v))
                .collect::<Result<Vec<_>>>()?;
            features.push(decoded);
        }

        let head = HeadVars::bind(&layout.head, &param_vars);
        let scores = label_scores(&mut tape, &head, &features, cfg.use_concat_labeling)?;

        diagnostics.aux_scores = features
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let values: Vec<&Tensor> = f.iter().map(|&v| tape.value(v)).collect();
                self.auxiliary_scores(k, &values)
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(ForwardPass {
            tape,
            param_vars,
            scores,
            diagnostics,
        })
    }

    /// The labeling head applied to iteration `k` alone. Under concatenated
    /// labeling only the columns of the first layer that read iteration `k`
    /// are used.
    fn auxiliary_scores(&self, k: usize, features: &[&Tensor]) -> Result<Vec<f64>> {
        let head = &self.layout.head;
        let w3 = self.params.get(head.w3);
        let b3 = self.params.get(head.b3).data();
        let w4 = self.params.get(head.w4).data();
        let b4 = self.params.get(head.b4).data()[0];
        let h = self.config.hidden;
        let offset = if self.config.use_concat_labeling { k * h } else { 0 };
        features
            .iter()
            .map(|f| {
                let x = f.data();
                let mut logit = b4;
                for (m, (&bias, &out_w)) in b3.iter().zip(w4).enumerate() {
                    let mut pre = bias;
                    for (j, &xj) in x.iter().enumerate() {
                        pre += w3.at(m, offset + j) * xj;
                    }
                    logit += out_w * pre.tanh();
                }
                Ok(sigmoid(logit))
            })
            .collect()
    }
}
