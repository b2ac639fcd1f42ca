//! Building blocks of the network, each recorded on a [`Tape`].

use super::params::{GateIds, GateMlpIds, GruIds, HeadIds};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub update: Option<GateVars>,
    pub reset: GateVars,
    pub candidate: GateVars,
}

#[derive(Clone, Copy, Debug)]
pub struct GateMlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub w3: Var,
    pub b3: Var,
    pub w4: Var,
    pub b4: Var,
}

impl GateVars {
    fn bind(ids: &GateIds, vars: &[Var]) -> Self {
        GateVars {
            w: vars[ids.w.0],
            u: vars[ids.u.0],
            b: vars[ids.b.0],
        }
    }
}

impl GruVars {
    pub fn bind(ids: &GruIds, vars: &[Var]) -> Self {
        GruVars {
            update: ids.update.as_ref().map(|g| GateVars::bind(g, vars)),
            reset: GateVars::bind(&ids.reset, vars),
            candidate: GateVars::bind(&ids.candidate, vars),
        }
    }

    /// A cell with every parameter recorded as a trainable leaf holding `value`.
    pub fn filled(tape: &mut Tape, input: usize, hidden: usize, with_update: bool, value: f64) -> Self {
        let gate = |tape: &mut Tape| GateVars {
            w: tape.param(Tensor::filled(&[hidden, input], value)),
            u: tape.param(Tensor::filled(&[hidden, hidden], value)),
            b: tape.param(Tensor::filled(&[hidden], value)),
        };
        GruVars {
            update: with_update.then(|| gate(tape)),
            reset: gate(tape),
            candidate: gate(tape),
        }
    }
}

impl GateMlpVars {
    pub fn bind(ids: &GateMlpIds, vars: &[Var]) -> Self {
        GateMlpVars {
            w1: vars[ids.w1.0],
            b1: vars[ids.b1.0],
            w2: vars[ids.w2.0],
            b2: vars[ids.b2.0],
        }
    }
}

impl HeadVars {
    pub fn bind(ids: &HeadIds, vars: &[Var]) -> Self {
        HeadVars {
            w3: vars[ids.w3.0],
            b3: vars[ids.b3.0],
            w4: vars[ids.w4.0],
            b4: vars[ids.b4.0],
        }
    }
}

/// Position weights `l[j][d] = (1 - j/n_w) - (d/E)(1 - 2j/n_w)` with 1-based `j`, `d`.
pub fn positional_weights(n_words: usize, width: usize) -> Tensor {
    let nw = n_words as f64;
    let e = width as f64;
    let mut data = Vec::with_capacity(n_words * width);
    for j in 1..=n_words {
        let jf = j as f64;
        for d in 1..=width {
            let df = d as f64;
            data.push((1.0 - jf / nw) - (df / e) * (1.0 - 2.0 * jf / nw));
        }
    }
    Tensor::from_parts(vec![n_words, width], data)
}

/// Sentence vector from its `n_w × E` word embeddings (padding already removed).
pub fn positional_encode(tape: &mut Tape, words: Var) -> Result<Var> {
    let shape = tape.value(words).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "positional encoding expects an n_w x E matrix, got {shape:?}"
        )));
    }
    let weights = tape.constant(positional_weights(shape[0], shape[1]));
    let weighted = tape.mul(words, weights)?;
    tape.sum_axis(weighted, 0)
}

fn affine(tape: &mut Tape, gate: &GateVars, x: Var, h: Var) -> Result<Var> {
    let wx = tape.matmul(gate.w, x)?;
    let uh = tape.matmul(gate.u, h)?;
    let s = tape.add(wx, uh)?;
    tape.add(s, gate.b)
}

/// One GRU step. `update_gate`, when given, replaces the cell's own update gate.
pub fn gru_step(tape: &mut Tape, cell: &GruVars, x: Var, h_prev: Var, update_gate: Option<Var>) -> Result<Var> {
    let reset_pre = affine(tape, &cell.reset, x, h_prev)?;
    let reset = tape.sigmoid(reset_pre);

    let wx = tape.matmul(cell.candidate.w, x)?;
    let uh = tape.matmul(cell.candidate.u, h_prev)?;
    let gated = tape.mul(reset, uh)?;
    let pre = tape.add(wx, gated)?;
    let pre = tape.add(pre, cell.candidate.b)?;
    let candidate = tape.tanh(pre);

    let update = match (update_gate, &cell.update) {
        (Some(g), _) => g,
        (None, Some(gate)) => {
            let pre = affine(tape, gate, x, h_prev)?;
            tape.sigmoid(pre)
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "GRU cell without its own update gate needs an external gate".into(),
            ))
        }
    };
    let take_new = tape.mul(update, candidate)?;
    let keep = tape.one_minus(update);
    let take_old = tape.mul(keep, h_prev)?;
    tape.add(take_new, take_old)
}

fn cell_width(tape: &Tape, cell: &GruVars) -> usize {
    tape.value(cell.reset.b).len()
}

/// Forward and backward state sequences, both indexed by sentence position.
#[derive(Clone, Debug)]
pub struct BiStates {
    pub fwd: Vec<Var>,
    pub bwd: Vec<Var>,
}

impl BiStates {
    /// Elementwise sum of the two directions per position.
    pub fn combined(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.fwd.iter().zip(&self.bwd).map(|(&f, &b)| tape.add(f, b)).collect()
    }
}

fn run_bidirectional(
    tape: &mut Tape,
    fwd: &GruVars,
    bwd: &GruVars,
    inputs: &[Var],
    init: Var,
    gates: Option<&[Var]>,
) -> Result<BiStates> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("recurrent pass over zero sentences".into()));
    }
    let gate = |i: usize| gates.map(|g| g[i]);
    let mut h = init;
    let mut fwd_states = Vec::with_capacity(inputs.len());
    for (i, &x) in inputs.iter().enumerate() {
        h = gru_step(tape, fwd, x, h, gate(i))?;
        fwd_states.push(h);
    }
    let mut h = init;
    let mut bwd_states = vec![init; inputs.len()];
    for i in (0..inputs.len()).rev() {
        h = gru_step(tape, bwd, inputs[i], h, gate(i))?;
        bwd_states[i] = h;
    }
    Ok(BiStates {
        fwd: fwd_states,
        bwd: bwd_states,
    })
}

/// Bidirectional sentence-level GRU from zero initial states.
pub fn encode_context(tape: &mut Tape, fwd: &GruVars, bwd: &GruVars, sentences: &[Var]) -> Result<BiStates> {
    let zero = tape.constant(Tensor::zeros(&[cell_width(tape, fwd)]));
    run_bidirectional(tape, fwd, bwd, sentences, zero, None)
}

/// `tanh(W mean_i [fwd_i; bwd_i] + b)`.
pub fn init_doc_repr(tape: &mut Tape, w: Var, b: Var, states: &BiStates) -> Result<Var> {
    let rows = states
        .fwd
        .iter()
        .zip(&states.bwd)
        .map(|(&f, &bk)| tape.concat(&[f, bk], 0))
        .collect::<Result<Vec<_>>>()?;
    let stacked = tape.stack(&rows)?;
    let pooled = tape.mean_axis(stacked, 0)?;
    let projected = tape.matmul(w, pooled)?;
    let shifted = tape.add(projected, b)?;
    Ok(tape.tanh(shifted))
}

/// Pre-softmax gate logits `F` (stacked, one row per sentence) and the
/// per-sentence gates normalized across sentences for every hidden dimension.
#[derive(Clone, Debug)]
pub struct SelectiveGates {
    pub logits: Var,
    pub gates: Vec<Var>,
}

/// `F_i` for one sentence: `W2 tanh(W1 [s_i * D; s_i; D] + b1) + b2`.
pub fn gate_logit(tape: &mut Tape, mlp: &GateMlpVars, sentence: Var, doc: Var) -> Result<Var> {
    let interaction = tape.mul(sentence, doc)?;
    let features = tape.concat(&[interaction, sentence, doc], 0)?;
    let pre = tape.matmul(mlp.w1, features)?;
    let pre = tape.add(pre, mlp.b1)?;
    let hidden = tape.tanh(pre);
    let out = tape.matmul(mlp.w2, hidden)?;
    tape.add(out, mlp.b2)
}

pub fn selective_gate(tape: &mut Tape, mlp: &GateMlpVars, sentences: &[Var], doc: Var) -> Result<SelectiveGates> {
    if sentences.is_empty() {
        return Err(Error::InvalidArgument("selective gate over zero sentences".into()));
    }
    let rows = sentences
        .iter()
        .map(|&s| gate_logit(tape, mlp, s, doc))
        .collect::<Result<Vec<_>>>()?;
    let logits = tape.stack(&rows)?;
    let normalized = tape.softmax(logits, 0)?;
    let gates = (0..sentences.len())
        .map(|i| tape.row(normalized, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectiveGates { logits, gates })
}

#[derive(Clone, Debug)]
pub struct SelectivePass {
    pub states: BiStates,
    /// Last forward state plus last backward state (the one at position 0).
    pub final_state: Var,
}

/// Bidirectional pass of modified GRU cells driven by precomputed gates.
///
/// Without gates the cells fall back to their own update gates, which is
/// the plain bidirectional GRU.
pub fn selective_pass(
    tape: &mut Tape,
    fwd: &GruVars,
    bwd: &GruVars,
    sentences: &[Var],
    gates: Option<&[Var]>,
    init: Var,
) -> Result<SelectivePass> {
    if let Some(g) = gates {
        if g.len() != sentences.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gates for {} sentences",
                g.len(),
                sentences.len()
            )));
        }
    }
    let states = run_bidirectional(tape, fwd, bwd, sentences, init, gates)?;
    let last = *states.fwd.last().expect("non-empty");
    let final_state = tape.add(last, states.bwd[0])?;
    Ok(SelectivePass { states, final_state })
}

/// `D_k = GRU(final_state, D_{k-1})`.
pub fn iterate_doc(tape: &mut Tape, cell: &GruVars, final_state: Var, doc_prev: Var) -> Result<Var> {
    gru_step(tape, cell, final_state, doc_prev, None)
}

/// Per-sentence decoder features: both directions start from `doc` and are summed.
pub fn decode_features(tape: &mut Tape, fwd: &GruVars, bwd: &GruVars, sentences: &[Var], doc: Var) -> Result<Vec<Var>> {
    let states = run_bidirectional(tape, fwd, bwd, sentences, doc, None)?;
    states.combined(tape)
}

/// Pre-sigmoid extraction logits `W4 tanh(W3 x_i + b3) + b4`, one per sentence.
pub fn label_logits(tape: &mut Tape, head: &HeadVars, inputs: &[Var]) -> Result<Var> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "labeling head needs at least one sentence".into(),
        ));
    }
    let logits = inputs
        .iter()
        .map(|&x| {
            let pre = tape.matmul(head.w3, x)?;
            let pre = tape.add(pre, head.b3)?;
            let hidden = tape.tanh(pre);
            let out = tape.matmul(head.w4, hidden)?;
            tape.add(out, head.b4)
        })
        .collect::<Result<Vec<_>>>()?;
    tape.concat(&logits, 0)
}

/// Extraction probabilities from the per-iteration features of every sentence.
///
/// `features[k][i]` is sentence `i` after iteration `k`. With `concat` the
/// head reads all iterations; otherwise only the last.
pub fn label_scores(tape: &mut Tape, head: &HeadVars, features: &[Vec<Var>], concat: bool) -> Result<Var> {
    let last = features
        .last()
        .ok_or_else(|| Error::InvalidArgument("labeling head needs features from at least one iteration".into()))?;
    let n = last.len();
    if features.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidArgument("iterations disagree on sentence count".into()));
    }
    let inputs = if concat {
        (0..n)
            .map(|i| {
                let parts: Vec<Var> = features.iter().map(|f| f[i]).collect();
                tape.concat(&parts, 0)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        last.clone()
    };
    let expected = tape.value(head.w3).cols();
    let got = tape.value(inputs[0]).len();
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "labeling head expects {expected} input features, got {got} (missing iteration features?)"
        )));
    }
    let logits = label_logits(tape, head, &inputs)?;
    Ok(tape.sigmoid(logits))
}
