use super::ItsConfig;
use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Half-width of the uniform range used for weight matrices. Biases start at zero.
pub const WEIGHT_INIT_RANGE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Embedding,
    Weight,
    Bias,
}

impl ParamKind {
    /// Whether the L2 penalty applies.
    pub fn regularized(self) -> bool {
        !matches!(self, ParamKind::Bias)
    }
}

/// Index into [`ItsParameters`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, Debug)]
pub struct GateIds {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

/// A GRU cell. `update` is absent when the update gate is supplied externally.
#[derive(Clone, Copy, Debug)]
pub struct GruIds {
    pub update: Option<GateIds>,
    pub reset: GateIds,
    pub candidate: GateIds,
}

#[derive(Clone, Copy, Debug)]
pub struct GateMlpIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct IterationIds {
    pub select_fwd: GruIds,
    pub select_bwd: GruIds,
    pub gate: Option<GateMlpIds>,
    pub unit: GruIds,
    pub decoder_fwd: GruIds,
    pub decoder_bwd: GruIds,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadIds {
    pub w3: ParamId,
    pub b3: ParamId,
    pub w4: ParamId,
    pub b4: ParamId,
}

/// Where every parameter lives; a pure function of the config.
#[derive(Clone, Debug)]
pub struct Layout {
    pub embedding: ParamId,
    pub context_fwd: GruIds,
    pub context_bwd: GruIds,
    pub doc_w: ParamId,
    pub doc_b: ParamId,
    pub blocks: Vec<IterationIds>,
    pub head: HeadIds,
}

impl Layout {
    /// Parameter block used by iteration `k` (0-based).
    pub fn block(&self, k: usize) -> &IterationIds {
        &self.blocks[k.min(self.blocks.len() - 1)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

struct LayoutBuilder {
    specs: Vec<ParamSpec>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, shape: Vec<usize>, kind: ParamKind) -> ParamId {
        self.specs.push(ParamSpec { name, shape, kind });
        ParamId(self.specs.len() - 1)
    }

    fn gate(&mut self, prefix: &str, suffix: &str, input: usize, hidden: usize) -> GateIds {
        GateIds {
            w: self.add(format!("{prefix}.w_{suffix}"), vec![hidden, input], ParamKind::Weight),
            u: self.add(format!("{prefix}.u_{suffix}"), vec![hidden, hidden], ParamKind::Weight),
            b: self.add(format!("{prefix}.b_{suffix}"), vec![hidden], ParamKind::Bias),
        }
    }

    fn gru(&mut self, prefix: &str, input: usize, hidden: usize, with_update: bool) -> GruIds {
        let update = with_update.then(|| self.gate(prefix, "u", input, hidden));
        GruIds {
            update,
            reset: self.gate(prefix, "r", input, hidden),
            candidate: self.gate(prefix, "h", input, hidden),
        }
    }
}

pub fn build_layout(config: &ItsConfig) -> (Layout, Vec<ParamSpec>) {
    let (e, h) = (config.embedding, config.hidden);
    let mut b = LayoutBuilder { specs: Vec::new() };
    let embedding = b.add("embedding".into(), vec![config.vocab_size, e], ParamKind::Embedding);
    let context_fwd = b.gru("context.fwd", e, h, true);
    let context_bwd = b.gru("context.bwd", e, h, true);
    let doc_w = b.add("document.w".into(), vec![h, 2 * h], ParamKind::Weight);
    let doc_b = b.add("document.b".into(), vec![h], ParamKind::Bias);
    let selective = config.use_selective_reading;
    let blocks = (0..config.parameter_blocks())
        .map(|k| {
            let p = format!("iter{k}");
            let select_fwd = b.gru(&format!("{p}.select.fwd"), h, h, !selective);
            let select_bwd = b.gru(&format!("{p}.select.bwd"), h, h, !selective);
            let gate = selective.then(|| GateMlpIds {
                w1: b.add(
                    format!("{p}.gate.w1"),
                    vec![config.gate_hidden, 3 * h],
                    ParamKind::Weight,
                ),
                b1: b.add(format!("{p}.gate.b1"), vec![config.gate_hidden], ParamKind::Bias),
                w2: b.add(format!("{p}.gate.w2"), vec![h, config.gate_hidden], ParamKind::Weight),
                b2: b.add(format!("{p}.gate.b2"), vec![h], ParamKind::Bias),
            });
            IterationIds {
                select_fwd,
                select_bwd,
                gate,
                unit: b.gru(&format!("{p}.unit"), h, h, true),
                decoder_fwd: b.gru(&format!("{p}.decoder.fwd"), h, h, true),
                decoder_bwd: b.gru(&format!("{p}.decoder.bwd"), h, h, true),
            }
        })
        .collect();
    let m = config.label_hidden;
    let head = HeadIds {
        w3: b.add("head.w3".into(), vec![m, config.label_input()], ParamKind::Weight),
        b3: b.add("head.b3".into(), vec![m], ParamKind::Bias),
        w4: b.add("head.w4".into(), vec![1, m], ParamKind::Weight),
        b4: b.add("head.b4".into(), vec![1], ParamKind::Bias),
    };
    let layout = Layout {
        embedding,
        context_fwd,
        context_bwd,
        doc_w,
        doc_b,
        blocks,
        head,
    };
    (layout, b.specs)
}

/// All trainable tensors of the network, in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct ItsParameters {
    specs: Vec<ParamSpec>,
    tensors: Vec<Tensor>,
}

impl ItsParameters {
    /// Fresh parameters: weights uniform in [-0.1, 0.1], biases zero, and
    /// the supplied embedding matrix.
    pub fn init(config: &ItsConfig, embedding: Tensor, rng: &mut SeededRng) -> Result<(Layout, Self)> {
        config.validate()?;
        let (layout, specs) = build_layout(config);
        let tensors = specs
            .iter()
            .map(|spec| match spec.kind {
                ParamKind::Embedding => {
                    if embedding.shape() != spec.shape.as_slice() {
                        return Err(Error::Shape {
                            op: "embedding init",
                            lhs: spec.shape.clone(),
                            rhs: embedding.shape().to_vec(),
                        });
                    }
                    Ok(embedding.clone())
                }
                ParamKind::Weight => Ok(rng.uniform_tensor(&spec.shape, -WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE)),
                ParamKind::Bias => Ok(Tensor::zeros(&spec.shape)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((layout, ItsParameters { specs, tensors }))
    }

    /// Reassembles parameters from named tensors, checking names and shapes
    /// against the layout of `config`.
    pub fn from_named(config: &ItsConfig, named: Vec<(String, Tensor)>) -> Result<(Layout, Self)> {
        config.validate()?;
        let (layout, specs) = build_layout(config);
        if named.len() != specs.len() {
            return Err(Error::Data(format!(
                "config expects {} parameter tensors, found {}",
                specs.len(),
                named.len()
            )));
        }
        let mut tensors = Vec::with_capacity(specs.len());
        for (spec, (name, tensor)) in specs.iter().zip(named) {
            if spec.name != name {
                return Err(Error::Data(format!(
                    "expected parameter {:?}, found {name:?}",
                    spec.name
                )));
            }
            if spec.shape.as_slice() != tensor.shape() {
                return Err(Error::Data(format!(
                    "parameter {name}: expected shape {:?}, found {:?}",
                    spec.shape,
                    tensor.shape()
                )));
            }
            tensors.push(tensor);
        }
        Ok((layout, ItsParameters { specs, tensors }))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn set(&mut self, id: ParamId, tensor: Tensor) -> Result<()> {
        if tensor.shape() != self.tensors[id.0].shape() {
            return Err(Error::Shape {
                op: "set parameter",
                lhs: self.tensors[id.0].shape().to_vec(),
                rhs: tensor.shape().to_vec(),
            });
        }
        self.tensors[id.0] = tensor;
        Ok(())
    }

    pub fn spec(&self, id: ParamId) -> &ParamSpec {
        &self.specs[id.0]
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.specs.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}
