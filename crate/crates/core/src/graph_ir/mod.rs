//! Framework-neutral computation-graph IR.
//!
//! A [`ComputationGraph`] is a DAG of [`IRNode`]s whose ids are dense and
//! already in topological order. Graphs enter the crate either as JSON
//! documents ([`parse_graph_json`]) or from the parametric model zoo
//! ([`build_zoo_model`]).

mod json;
mod shapes;
mod zoo;

use std::collections::BTreeMap;
use std::fmt;

pub use json::{parse_graph_json, to_graph_json};
pub use shapes::infer_shapes;
pub(crate) use shapes::{groups as conv_groups, Window};
pub use zoo::{build_zoo_model, ZooFamily, ZooSpec};

/// Operator classes recognised by the featurizer.
///
/// The discriminant is the one-hot slot used in node features, so the order
/// here is part of the model file contract (see [`VOCAB_VERSION`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    Conv2d = 0,
    Conv2dTranspose = 1,
    Dense = 2,
    BatchMatmul = 3,
    Relu = 4,
    Add = 5,
    Multiply = 6,
    MaxPool2d = 7,
    AvgPool2d = 8,
    GlobalAvgPool2d = 9,
    BatchNorm = 10,
    Softmax = 11,
    Reshape = 12,
    Concat = 13,
    LayerNorm = 14,
    Other = 15,
}

/// Identifies the operator vocabulary and feature layout. Bump whenever
/// [`OperatorKind`] or the attribute slot order changes.
pub const VOCAB_VERSION: &str = "v1";

impl OperatorKind {
    pub const COUNT: usize = 16;

    pub const ALL: [OperatorKind; Self::COUNT] = [
        OperatorKind::Conv2d,
        OperatorKind::Conv2dTranspose,
        OperatorKind::Dense,
        OperatorKind::BatchMatmul,
        OperatorKind::Relu,
        OperatorKind::Add,
        OperatorKind::Multiply,
        OperatorKind::MaxPool2d,
        OperatorKind::AvgPool2d,
        OperatorKind::GlobalAvgPool2d,
        OperatorKind::BatchNorm,
        OperatorKind::Softmax,
        OperatorKind::Reshape,
        OperatorKind::Concat,
        OperatorKind::LayerNorm,
        OperatorKind::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Conv2d => "conv2d",
            OperatorKind::Conv2dTranspose => "conv2d_transpose",
            OperatorKind::Dense => "dense",
            OperatorKind::BatchMatmul => "batch_matmul",
            OperatorKind::Relu => "relu",
            OperatorKind::Add => "add",
            OperatorKind::Multiply => "multiply",
            OperatorKind::MaxPool2d => "maxpool2d",
            OperatorKind::AvgPool2d => "avgpool2d",
            OperatorKind::GlobalAvgPool2d => "global_avgpool2d",
            OperatorKind::BatchNorm => "batchnorm",
            OperatorKind::Softmax => "softmax",
            OperatorKind::Reshape => "reshape",
            OperatorKind::Concat => "concat",
            OperatorKind::LayerNorm => "layernorm",
            OperatorKind::Other => "other",
        }
    }

    /// Maps an operator name to its class. Accepts the canonical names plus
    /// the Relay-style `nn.` spellings; anything else is [`OperatorKind::Other`].
    pub fn from_name(name: &str) -> OperatorKind {
        let lower = name.trim().to_ascii_lowercase();
        let bare = lower.strip_prefix("nn.").unwrap_or(&lower);
        match bare {
            "conv2d" => OperatorKind::Conv2d,
            "conv2d_transpose" => OperatorKind::Conv2dTranspose,
            "dense" | "linear" => OperatorKind::Dense,
            "batch_matmul" => OperatorKind::BatchMatmul,
            "relu" => OperatorKind::Relu,
            "add" => OperatorKind::Add,
            "multiply" | "mul" => OperatorKind::Multiply,
            "maxpool2d" | "max_pool2d" => OperatorKind::MaxPool2d,
            "avgpool2d" | "avg_pool2d" => OperatorKind::AvgPool2d,
            "global_avgpool2d" | "global_avg_pool2d" => OperatorKind::GlobalAvgPool2d,
            "batchnorm" | "batch_norm" => OperatorKind::BatchNorm,
            "softmax" => OperatorKind::Softmax,
            "reshape" | "flatten" | "batch_flatten" => OperatorKind::Reshape,
            "concat" | "concatenate" => OperatorKind::Concat,
            "layernorm" | "layer_norm" => OperatorKind::LayerNorm,
            _ => OperatorKind::Other,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Names of nodes that carry data rather than compute. They keep the
/// `other` kind but are dropped by the featurizer.
const DATA_NODE_NAMES: &[&str] =
    &["input", "var", "variable", "placeholder", "data", "constant", "const", "param", "parameter", "weight"];

/// Operator attributes, in node-feature slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attr {
    KernelH,
    KernelW,
    StrideH,
    StrideW,
    PadH,
    PadW,
    DilationH,
    DilationW,
    Groups,
    OutFeatures,
    HasBias,
    Epsilon,
}

impl Attr {
    pub const ALL: [Attr; 12] = [
        Attr::KernelH,
        Attr::KernelW,
        Attr::StrideH,
        Attr::StrideW,
        Attr::PadH,
        Attr::PadW,
        Attr::DilationH,
        Attr::DilationW,
        Attr::Groups,
        Attr::OutFeatures,
        Attr::HasBias,
        Attr::Epsilon,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Attr::KernelH => "kernel_h",
            Attr::KernelW => "kernel_w",
            Attr::StrideH => "stride_h",
            Attr::StrideW => "stride_w",
            Attr::PadH => "pad_h",
            Attr::PadW => "pad_w",
            Attr::DilationH => "dilation_h",
            Attr::DilationW => "dilation_w",
            Attr::Groups => "groups",
            Attr::OutFeatures => "out_features",
            Attr::HasBias => "has_bias",
            Attr::Epsilon => "epsilon",
        }
    }
}

/// Named numeric attributes. Keys outside [`Attr`] are kept so documents
/// round-trip, but only the known ones feed features and shape inference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeMap(BTreeMap<String, f64>);

impl AttributeMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Value of `attr`, 0 when absent.
    pub fn get(&self, attr: Attr) -> f64 {
        self.0.get(attr.key()).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, attr: Attr, value: f64) {
        self.0.insert(attr.key().to_string(), value);
    }

    pub fn with(mut self, attr: Attr, value: f64) -> Self {
        self.set(attr, value);
        self
    }

    pub fn insert_raw(&mut self, key: String, value: f64) {
        self.0.insert(key, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Integer attribute, or `None` when absent or non-positive.
    pub(crate) fn positive(&self, attr: Attr) -> Option<usize> {
        let v = self.get(attr);
        (v >= 1.0 && v.fract() == 0.0).then_some(v as usize)
    }

    /// Integer attribute with 0/absent replaced by `default`.
    pub(crate) fn or_default(&self, attr: Attr, default: usize) -> usize {
        self.positive(attr).unwrap_or(default)
    }

    pub(crate) fn non_negative(&self, attr: Attr) -> usize {
        let v = self.get(attr);
        if v > 0.0 {
            v as usize
        } else {
            0
        }
    }
}

/// Output shape in NCHW order; lower ranks are left-aligned (`[N, F]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub const MAX_RANK: usize = 4;

    pub fn new(dims: Vec<usize>) -> Result<Self, String> {
        if dims.is_empty() || dims.len() > Self::MAX_RANK {
            return Err(format!("rank {} outside [1, 4]", dims.len()));
        }
        if dims.contains(&0) {
            return Err(format!("non-positive dimension in {dims:?}"));
        }
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> u128 {
        self.0.iter().map(|&d| d as u128).product()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IRNode {
    pub id: usize,
    pub kind: OperatorKind,
    pub raw_name: String,
    pub attrs: AttributeMap,
    /// `None` only before shape inference has run.
    pub out_shape: Option<Shape>,
    pub inputs: Vec<usize>,
}

impl IRNode {
    pub fn new(id: usize, op: &str) -> Self {
        IRNode {
            id,
            kind: OperatorKind::from_name(op),
            raw_name: op.to_string(),
            attrs: AttributeMap::new(),
            out_shape: None,
            inputs: Vec::new(),
        }
    }

    /// True for inputs, constants and parameters: nodes that hold data
    /// instead of computing it.
    pub fn is_data(&self) -> bool {
        self.kind == OperatorKind::Other && DATA_NODE_NAMES.iter().any(|n| self.raw_name.eq_ignore_ascii_case(n))
    }

    pub fn is_operator(&self) -> bool {
        !self.is_data()
    }

    pub fn shape(&self) -> Option<&[usize]> {
        self.out_shape.as_ref().map(Shape::dims)
    }
}

/// A validated operator DAG. Node `i` has id `i`, and every input id is
/// smaller than the id of the node consuming it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationGraph {
    pub name: String,
    pub batch_size: usize,
    pub nodes: Vec<IRNode>,
    pub outputs: Vec<usize>,
}

impl ComputationGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &IRNode {
        &self.nodes[id]
    }

    pub fn operator_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_operator()).count()
    }

    /// Checks the structural invariants: dense ids, topological inputs,
    /// at least one existing output, positive batch.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.batch_size == 0 {
            return Err(Error::MalformedDocument("batch must be positive".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::MalformedDocument("graph declares no outputs".into()));
        }
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(Error::MalformedDocument(format!("node at position {pos} has id {}", node.id)));
            }
            for &input in &node.inputs {
                if input >= self.nodes.len() {
                    return Err(Error::DanglingReference { node: pos as u64, missing: input as u64 });
                }
                if input >= pos {
                    return Err(Error::CyclicGraph(pos as u64));
                }
            }
        }
        for &out in &self.outputs {
            if out >= self.nodes.len() {
                return Err(Error::MalformedDocument(format!("output id {out} does not exist")));
            }
        }
        Ok(())
    }

    /// Same graph at a different batch size, with shapes re-inferred.
    ///
    /// Source shapes get the new leading dimension. Derived shapes are
    /// recomputed, except `reshape` and `other` nodes whose explicit shape
    /// cannot be re-derived; those keep their trailing dims.
    pub fn with_batch(&self, batch: usize) -> crate::Result<ComputationGraph> {
        if batch == 0 {
            return Err(crate::Error::MalformedDocument("batch must be positive".into()));
        }
        let mut graph = self.clone();
        graph.batch_size = batch;
        for node in &mut graph.nodes {
            let keep = node.inputs.is_empty() || matches!(node.kind, OperatorKind::Reshape | OperatorKind::Other);
            node.out_shape = match (&node.out_shape, keep) {
                (Some(shape), true) => {
                    let mut dims = shape.dims().to_vec();
                    dims[0] = batch;
                    Some(Shape(dims))
                }
                _ => None,
            };
        }
        infer_shapes(&graph)
    }
}
