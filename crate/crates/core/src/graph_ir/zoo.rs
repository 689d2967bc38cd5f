//! Parametric model zoo.
//!
//! Three families stand in for imported models. The seed only decides
//! where optional batch-norm layers go, so two specs that differ in seed
//! share their static counts but not necessarily their topology.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{infer_shapes, Attr, AttributeMap, ComputationGraph, IRNode, OperatorKind, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ZooFamily {
    Mlp,
    Vggish,
    Resnetish,
}

impl ZooFamily {
    pub const ALL: [ZooFamily; 3] = [ZooFamily::Mlp, ZooFamily::Vggish, ZooFamily::Resnetish];

    pub fn name(self) -> &'static str {
        match self {
            ZooFamily::Mlp => "mlp",
            ZooFamily::Vggish => "vggish",
            ZooFamily::Resnetish => "resnetish",
        }
    }

    pub fn from_name(name: &str) -> Option<ZooFamily> {
        ZooFamily::ALL.into_iter().find(|f| f.name() == name.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZooSpec {
    pub family: ZooFamily,
    pub depth: usize,
    pub width: usize,
    pub batch_size: usize,
    pub input_hw: usize,
    pub seed: u64,
}

impl ZooSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec(format!("depth, width and batch must be positive in {self:?}")));
        }
        if !self.input_hw.is_power_of_two() || !(8..=256).contains(&self.input_hw) {
            return Err(Error::InvalidSpec(format!("input_hw {} is not a power of two in [8, 256]", self.input_hw)));
        }
        Ok(())
    }

    pub fn model_name(&self) -> String {
        format!(
            "{}_d{}_w{}_b{}_hw{}_s{}",
            self.family.name(),
            self.depth,
            self.width,
            self.batch_size,
            self.input_hw,
            self.seed
        )
    }
}

struct Builder {
    nodes: Vec<IRNode>,
}

impl Builder {
    fn new(input: Vec<usize>) -> Self {
        let mut node = IRNode::new(0, "input");
        node.out_shape = Some(Shape::new(input).expect("zoo input shape is valid"));
        Builder { nodes: vec![node] }
    }

    fn push(&mut self, kind: OperatorKind, inputs: &[usize], attrs: AttributeMap) -> usize {
        let id = self.nodes.len();
        let mut node = IRNode::new(id, kind.name());
        node.inputs = inputs.to_vec();
        node.attrs = attrs;
        self.nodes.push(node);
        id
    }

    fn conv3x3(&mut self, input: usize, channels: usize, bias: bool) -> usize {
        let attrs = AttributeMap::new()
            .with(Attr::KernelH, 3.0)
            .with(Attr::KernelW, 3.0)
            .with(Attr::StrideH, 1.0)
            .with(Attr::StrideW, 1.0)
            .with(Attr::PadH, 1.0)
            .with(Attr::PadW, 1.0)
            .with(Attr::DilationH, 1.0)
            .with(Attr::DilationW, 1.0)
            .with(Attr::Groups, 1.0)
            .with(Attr::OutFeatures, channels as f64)
            .with(Attr::HasBias, if bias { 1.0 } else { 0.0 });
        self.push(OperatorKind::Conv2d, &[input], attrs)
    }

    fn batchnorm(&mut self, input: usize) -> usize {
        self.push(OperatorKind::BatchNorm, &[input], AttributeMap::new().with(Attr::Epsilon, 1e-5))
    }

    fn relu(&mut self, input: usize) -> usize {
        self.push(OperatorKind::Relu, &[input], AttributeMap::new())
    }

    fn dense(&mut self, input: usize, features: usize) -> usize {
        let attrs = AttributeMap::new().with(Attr::OutFeatures, features as f64).with(Attr::HasBias, 1.0);
        self.push(OperatorKind::Dense, &[input], attrs)
    }

    fn maxpool(&mut self, input: usize, window: usize) -> usize {
        let attrs = AttributeMap::new()
            .with(Attr::KernelH, window as f64)
            .with(Attr::KernelW, window as f64)
            .with(Attr::StrideH, window as f64)
            .with(Attr::StrideW, window as f64);
        self.push(OperatorKind::MaxPool2d, &[input], attrs)
    }
}

/// Builds a zoo graph with all shapes inferred.
///
/// * `mlp`: `depth` x [dense(width), relu]
/// * `vggish`: `depth` x [conv3x3, (batchnorm), relu, maxpool2x2], flatten,
///   dense(4 x width), relu, dense(10); channels double per block up to 4 x width
/// * `resnetish`: conv stem, then `depth` residual blocks
///   [conv, (bn), relu, conv, (bn), add(skip), relu], global pool, flatten, dense(10)
pub fn build_zoo_model(spec: &ZooSpec) -> Result<ComputationGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, hw) = (spec.width, spec.input_hw);
    let mut b = Builder::new(vec![spec.batch_size, 3, hw, hw]);
    let mut x = 0;
    match spec.family {
        ZooFamily::Mlp => {
            for _ in 0..spec.depth {
                x = b.dense(x, w);
                x = b.relu(x);
            }
        }
        ZooFamily::Vggish => {
            let mut extent = hw;
            for block in 0..spec.depth {
                x = b.conv3x3(x, w << block.min(2), true);
                if rng.gen_bool(0.5) {
                    x = b.batchnorm(x);
                }
                x = b.relu(x);
                let window = if extent >= 2 { 2 } else { 1 };
                x = b.maxpool(x, window);
                extent /= window;
            }
            x = b.push(OperatorKind::Reshape, &[x], AttributeMap::new());
            x = b.dense(x, 4 * w);
            x = b.relu(x);
            x = b.dense(x, 10);
        }
        ZooFamily::Resnetish => {
            x = b.conv3x3(x, w, false);
            if rng.gen_bool(0.5) {
                x = b.batchnorm(x);
            }
            x = b.relu(x);
            for _ in 0..spec.depth {
                let skip = x;
                x = b.conv3x3(x, w, false);
                if rng.gen_bool(0.5) {
                    x = b.batchnorm(x);
                }
                x = b.relu(x);
                x = b.conv3x3(x, w, false);
                if rng.gen_bool(0.5) {
                    x = b.batchnorm(x);
                }
                x = b.push(OperatorKind::Add, &[x, skip], AttributeMap::new());
                x = b.relu(x);
            }
            x = b.push(OperatorKind::GlobalAvgPool2d, &[x], AttributeMap::new());
            x = b.push(OperatorKind::Reshape, &[x], AttributeMap::new());
            x = b.dense(x, 10);
        }
    }
    let graph =
        ComputationGraph { name: spec.model_name(), batch_size: spec.batch_size, nodes: b.nodes, outputs: vec![x] };
    graph.validate()?;
    infer_shapes(&graph)
}
