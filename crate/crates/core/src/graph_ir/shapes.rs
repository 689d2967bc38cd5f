//! Output-shape inference.
//!
//! Nodes that already carry a shape keep it. Windowed operators treat an
//! absent or zero stride, dilation or group count as 1; kernel sizes and
//! `out_features` are required.

use super::{Attr, ComputationGraph, IRNode, OperatorKind, Shape};
use crate::{Error, Result};

/// Fills in every missing `out_shape`. Idempotent.
pub fn infer_shapes(graph: &ComputationGraph) -> Result<ComputationGraph> {
    let mut out = graph.clone();
    for idx in 0..out.nodes.len() {
        if out.nodes[idx].out_shape.is_some() {
            continue;
        }
        let node = &out.nodes[idx];
        if node.inputs.is_empty() {
            return Err(Error::Underspecified { node: idx as u64, reason: "source node without out_shape".into() });
        }
        let inputs: Vec<&[usize]> =
            node.inputs.iter().map(|&i| out.nodes[i].shape().expect("inputs precede consumers")).collect();
        let dims = infer_node(node, &inputs)?;
        let shape = Shape::new(dims).map_err(|reason| Error::BadShape { node: idx as u64, reason })?;
        out.nodes[idx].out_shape = Some(shape);
    }
    Ok(out)
}

/// Window geometry shared by convolutions and pools.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub dilation: (usize, usize),
}

impl Window {
    pub(crate) fn of(node: &IRNode) -> Result<Window> {
        let a = &node.attrs;
        let kernel = match (a.positive(Attr::KernelH), a.positive(Attr::KernelW)) {
            (Some(h), Some(w)) => (h, w),
            _ => {
                return Err(Error::Underspecified {
                    node: node.id as u64,
                    reason: format!("{} needs kernel_h and kernel_w", node.kind),
                })
            }
        };
        Ok(Window {
            kernel,
            stride: (a.or_default(Attr::StrideH, 1), a.or_default(Attr::StrideW, 1)),
            pad: (a.non_negative(Attr::PadH), a.non_negative(Attr::PadW)),
            dilation: (a.or_default(Attr::DilationH, 1), a.or_default(Attr::DilationW, 1)),
        })
    }

    fn forward_extent(node: &IRNode, size: usize, k: usize, s: usize, p: usize, d: usize) -> Result<usize> {
        let span = (size + 2 * p) as i64 - (d * (k - 1)) as i64 - 1;
        if span < 0 {
            return Err(Error::BadShape {
                node: node.id as u64,
                reason: format!("window of {k} (dilation {d}) does not fit extent {size} with pad {p}"),
            });
        }
        Ok(span as usize / s + 1)
    }

    fn transpose_extent(node: &IRNode, size: usize, k: usize, s: usize, p: usize, d: usize) -> Result<usize> {
        let out = ((size - 1) * s + d * (k - 1) + 1) as i64 - 2 * p as i64;
        if out < 1 {
            return Err(Error::BadShape {
                node: node.id as u64,
                reason: format!("transposed window yields extent {out}"),
            });
        }
        Ok(out as usize)
    }

    pub(crate) fn output_hw(&self, node: &IRNode, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            Self::forward_extent(node, h, self.kernel.0, self.stride.0, self.pad.0, self.dilation.0)?,
            Self::forward_extent(node, w, self.kernel.1, self.stride.1, self.pad.1, self.dilation.1)?,
        ))
    }

    pub(crate) fn transpose_hw(&self, node: &IRNode, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            Self::transpose_extent(node, h, self.kernel.0, self.stride.0, self.pad.0, self.dilation.0)?,
            Self::transpose_extent(node, w, self.kernel.1, self.stride.1, self.pad.1, self.dilation.1)?,
        ))
    }
}

fn mismatch(node: &IRNode, what: String) -> Error {
    Error::ShapeMismatch(format!("node {} ({}): {what}", node.id, node.kind))
}

fn expect_rank<'a>(node: &IRNode, shape: &'a [usize], rank: usize) -> Result<&'a [usize]> {
    if shape.len() != rank {
        return Err(mismatch(node, format!("expected rank {rank} input, got {shape:?}")));
    }
    Ok(shape)
}

fn required_features(node: &IRNode) -> Result<usize> {
    node.attrs.positive(Attr::OutFeatures).ok_or_else(|| Error::Underspecified {
        node: node.id as u64,
        reason: format!("{} needs out_features", node.kind),
    })
}

pub(crate) fn groups(node: &IRNode, c_in: usize, c_out: usize) -> Result<usize> {
    let g = node.attrs.or_default(Attr::Groups, 1);
    if !c_in.is_multiple_of(g) || !c_out.is_multiple_of(g) {
        return Err(mismatch(node, format!("groups {g} must divide channels {c_in} and {c_out}")));
    }
    Ok(g)
}

fn infer_node(node: &IRNode, inputs: &[&[usize]]) -> Result<Vec<usize>> {
    let first = inputs[0];
    match node.kind {
        OperatorKind::Conv2d | OperatorKind::Conv2dTranspose => {
            let x = expect_rank(node, first, 4)?;
            let c_out = required_features(node)?;
            groups(node, x[1], c_out)?;
            let window = Window::of(node)?;
            let (h, w) = if node.kind == OperatorKind::Conv2d {
                window.output_hw(node, x[2], x[3])?
            } else {
                window.transpose_hw(node, x[2], x[3])?
            };
            Ok(vec![x[0], c_out, h, w])
        }
        OperatorKind::MaxPool2d | OperatorKind::AvgPool2d => {
            let x = expect_rank(node, first, 4)?;
            let (h, w) = Window::of(node)?.output_hw(node, x[2], x[3])?;
            Ok(vec![x[0], x[1], h, w])
        }
        OperatorKind::GlobalAvgPool2d => {
            let x = expect_rank(node, first, 4)?;
            Ok(vec![x[0], x[1], 1, 1])
        }
        OperatorKind::Dense => {
            if first.len() < 2 {
                return Err(mismatch(node, format!("dense needs a batched input, got {first:?}")));
            }
            Ok(vec![first[0], required_features(node)?])
        }
        OperatorKind::BatchMatmul => {
            if inputs.len() != 2 {
                return Err(mismatch(node, format!("expected 2 inputs, got {}", inputs.len())));
            }
            let a = expect_rank(node, inputs[0], 3)?;
            let b = expect_rank(node, inputs[1], 3)?;
            if a[0] != b[0] || a[2] != b[1] {
                return Err(mismatch(node, format!("cannot multiply {a:?} by {b:?}")));
            }
            Ok(vec![a[0], a[1], b[2]])
        }
        OperatorKind::Add | OperatorKind::Multiply => {
            if let Some(other) = inputs.iter().find(|s| **s != first) {
                return Err(mismatch(node, format!("elementwise inputs {first:?} and {other:?} differ")));
            }
            Ok(first.to_vec())
        }
        OperatorKind::Concat => {
            if first.len() < 2 {
                return Err(mismatch(node, "concat needs a channel dimension".into()));
            }
            let mut dims = first.to_vec();
            for other in &inputs[1..] {
                let same_rest = other.len() == first.len()
                    && other.iter().zip(first).enumerate().all(|(i, (a, b))| i == 1 || a == b);
                if !same_rest {
                    return Err(mismatch(node, format!("cannot concat {first:?} with {other:?}")));
                }
                dims[1] += other[1];
            }
            Ok(dims)
        }
        OperatorKind::Reshape => {
            if first.len() == 1 {
                Ok(first.to_vec())
            } else {
                Ok(vec![first[0], first[1..].iter().product()])
            }
        }
        OperatorKind::Relu
        | OperatorKind::BatchNorm
        | OperatorKind::Softmax
        | OperatorKind::LayerNorm
        | OperatorKind::Other => Ok(first.to_vec()),
    }
}
