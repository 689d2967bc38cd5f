//! Node features, adjacency and graph-level static features.
//!
//! Each operator becomes a 32-wide row:
//!
//! | slots    | content                                              |
//! |----------|------------------------------------------------------|
//! | 0..=15   | one-hot [`OperatorKind`]                             |
//! | 16..=27  | attributes in [`Attr::ALL`] order                    |
//! | 28..=31  | output shape N, C, H, W (missing ranks are 0)        |
//!
//! Attribute and shape slots hold `ln(1 + v)`, except `has_bias` (0/1) and
//! `epsilon` (raw).

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph_ir::{conv_groups as groups_of, Attr, ComputationGraph, IRNode, OperatorKind, Window};
use crate::numerics::Matrix;
use crate::{Error, Result};

pub const FEATURE_WIDTH: usize = 32;
pub const ATTR_OFFSET: usize = OperatorKind::COUNT;
pub const SHAPE_OFFSET: usize = ATTR_OFFSET + Attr::ALL.len();
pub const STATIC_WIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFeatureVector(pub [f64; FEATURE_WIDTH]);

/// Adjacency (producer -> consumer edge list) plus the node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoding {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
}

impl GraphEncoding {
    /// Checks the edge and row-count invariants.
    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.num_nodes || self.features.cols() != FEATURE_WIDTH {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix is {}x{}, expected {}x{FEATURE_WIDTH}",
                self.features.rows(),
                self.features.cols(),
                self.num_nodes
            )));
        }
        let mut seen = BTreeSet::new();
        for &(s, d) in &self.edges {
            if s >= self.num_nodes || d >= self.num_nodes {
                return Err(Error::ShapeMismatch(format!("edge ({s}, {d}) out of range")));
            }
            if s == d {
                return Err(Error::ShapeMismatch(format!("self-loop on {s}")));
            }
            if !seen.insert((s, d)) {
                return Err(Error::ShapeMismatch(format!("duplicate edge ({s}, {d})")));
            }
        }
        Ok(())
    }

    /// Relabels node `i` as `perm[i]`, moving rows and remapping edges.
    pub fn permuted(&self, perm: &[usize]) -> GraphEncoding {
        assert_eq!(perm.len(), self.num_nodes);
        let mut features = Matrix::zeros(self.num_nodes, FEATURE_WIDTH);
        for (old, &new) in perm.iter().enumerate() {
            features.row_mut(new).copy_from_slice(self.features.row(old));
        }
        let mut edges: Vec<_> = self.edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
        edges.sort_unstable();
        GraphEncoding { num_nodes: self.num_nodes, edges, features }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StaticFeatures {
    pub macs: u64,
    pub batch: u64,
    pub t_conv: u64,
    pub t_dense: u64,
    pub t_relu: u64,
}

impl StaticFeatures {
    /// `ln(1 + x)` of (macs, batch, #conv, #dense, #relu).
    pub fn as_vector(&self) -> [f64; STATIC_WIDTH] {
        [self.macs, self.batch, self.t_conv, self.t_dense, self.t_relu].map(|v| (v as f64).ln_1p())
    }
}

/// Operator node ids in DFS post-order.
///
/// The walk starts at the first declared output, then the remaining
/// outputs, then any node not yet reached (ascending id). Inputs are
/// visited in the order the consumer lists them. Data nodes are skipped.
pub fn filter_and_preprocess(graph: &ComputationGraph) -> Result<Vec<usize>> {
    let n = graph.len();
    let mut visited = vec![false; n];
    let mut order = Vec::new();
    let roots = graph.outputs.iter().copied().chain(0..n);
    for root in roots {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(top) = stack.last_mut() {
            let (node, next) = *top;
            let inputs = &graph.nodes[node].inputs;
            if next < inputs.len() {
                top.1 += 1;
                let child = inputs[next];
                if !visited[child] {
                    visited[child] = true;
                    stack.push((child, 0));
                }
            } else {
                stack.pop();
                if graph.nodes[node].is_operator() {
                    order.push(node);
                }
            }
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(order)
}

fn log_slot(v: f64) -> f64 {
    v.max(0.0).ln_1p()
}

pub fn encode_node(node: &IRNode) -> NodeFeatureVector {
    let mut slots = [0.0; FEATURE_WIDTH];
    slots[node.kind.index()] = 1.0;
    for (i, attr) in Attr::ALL.iter().enumerate() {
        let raw = node.attrs.get(*attr);
        slots[ATTR_OFFSET + i] = match attr {
            Attr::HasBias => {
                if raw > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Attr::Epsilon => raw,
            _ => log_slot(raw),
        };
    }
    if let Some(dims) = node.shape() {
        for (i, &d) in dims.iter().enumerate() {
            slots[SHAPE_OFFSET + i] = log_slot(d as f64);
        }
    }
    NodeFeatureVector(slots)
}

/// Producer operators feeding `node`, looking through data nodes.
fn operator_producers(graph: &ComputationGraph, node: usize, cache: &mut HashMap<usize, Vec<usize>>) -> Vec<usize> {
    let mut out = Vec::new();
    for &input in &graph.nodes[node].inputs {
        if graph.nodes[input].is_operator() {
            out.push(input);
        } else {
            if !cache.contains_key(&input) {
                let through = operator_producers(graph, input, cache);
                cache.insert(input, through);
            }
            out.extend_from_slice(&cache[&input]);
        }
    }
    out
}

/// One row per operator (in [`filter_and_preprocess`] order) and one
/// producer -> consumer edge per retained dependency, sorted and deduplicated.
pub fn create_graph_encoding(graph: &ComputationGraph) -> Result<GraphEncoding> {
    let order = filter_and_preprocess(graph)?;
    let position: HashMap<usize, usize> = order.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let mut features = Matrix::zeros(order.len(), FEATURE_WIDTH);
    let mut edges = BTreeSet::new();
    let mut cache = HashMap::new();
    for (row, &id) in order.iter().enumerate() {
        features.row_mut(row).copy_from_slice(&encode_node(&graph.nodes[id]).0);
        for producer in operator_producers(graph, id, &mut cache) {
            edges.insert((position[&producer], row));
        }
    }
    Ok(GraphEncoding { num_nodes: order.len(), edges: edges.into_iter().collect(), features })
}

fn input_shape<'g>(graph: &'g ComputationGraph, node: &IRNode, slot: usize) -> Result<&'g [usize]> {
    node.inputs
        .get(slot)
        .and_then(|&i| graph.nodes[i].shape())
        .ok_or_else(|| Error::Underspecified { node: node.id as u64, reason: format!("input {slot} shape unknown") })
}

fn own_shape(node: &IRNode) -> Result<&[usize]> {
    node.shape().ok_or_else(|| Error::Underspecified { node: node.id as u64, reason: "output shape unknown".into() })
}

fn rank4(node: &IRNode, s: &[usize]) -> Result<()> {
    if s.len() != 4 {
        return Err(Error::Underspecified { node: node.id as u64, reason: format!("expected NCHW, got {s:?}") });
    }
    Ok(())
}

/// Multiply-accumulates of one node; zero for kinds that are not counted.
pub fn node_macs(graph: &ComputationGraph, node: &IRNode) -> Result<u128> {
    if node.is_data() {
        return Ok(0);
    }
    let u = |v: usize| v as u128;
    match node.kind {
        OperatorKind::Conv2d => {
            let x = input_shape(graph, node, 0)?;
            let y = own_shape(node)?;
            rank4(node, x)?;
            rank4(node, y)?;
            let w = Window::of(node)?;
            let g = groups_of(node, x[1], y[1])?;
            Ok(u(y[0]) * u(y[1]) * u(y[2]) * u(y[3]) * u(x[1] / g) * u(w.kernel.0) * u(w.kernel.1))
        }
        OperatorKind::Conv2dTranspose => {
            let x = input_shape(graph, node, 0)?;
            let y = own_shape(node)?;
            rank4(node, x)?;
            rank4(node, y)?;
            let w = Window::of(node)?;
            let g = groups_of(node, x[1], y[1])?;
            Ok(u(x[0]) * u(x[1]) * u(x[2]) * u(x[3]) * u(y[1] / g) * u(w.kernel.0) * u(w.kernel.1))
        }
        OperatorKind::Dense => {
            let x = input_shape(graph, node, 0)?;
            let y = own_shape(node)?;
            let in_features: u128 = x[1..].iter().map(|&d| u(d)).product();
            Ok(u(x[0]) * in_features * u(y[y.len() - 1]))
        }
        OperatorKind::BatchMatmul => {
            let a = input_shape(graph, node, 0)?;
            let b = input_shape(graph, node, 1)?;
            if a.len() != 3 || b.len() != 3 {
                return Err(Error::Underspecified {
                    node: node.id as u64,
                    reason: "batch_matmul needs rank-3 inputs".into(),
                });
            }
            Ok(u(a[0]) * u(a[1]) * u(b[2]) * u(a[2]))
        }
        _ => Ok(0),
    }
}

/// Total MACs over conv2d, conv2d_transpose, dense and batch_matmul nodes.
pub fn compute_macs(graph: &ComputationGraph) -> Result<u64> {
    let mut total: u128 = 0;
    for node in &graph.nodes {
        total += node_macs(graph, node)?;
    }
    u64::try_from(total).map_err(|_| Error::NonFinite(format!("MAC count {total} overflows u64")))
}

pub fn static_features(graph: &ComputationGraph) -> Result<StaticFeatures> {
    let count = |kind: OperatorKind| graph.nodes.iter().filter(|n| n.is_operator() && n.kind == kind).count() as u64;
    Ok(StaticFeatures {
        macs: compute_macs(graph)?,
        batch: graph.batch_size as u64,
        t_conv: count(OperatorKind::Conv2d),
        t_dense: count(OperatorKind::Dense),
        t_relu: count(OperatorKind::Relu),
    })
}
