//! Closed-form stand-in for hardware measurements.
//!
//! ```text
//! latency_ms = 0.05 * N_op + MACs / 1e8 + 0.2 * depth
//! memory_mb  = 600 + 4 * (params + peak_activation) / 2^20
//! energy_j   = 0.25 * latency_ms * (1 + MACs / 1e9)
//! ```
//!
//! `depth` is the number of edges on the longest path of the operator
//! graph, so two graphs with equal static features can still differ in
//! latency.

use super::TargetVector;
use crate::featurize::{compute_macs, create_graph_encoding, GraphEncoding};
use crate::graph_ir::{conv_groups, Attr, ComputationGraph, IRNode, OperatorKind};
use crate::Result;

/// Longest path, in edges, of an encoding whose edges point from lower to
/// higher row index (true for every encoding built by this crate).
pub fn longest_path(enc: &GraphEncoding) -> usize {
    let mut dist = vec![0usize; enc.num_nodes];
    let mut edges = enc.edges.clone();
    edges.sort_unstable_by_key(|&(s, d)| (d, s));
    for (s, d) in edges {
        debug_assert!(s < d, "encoding rows are topologically ordered");
        dist[d] = dist[d].max(dist[s] + 1);
    }
    dist.into_iter().max().unwrap_or(0)
}

fn weight_elements(graph: &ComputationGraph, node: &IRNode) -> Result<u128> {
    let input = || node.inputs.first().and_then(|&i| graph.nodes[i].shape());
    let (x, y) = match (input(), node.shape()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok(0),
    };
    let k = || node.attrs.get(Attr::KernelH).max(1.0) as u128 * node.attrs.get(Attr::KernelW).max(1.0) as u128;
    Ok(match node.kind {
        OperatorKind::Conv2d if x.len() == 4 && y.len() == 4 => {
            let g = conv_groups(node, x[1], y[1])?;
            y[1] as u128 * (x[1] / g) as u128 * k()
        }
        OperatorKind::Conv2dTranspose if x.len() == 4 && y.len() == 4 => {
            let g = conv_groups(node, x[1], y[1])?;
            x[1] as u128 * (y[1] / g) as u128 * k()
        }
        OperatorKind::Dense => {
            let fan_in: u128 = x[1..].iter().map(|&d| d as u128).product();
            fan_in * y[y.len() - 1] as u128
        }
        _ => 0,
    })
}

pub fn oracle_labels(graph: &ComputationGraph) -> Result<TargetVector> {
    let enc = create_graph_encoding(graph)?;
    let macs = compute_macs(graph)? as f64;
    let n_op = enc.num_nodes as f64;
    let depth = longest_path(&enc) as f64;
    let mut params: u128 = 0;
    let mut peak: u128 = 0;
    for node in &graph.nodes {
        if node.is_operator() {
            params += weight_elements(graph, node)?;
        }
        peak = peak.max(node.out_shape.as_ref().map_or(0, |s| s.numel()));
    }
    let latency_ms = 0.05 * n_op + macs / 1e8 + 0.2 * depth;
    let memory_mb = 600.0 + 4.0 * (params + peak) as f64 / (1u64 << 20) as f64;
    let energy_j = 0.25 * latency_ms * (1.0 + macs / 1e9);
    Ok(TargetVector { latency_ms, memory_mb, energy_j })
}
