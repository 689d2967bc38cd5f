//! Graph JSON interchange:
//!
//! ```text
//! {"name": str, "batch": int, "outputs": [int],
//!  "nodes": [{"id": int, "op": str, "inputs": [int],
//!             "attrs": {str: number}, "out_shape": [int]}]}
//! ```

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{infer_shapes, AttributeMap, ComputationGraph, IRNode, OperatorKind, Shape};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    #[serde(default)]
    name: String,
    #[serde(default = "one")]
    batch: i64,
    outputs: Vec<u64>,
    nodes: Vec<NodeDoc>,
}

fn one() -> i64 {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u64,
    op: String,
    #[serde(default)]
    inputs: Vec<u64>,
    #[serde(default, serialize_with = "write_attrs")]
    attrs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_shape: Option<Vec<i64>>,
}

/// Whole-valued attributes are written as JSON integers.
fn write_attrs<S: Serializer>(attrs: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(attrs.len()))?;
    for (k, &v) in attrs {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            map.serialize_entry(k, &(v as i64))?;
        } else {
            map.serialize_entry(k, &v)?;
        }
    }
    map.end()
}

/// Parses and validates a graph document.
///
/// Ids may be any unique non-negative integers in any order; the returned
/// graph is renumbered `0..N` in a stable topological order (ties keep
/// document order). Missing derived shapes are inferred.
pub fn parse_graph_json(text: &str) -> Result<ComputationGraph> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    if doc.batch < 1 {
        return Err(Error::MalformedDocument(format!("batch must be positive, got {}", doc.batch)));
    }
    if doc.outputs.is_empty() {
        return Err(Error::MalformedDocument("graph declares no outputs".into()));
    }

    let mut position: HashMap<u64, usize> = HashMap::with_capacity(doc.nodes.len());
    for (pos, node) in doc.nodes.iter().enumerate() {
        if position.insert(node.id, pos).is_some() {
            return Err(Error::MalformedDocument(format!("duplicate node id {}", node.id)));
        }
    }
    for node in &doc.nodes {
        for input in &node.inputs {
            if !position.contains_key(input) {
                return Err(Error::DanglingReference { node: node.id, missing: *input });
            }
        }
    }
    for out in &doc.outputs {
        if !position.contains_key(out) {
            return Err(Error::MalformedDocument(format!("output id {out} does not exist")));
        }
    }

    let order = topological_order(&doc.nodes, &position)?;
    let mut new_id = vec![0usize; doc.nodes.len()];
    for (new, &old_pos) in order.iter().enumerate() {
        new_id[old_pos] = new;
    }

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (new, &old_pos) in order.iter().enumerate() {
        let src = &doc.nodes[old_pos];
        let out_shape = match &src.out_shape {
            None => None,
            Some(dims) => Some(parse_shape(src.id, dims)?),
        };
        let mut attrs = AttributeMap::new();
        for (k, &v) in &src.attrs {
            if !v.is_finite() {
                return Err(Error::MalformedDocument(format!("attribute `{k}` on node {} is not finite", src.id)));
            }
            attrs.insert_raw(k.clone(), v);
        }
        nodes.push(IRNode {
            id: new,
            kind: OperatorKind::from_name(&src.op),
            raw_name: src.op.clone(),
            attrs,
            out_shape,
            inputs: src.inputs.iter().map(|i| new_id[position[i]]).collect(),
        });
    }

    let graph = ComputationGraph {
        name: doc.name,
        batch_size: doc.batch as usize,
        nodes,
        outputs: doc.outputs.iter().map(|o| new_id[position[o]]).collect(),
    };
    graph.validate()?;
    infer_shapes(&graph)
}

fn parse_shape(node: u64, dims: &[i64]) -> Result<Shape> {
    if dims.iter().any(|&d| d < 1) {
        return Err(Error::BadShape { node, reason: format!("non-positive dimension in {dims:?}") });
    }
    Shape::new(dims.iter().map(|&d| d as usize).collect()).map_err(|reason| Error::BadShape { node, reason })
}

/// Kahn's algorithm, always releasing the earliest ready node in document
/// order so already-sorted documents keep their order.
fn topological_order(nodes: &[NodeDoc], position: &HashMap<u64, usize>) -> Result<Vec<usize>> {
    let n = nodes.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (pos, node) in nodes.iter().enumerate() {
        for input in &node.inputs {
            let src = position[input];
            indegree[pos] += 1;
            consumers[src].push(pos);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&p| indegree[p] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(pos)) = ready.pop() {
        order.push(pos);
        for &c in &consumers[pos] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&p| indegree[p] > 0).unwrap_or(0);
        return Err(Error::CyclicGraph(nodes[stuck].id));
    }
    Ok(order)
}

/// Serializes a graph as a compact single-line document. Every node carries
/// its `inputs`, `attrs` and (when known) `out_shape`.
pub fn to_graph_json(graph: &ComputationGraph) -> String {
    let doc = GraphDoc {
        name: graph.name.clone(),
        batch: graph.batch_size as i64,
        outputs: graph.outputs.iter().map(|&o| o as u64).collect(),
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.id as u64,
                op: n.raw_name.clone(),
                inputs: n.inputs.iter().map(|&i| i as u64).collect(),
                attrs: n.attrs.iter().map(|(k, v)| (k.to_string(), v)).collect(),
                out_shape: n.out_shape.as_ref().map(|s| s.dims().iter().map(|&d| d as i64).collect()),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("graph document serializes")
}
