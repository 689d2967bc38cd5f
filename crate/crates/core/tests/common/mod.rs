#![allow(dead_code)]

use dippm::numerics::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde_json::{json, Value};

/// A random shape-consistent DAG document: one input node followed by
/// `1..=max_ops` operators on a common `[b, c, h, w]` shape. Ids are sparse
/// and the node list is shuffled so parsing has to re-sort.
pub fn random_graph_json(rng: &mut Rng, max_ops: usize) -> String {
    let b = rng.gen_range(1..=4);
    let c = rng.gen_range(1..=4);
    let h = rng.gen_range(2..=6);
    let w = rng.gen_range(2..=6);
    let ops = rng.gen_range(1..=max_ops);
    let mut ids: Vec<u64> = Vec::new();
    let mut next = rng.gen_range(0..5u64);
    for _ in 0..=ops {
        ids.push(next);
        next += rng.gen_range(1..4);
    }
    let mut nodes = vec![json!({"id": ids[0], "op": "input", "out_shape": [b, c, h, w]})];
    for i in 1..=ops {
        let choice = rng.gen_range(0..9);
        let mut pick = || ids[rng.gen_range(0..i)];
        let (op, inputs, attrs) = match choice {
            0 => ("relu", vec![pick()], json!({})),
            1 => ("batchnorm", vec![pick()], json!({"epsilon": 1e-5})),
            2 => ("softmax", vec![pick()], json!({})),
            3 => ("layernorm", vec![pick()], json!({"epsilon": 1e-6})),
            4 => ("add", vec![pick(), pick()], json!({})),
            5 => ("multiply", vec![pick(), pick()], json!({})),
            6 => ("gelu", vec![pick()], json!({})),
            7 => ("max_pool2d", vec![pick()], json!({"kernel_h": 1, "kernel_w": 1})),
            _ => {
                let input = pick();
                let k = *[1, 3].choose(rng).unwrap();
                (
                    "conv2d",
                    vec![input],
                    json!({"kernel_h": k, "kernel_w": k, "pad_h": (k - 1) / 2, "pad_w": (k - 1) / 2,
                           "out_features": c, "has_bias": 1}),
                )
            }
        };
        nodes.push(json!({"id": ids[i], "op": op, "inputs": inputs, "attrs": attrs}));
    }
    nodes.shuffle(rng);
    let doc = json!({"name": format!("rand_{}", rng.gen::<u32>()), "batch": b, "outputs": [ids[ops]], "nodes": nodes});
    doc.to_string()
}

/// Random permutation of `0..n`.
pub fn random_perm(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn value(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}
