//! Model file: a single JSON object.
//!
//! ```text
//! {"vocab_version": "v1", "hidden": 512, "dropout_p": 0.05,
//!  "normalizer": {"target_mean": [..3], "target_std": [..3],
//!                 "static_mean": [..5], "static_std": [..5]},
//!  "params": {"fc0.bias": {"rows": 1, "cols": 512, "data": [...]}, ...}}
//! ```
//!
//! The architecture is implied by the presence of `sage0.w_self`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, DippmModel, Normalizer, TARGETS};
use crate::featurize::STATIC_WIDTH;
use crate::graph_ir::VOCAB_VERSION;
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizerDoc {
    target_mean: [f64; TARGETS],
    target_std: [f64; TARGETS],
    static_mean: [f64; STATIC_WIDTH],
    static_std: [f64; STATIC_WIDTH],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    vocab_version: String,
    hidden: usize,
    dropout_p: f64,
    normalizer: NormalizerDoc,
    params: BTreeMap<String, ParamDoc>,
}

#[derive(Deserialize)]
struct VersionProbe {
    vocab_version: String,
}

pub fn model_to_json(model: &DippmModel) -> String {
    let n = &model.normalizer;
    let doc = ModelDoc {
        vocab_version: model.vocab_version.clone(),
        hidden: model.hidden,
        dropout_p: model.dropout_p,
        normalizer: NormalizerDoc {
            target_mean: n.target_mean,
            target_std: n.target_std,
            static_mean: n.static_mean,
            static_std: n.static_std,
        },
        params: model
            .named_params()
            .into_iter()
            .map(|(name, m)| (name, ParamDoc { rows: m.rows(), cols: m.cols(), data: m.data().to_vec() }))
            .collect(),
    };
    serde_json::to_string(&doc).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<DippmModel> {
    let corrupt = |msg: String| Error::IoFailure(format!("corrupt model file: {msg}"));
    // version first, so a future layout reports the mismatch rather than a parse error
    if let Ok(probe) = serde_json::from_str::<VersionProbe>(text) {
        if probe.vocab_version != VOCAB_VERSION {
            return Err(Error::VersionMismatch { found: probe.vocab_version, expected: VOCAB_VERSION.to_string() });
        }
    }
    let mut doc: ModelDoc = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    if doc.hidden == 0 {
        return Err(corrupt("hidden width 0".into()));
    }
    if !(0.0..1.0).contains(&doc.dropout_p) {
        return Err(corrupt(format!("dropout_p {}", doc.dropout_p)));
    }
    let arch = if doc.params.contains_key("sage0.w_self") { Architecture::Sage } else { Architecture::Mlp };
    let mut model = DippmModel::zeros(arch, doc.hidden);
    model.dropout_p = doc.dropout_p;
    let n = &doc.normalizer;
    model.normalizer = Normalizer {
        target_mean: n.target_mean,
        target_std: n.target_std,
        static_mean: n.static_mean,
        static_std: n.static_std,
    };
    model.normalizer.validate().map_err(|e| corrupt(e.to_string()))?;

    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(model.params_mut()) {
        let p = doc.params.remove(name).ok_or_else(|| corrupt(format!("missing parameter `{name}`")))?;
        if (p.rows, p.cols) != (slot.rows(), slot.cols()) || p.data.len() != p.rows * p.cols {
            return Err(corrupt(format!(
                "`{name}` is {}x{} with {} values, expected {}x{}",
                p.rows,
                p.cols,
                p.data.len(),
                slot.rows(),
                slot.cols()
            )));
        }
        *slot = Matrix::from_vec(p.rows, p.cols, p.data).map_err(|e| corrupt(e.to_string()))?;
    }
    if let Some(extra) = doc.params.keys().next() {
        return Err(corrupt(format!("unexpected parameter `{extra}`")));
    }
    if !model.flat_params().iter().all(|v| v.is_finite()) {
        return Err(corrupt("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &DippmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::IoFailure(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DippmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::IoFailure(format!("{}: {e}", path.display())))?;
    model_from_json(&text)
}
