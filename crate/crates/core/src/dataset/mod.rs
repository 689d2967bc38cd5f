//! Training records, the synthetic cost oracle, splitting, MAPE and the
//! JSON-Lines dataset format.

mod jsonl;
mod metrics;
mod oracle;
mod split;
mod synth;

pub use jsonl::{parse_record_line, read_dataset, record_to_line, write_dataset};
pub use metrics::{mape, MapeReport};
pub use oracle::{longest_path, oracle_labels};
pub use split::{split, SplitSpec};
pub use synth::{make_record, synth_dataset, FamilyMix};

use serde::{Deserialize, Serialize};

use crate::featurize::{GraphEncoding, StaticFeatures};
use crate::{Error, Result};

/// Measured (or oracle) cost of one inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetVector {
    pub latency_ms: f64,
    pub memory_mb: f64,
    pub energy_j: f64,
}

impl TargetVector {
    pub const NAMES: [&'static str; 3] = ["latency", "memory", "energy"];

    pub fn new(latency_ms: f64, memory_mb: f64, energy_j: f64) -> Self {
        TargetVector { latency_ms, memory_mb, energy_j }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.latency_ms, self.memory_mb, self.energy_j]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        TargetVector { latency_ms: v[0], memory_mb: v[1], energy_j: v[2] }
    }

    /// All components finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.as_array()) {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonFinite(format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(())
    }
}

/// One sample: features of a graph and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub model_name: String,
    pub encoding: GraphEncoding,
    pub fs: StaticFeatures,
    pub target: TargetVector,
}
