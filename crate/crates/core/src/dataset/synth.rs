use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{oracle_labels, DatasetRecord};
use crate::featurize::{create_graph_encoding, static_features};
use crate::graph_ir::{build_zoo_model, ComputationGraph, ZooFamily, ZooSpec};
use crate::numerics::seeded_rng;
use crate::{Error, Result};

/// Relative sampling weights per zoo family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMix(Vec<(ZooFamily, f64)>);

impl FamilyMix {
    pub fn new(weights: Vec<(ZooFamily, f64)>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpec("family mix is empty".into()));
        }
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) || weights.iter().all(|(_, w)| *w == 0.0) {
            return Err(Error::InvalidSpec("family weights must be non-negative and not all zero".into()));
        }
        Ok(FamilyMix(weights))
    }

    pub fn uniform() -> Self {
        FamilyMix(ZooFamily::ALL.iter().map(|&f| (f, 1.0)).collect())
    }

    pub fn weights(&self) -> &[(ZooFamily, f64)] {
        &self.0
    }

    fn sample(&self, rng: &mut crate::numerics::Rng) -> ZooFamily {
        let total: f64 = self.0.iter().map(|(_, w)| w).sum();
        let mut x = rng.gen::<f64>() * total;
        for &(f, w) in &self.0 {
            if x < w {
                return f;
            }
            x -= w;
        }
        self.0.iter().rev().find(|(_, w)| *w > 0.0).expect("validated").0
    }
}

impl Default for FamilyMix {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Parses `mlp,vggish` (equal weights) or `mlp:0.5,resnetish:2`.
impl FromStr for FamilyMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut weights = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, weight) = match part.split_once(':') {
                Some((n, w)) => {
                    let w: f64 = w.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad weight in `{part}`")))?;
                    (n, w)
                }
                None => (part, 1.0),
            };
            let family =
                ZooFamily::from_name(name).ok_or_else(|| Error::InvalidSpec(format!("unknown family `{name}`")))?;
            weights.push((family, weight));
        }
        FamilyMix::new(weights)
    }
}

impl fmt::Display for FamilyMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(fam, w)| format!("{}:{w}", fam.name())).collect();
        f.write_str(&parts.join(","))
    }
}

/// Featurizes and labels one graph.
pub fn make_record(graph: &ComputationGraph) -> Result<DatasetRecord> {
    Ok(DatasetRecord {
        model_name: graph.name.clone(),
        encoding: create_graph_encoding(graph)?,
        fs: static_features(graph)?,
        target: oracle_labels(graph)?,
    })
}

fn sample_spec(family: ZooFamily, rng: &mut crate::numerics::Rng) -> ZooSpec {
    let max_depth = match family {
        ZooFamily::Mlp => 6,
        ZooFamily::Vggish => 5,
        ZooFamily::Resnetish => 4,
    };
    ZooSpec {
        family,
        depth: rng.gen_range(1..=max_depth),
        width: *[4, 8, 16, 32].choose(rng).expect("non-empty"),
        batch_size: *[1, 2, 4, 8, 16].choose(rng).expect("non-empty"),
        input_hw: *[8, 16, 32].choose(rng).expect("non-empty"),
        seed: rng.gen(),
    }
}

/// `n` labelled zoo graphs, deterministic in `seed`.
pub fn synth_dataset(n: usize, mix: &FamilyMix, seed: u64) -> Result<Vec<DatasetRecord>> {
    if n == 0 {
        return Err(Error::InvalidSpec("dataset size must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let specs: Vec<ZooSpec> = (0..n)
        .map(|_| {
            let family = mix.sample(&mut rng);
            sample_spec(family, &mut rng)
        })
        .collect();
    specs.iter().map(|s| make_record(&build_zoo_model(s)?)).collect()
}
