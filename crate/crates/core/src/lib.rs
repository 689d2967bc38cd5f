//! Inference cost prediction from computation graphs.
//!
//! A graph ([`graph_ir::ComputationGraph`]) is featurized into a node
//! feature matrix, an edge list and five static features
//! ([`featurize`]). A graphSAGE regressor ([`gnn`]) maps those to latency
//! (ms), memory (MB) and energy (J), and [`mig::mig_profile`] turns the
//! memory prediction into an A100 MIG profile. Training data comes from a
//! deterministic synthetic oracle ([`dataset`]).
//!
//! ```
//! use dippm::dataset::{synth_dataset, FamilyMix};
//! use dippm::gnn::{predict_record, train, TrainConfig};
//! use dippm::mig::mig_profile;
//!
//! let data = synth_dataset(12, &FamilyMix::uniform(), 7)?;
//! let config = TrainConfig { epochs: 2, hidden: 16, seed: 1, ..TrainConfig::default() };
//! let model = train(&data[..8], &data[8..], &config)?.model;
//! let y = predict_record(&model, &data[0])?;
//! assert!(y.latency_ms > 0.0);
//! let _profile = mig_profile(y.memory_mb)?;
//! # Ok::<(), dippm::Error>(())
//! ```

pub mod cli;
pub mod dataset;
mod error;
pub mod featurize;
pub mod gnn;
pub mod graph_ir;
pub mod mig;
pub mod numerics;

pub use error::{Error, Result};

/// Guide chapters, compiled and run as doc-tests so the book stays in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graph-ir.md")]
    mod graph_ir {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/mig.md")]
    mod mig {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
