//! The predictor: three graphSAGE blocks, a mean readout joined with the
//! static features, and three fully connected blocks producing
//! (latency, memory, energy).

mod forward;
mod io;
mod model;
mod train;

pub use forward::{backward, forward, readout_mean, sage_forward, zero_grads, Mode};
pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use model::{
    Architecture, DenseLayer, DippmModel, Normalizer, SageLayer, DEFAULT_DROPOUT, DEFAULT_HIDDEN, FC_BLOCKS,
    SAGE_BLOCKS, TARGETS,
};
pub use train::{
    evaluate, predict, predict_record, train, train_baseline, train_with, EpochStats, TrainConfig, TrainOutcome,
};
