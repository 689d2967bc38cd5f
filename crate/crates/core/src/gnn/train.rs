use rand::seq::SliceRandom;

use super::forward::{backward_cached, forward, forward_cached, zero_grads, Mode};
use super::model::{Architecture, DippmModel, Normalizer, DEFAULT_HIDDEN};
use crate::dataset::{mape, DatasetRecord, MapeReport, TargetVector};
use crate::featurize::{create_graph_encoding, static_features};
use crate::graph_ir::ComputationGraph;
use crate::numerics::{adam_step, huber_loss, seeded_rng, AdamState, Matrix, Rng, DEFAULT_LR};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    pub huber_delta: f64,
    /// Reshuffle the training set every epoch.
    pub shuffle: bool,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: DEFAULT_LR,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            huber_delta: 1.0,
            shuffle: true,
            architecture: Architecture::Sage,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.huber_delta.is_finite() && self.huber_delta > 0.0) {
            return Err(Error::InvalidConfig(format!("huber delta {} must be positive", self.huber_delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    /// Overall MAPE of the predictions made while stepping through the epoch.
    pub train_mape: f64,
    /// Overall MAPE in eval mode, `None` without a validation set.
    pub val_mape: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DippmModel,
    pub history: Vec<EpochStats>,
}

struct Optimizer {
    states: Vec<AdamState>,
    grads: Vec<Matrix>,
}

impl Optimizer {
    fn new(model: &DippmModel, lr: f64) -> Self {
        Optimizer {
            states: model.named_params().iter().map(|(_, m)| AdamState::for_param(m, lr)).collect(),
            grads: zero_grads(model),
        }
    }

    /// Forward, backward and one Adam update on a single record. Returns the
    /// loss and the (train-mode) prediction in normalized space.
    fn step(
        &mut self,
        model: &mut DippmModel,
        rec: &DatasetRecord,
        delta: f64,
        rng: &mut Rng,
    ) -> Result<(f64, [f64; 3])> {
        let (y, cache) = forward_cached(model, &rec.encoding, &rec.fs, Mode::Train, rng)?;
        let target = Matrix::row_vector(&model.normalizer.normalize_target(&rec.target));
        let (loss, d_out) = huber_loss(&Matrix::row_vector(&y), &target, delta)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss on `{}`", rec.model_name)));
        }
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
        backward_cached(model, &cache, &d_out, &mut self.grads)?;
        for ((p, g), s) in model.params_mut().into_iter().zip(&self.grads).zip(&mut self.states) {
            adam_step(p, g, s)?;
        }
        Ok((loss, y))
    }
}

/// Trains from a fresh seeded initialization, one Adam step per record.
/// `on_epoch` sees every epoch's statistics as they are produced.
pub fn train_with(
    train: &[DatasetRecord],
    val: &[DatasetRecord],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seeded_rng(config.seed);
    let mut model = DippmModel::new(config.architecture, config.hidden, &mut rng)?;
    model.normalizer = Normalizer::fit(train)?;
    let mut opt = Optimizer::new(&model, config.lr);
    let actuals: Vec<TargetVector> = train.iter().map(|r| r.target).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut preds = vec![TargetVector::new(0.0, 0.0, 0.0); train.len()];
        let mut loss_sum = 0.0;
        for &i in &order {
            let (loss, y) = opt.step(&mut model, &train[i], config.huber_delta, &mut rng)?;
            loss_sum += loss;
            preds[i] = model.normalizer.denormalize_target(y);
        }
        if !model.flat_params().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("parameters diverged in epoch {epoch}")));
        }
        let train_mape = finite_overall(&preds, &actuals, epoch)?;
        let val_mape = if val.is_empty() { None } else { Some(evaluate(&model, val)?.overall) };
        let stats = EpochStats { epoch, loss: loss_sum / train.len() as f64, train_mape, val_mape };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { model, history })
}

fn finite_overall(preds: &[TargetVector], actuals: &[TargetVector], epoch: usize) -> Result<f64> {
    let m = mape(preds, actuals)?.overall;
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("train MAPE in epoch {epoch}")));
    }
    Ok(m)
}

pub fn train(train: &[DatasetRecord], val: &[DatasetRecord], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(train, val, config, |_| {})
}

/// Same budget and seed, static features only.
pub fn train_baseline(train: &[DatasetRecord], val: &[DatasetRecord], config: &TrainConfig) -> Result<TrainOutcome> {
    let config = TrainConfig { architecture: Architecture::Mlp, ..config.clone() };
    self::train(train, val, &config)
}

/// Eval-mode prediction for one featurized record.
pub fn predict_record(model: &DippmModel, record: &DatasetRecord) -> Result<TargetVector> {
    // eval mode draws nothing from the rng
    let mut rng = seeded_rng(0);
    let z = forward(model, &record.encoding, &record.fs, Mode::Eval, &mut rng)?;
    let y = model.normalizer.denormalize_target(z);
    if !y.as_array().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("prediction".into()));
    }
    Ok(y)
}

/// Eval-mode prediction for a graph.
pub fn predict(model: &DippmModel, graph: &ComputationGraph) -> Result<TargetVector> {
    let record = DatasetRecord {
        model_name: graph.name.clone(),
        encoding: create_graph_encoding(graph)?,
        fs: static_features(graph)?,
        target: TargetVector::new(1.0, 1.0, 1.0),
    };
    predict_record(model, &record)
}

pub fn evaluate(model: &DippmModel, records: &[DatasetRecord]) -> Result<MapeReport> {
    let preds = records.iter().map(|r| predict_record(model, r)).collect::<Result<Vec<_>>>()?;
    let actuals: Vec<TargetVector> = records.iter().map(|r| r.target).collect();
    mape(&preds, &actuals)
}
