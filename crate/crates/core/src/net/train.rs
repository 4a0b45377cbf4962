use rand::seq::SliceRandom;

use super::backward::{backward, sequence_loss};
use super::params::{sgd_step, NetParams};
use super::{NetConfig, NetError};
use crate::dataset::DatasetSplit;
use crate::rng::{self, Stream};

/// Losses of one finished epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// 1-based epoch with the lowest validation loss (earliest on ties).
    pub selected_epoch: usize,
    pub selected_params: NetParams,
}

impl TrainReport {
    pub fn epochs(&self) -> impl Iterator<Item = EpochStats> + '_ {
        self.train_loss
            .iter()
            .zip(&self.validation_loss)
            .enumerate()
            .map(|(i, (&train_loss, &validation_loss))| EpochStats { epoch: i + 1, train_loss, validation_loss })
    }
}

/// Mean per-trajectory inference loss.
pub fn dataset_loss(p: &NetParams, data: &[crate::dataset::LabeledTrajectory]) -> f64 {
    data.iter().map(|t| sequence_loss(p, &t.inputs(), &t.labels())).sum::<f64>() / data.len() as f64
}

pub fn train(config: &NetConfig, split: &DatasetSplit) -> Result<TrainReport, NetError> {
    train_with(config, split, |_| {})
}

/// Per-trajectory SGD over shuffled training data, keeping the parameters
/// of the epoch with the lowest validation loss. `on_epoch` sees each
/// epoch's losses as they are produced.
pub fn train_with(
    config: &NetConfig,
    split: &DatasetSplit,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport, NetError> {
    config.validate()?;
    if config.epochs == 0 {
        return Err(NetError::Config("epochs must be at least 1".into()));
    }
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(NetError::Config("training and validation sets must be non-empty".into()));
    }
    for t in split.train.iter().chain(&split.validation) {
        if let Some(s) = t.steps.iter().find(|s| s.x.len() != config.input_dim) {
            return Err(NetError::Shape(format!("step of width {} for input dim {}", s.x.len(), config.input_dim)));
        }
        if let Some(l) = t.labels().into_iter().find(|l| l.0 >= config.class_dim) {
            return Err(NetError::Shape(format!("label {l} for {} classes", config.class_dim)));
        }
    }

    let mut params = NetParams::init(config.into(), &mut rng::stream(config.seed, Stream::Init));
    let mut shuffle = rng::stream(config.seed, Stream::Shuffle);
    let mut dropout = rng::stream(config.seed, Stream::Dropout);
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        validation_loss: Vec::with_capacity(config.epochs),
        selected_epoch: 0,
        selected_params: params.clone(),
    };
    let mut best = f64::INFINITY;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for &i in &order {
            let t = &split.train[i];
            let g = backward(&params, &t.inputs(), &t.labels(), config.dropout_rate, &mut dropout);
            if !g.loss.is_finite() {
                return Err(NetError::Diverged { epoch });
            }
            total += g.loss;
            sgd_step(&mut params, &g.grad, config.learning_rate).map_err(|e| match e {
                NetError::NonFinite(_) => NetError::Diverged { epoch },
                e => e,
            })?;
        }
        let train_loss = total / order.len() as f64;
        let validation_loss = dataset_loss(&params, &split.validation);
        if !validation_loss.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        report.train_loss.push(train_loss);
        report.validation_loss.push(validation_loss);
        if validation_loss < best {
            best = validation_loss;
            report.selected_epoch = epoch;
            report.selected_params = params.clone();
        }
        on_epoch(&EpochStats { epoch, train_loss, validation_loss });
    }
    Ok(report)
}
