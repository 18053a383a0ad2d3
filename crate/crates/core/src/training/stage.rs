use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::schedule::{EarlyStopping, PlateauSchedule};
use crate::error::{Error, Result};
use crate::model::Network;
use crate::numerics::{AdamState, Tape};

/// What happened during one call to [`train_stage`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Mean training loss of each epoch.
    pub train_losses: Vec<f64>,
    /// Validation loss after each epoch.
    pub val_losses: Vec<f64>,
    /// Learning rate used during each epoch.
    pub learning_rates: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl StageRecord {
    pub fn epochs(&self) -> usize {
        self.val_losses.len()
    }
}

/// Mean squared error of `net` over a whole dataset.
pub fn dataset_loss<N: Network>(net: &N, data: &Dataset) -> Result<f64> {
    let (inputs, target) = data.all()?;
    let mut tape = Tape::new();
    let xs: Vec<_> = inputs.iter().map(|t| tape.leaf(t)).collect();
    let t = tape.leaf(&target);
    let (pred, _) = net.forward(&mut tape, &xs)?;
    let loss = tape.mse(t, pred)?;
    Ok(tape.value(loss)[0])
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step<N: Network>(net: &mut N, adam: &mut AdamState, data: &Dataset, idx: &[usize]) -> Result<f64> {
    let (inputs, target) = data.batch(idx)?;
    net.zero_grad();
    let mut tape = Tape::new();
    let xs: Vec<_> = inputs.iter().map(|t| tape.leaf(t)).collect();
    let t = tape.leaf(&target);
    let (pred, vars) = net.forward(&mut tape, &xs)?;
    let loss = tape.mse(t, pred)?;
    let grads = tape.backward(loss)?;
    grads.accumulate(&vars, net.params_mut())?;
    adam.step(&mut net.params_mut())?;
    Ok(tape.value(loss)[0])
}

/// Minimizes squared error on `train` with Adam, reducing the learning rate
/// on validation plateaus and stopping early. On return `net` holds the
/// parameters of the epoch with the lowest validation loss.
pub fn train_stage<N: Network>(
    net: &mut N,
    train: &Dataset,
    validation: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<StageRecord> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Argument(format!(
            "training needs non-empty train ({}) and validation ({}) sets",
            train.len(),
            validation.len()
        )));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = AdamState::new(&net.params(), config.lr_init)?;
    let mut plateau = PlateauSchedule::new(config.lr_factor, config.lr_patience, config.lr_min);
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut record = StageRecord::default();
    let mut best = net.flat_values();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.max_epochs {
        let lr = adam.learning_rate();
        record.learning_rates.push(lr);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            total += train_step(net, &mut adam, train, chunk)? * chunk.len() as f64;
        }
        record.train_losses.push(total / train.len() as f64);
        let val = dataset_loss(net, validation)?;
        if !val.is_finite() {
            return Err(Error::Numeric(format!("validation loss became {val} at epoch {epoch}")));
        }
        record.val_losses.push(val);
        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best = net.flat_values();
        }
        adam.set_learning_rate(plateau.observe(val, lr));
        if stop {
            record.stopped_early = true;
            break;
        }
    }
    net.load_flat(&best)?;
    for p in net.params_mut() {
        p.clear_grad();
    }
    record.best_epoch = stopper.best_epoch().unwrap_or(0);
    record.best_val_loss = stopper.best_loss();
    Ok(record)
}
