/// Learning-rate reduction on a validation plateau.
///
/// A loss counts as an improvement only if it is strictly below the best
/// seen so far. After `patience` consecutive epochs without improvement the
/// rate is multiplied by `factor` (not below `min_lr`) and the counter
/// restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauSchedule {
    factor: f64,
    patience: usize,
    min_lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauSchedule {
    pub fn new(factor: f64, patience: usize, min_lr: f64) -> Self {
        Self {
            factor,
            patience,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Records one epoch's validation loss; returns the rate for the next
    /// epoch.
    pub fn observe(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience && lr > self.min_lr {
            self.wait = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

/// Stops training after `patience` consecutive epochs without strict
/// improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    wait: usize,
    best_epoch: Option<usize>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            wait: 0,
            best_epoch: None,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.wait = 0;
            self.best_epoch = Some(epoch);
            return (true, false);
        }
        self.wait += 1;
        (false, self.wait >= self.patience)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}
