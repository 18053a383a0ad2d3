use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, Network};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Dense, Lstm, Parameterized, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryShape {
    pub w: usize,
    pub k: usize,
    pub history_width: usize,
    pub lstm_hidden: usize,
}

impl HistoryShape {
    pub fn new(w: usize, k: usize, history_width: usize) -> Self {
        Self {
            w,
            k,
            history_width,
            lstm_hidden: 32,
        }
    }
}

/// Baseline that sees only observed history: an LSTM and a linear read-out
/// of K horizons.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryNet {
    pub shape: HistoryShape,
    pub lstm: Lstm,
    pub out: Dense,
}

impl HistoryNet {
    pub fn new<R: Rng + ?Sized>(shape: HistoryShape, rng: &mut R) -> Result<Self> {
        if [shape.w, shape.k, shape.history_width, shape.lstm_hidden].contains(&0) {
            return Err(Error::Argument(format!("history sizes must be positive: {shape:?}")));
        }
        Ok(Self {
            shape,
            lstm: Lstm::new(shape.history_width, shape.lstm_hidden, rng),
            out: Dense::new(shape.lstm_hidden, shape.k, Activation::Linear, true, rng),
        })
    }
}

impl Parameterized for HistoryNet {
    fn params(&self) -> Vec<&Tensor> {
        let mut v = self.lstm.params();
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.lstm.params_mut();
        v.extend(self.out.params_mut());
        v
    }
}

impl Network for HistoryNet {
    fn input_shapes(&self) -> Vec<Vec<usize>> {
        vec![vec![self.shape.w, self.shape.history_width]]
    }

    fn outputs(&self) -> usize {
        self.shape.k
    }

    fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<(Var, Vec<Var>)> {
        check_inputs("history_forward", tape, inputs, &self.input_shapes())?;
        let lstm = self.lstm.bind(tape);
        let out = self.out.bind(tape);
        let h = tape.lstm_forward(inputs[0], &lstm)?;
        let y = out.forward(tape, h)?;
        let mut vars = lstm.vars();
        vars.extend(out.vars());
        Ok((y, vars))
    }
}
