use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, Network};
use crate::data::SampleWindow;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Dense, DenseVars, Lstm, LstmVars, Parameterized, Tape, Tensor, Var};

/// Sizes of a temporal module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalShape {
    pub w: usize,
    pub k: usize,
    pub history_width: usize,
    pub future_width: usize,
    pub lstm_hidden: usize,
    /// Width of the future encoder relative to its flattened input.
    pub future_multiplier: usize,
}

impl TemporalShape {
    pub fn new(w: usize, k: usize, history_width: usize, future_width: usize) -> Self {
        Self {
            w,
            k,
            history_width,
            future_width,
            lstm_hidden: 32,
            future_multiplier: 2,
        }
    }

    /// Length of the history encoding (twice the LSTM state).
    pub fn history_code(&self) -> usize {
        2 * self.lstm_hidden
    }

    pub fn future_input(&self) -> usize {
        self.k * self.future_width
    }

    pub fn future_code(&self) -> usize {
        self.future_multiplier * self.future_input()
    }

    /// Length `N` of the representation handed to the spatial module.
    pub fn representation(&self) -> usize {
        self.history_code() + self.future_code()
    }

    fn validate(&self) -> Result<()> {
        let sizes = [
            self.w,
            self.k,
            self.history_width,
            self.future_width,
            self.lstm_hidden,
            self.future_multiplier,
        ];
        if sizes.contains(&0) {
            return Err(Error::Argument(format!("temporal sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// LSTM history encoder, MLP future encoder and the MLP that fuses both.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalNet {
    pub shape: TemporalShape,
    pub lstm: Lstm,
    pub mlp_h: Dense,
    pub mlp_f: Dense,
    pub mlp_l_hidden: Dense,
    pub mlp_l_out: Dense,
}

/// Tape handles for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct TemporalVars {
    pub lstm: LstmVars,
    pub mlp_h: DenseVars,
    pub mlp_f: DenseVars,
    pub mlp_l_hidden: DenseVars,
    pub mlp_l_out: DenseVars,
}

impl TemporalVars {
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.lstm.vars();
        for d in [&self.mlp_h, &self.mlp_f, &self.mlp_l_hidden, &self.mlp_l_out] {
            v.extend(d.vars());
        }
        v
    }
}

impl TemporalNet {
    pub fn new<R: Rng + ?Sized>(shape: TemporalShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let n = shape.representation();
        Ok(Self {
            shape,
            lstm: Lstm::new(shape.history_width, shape.lstm_hidden, rng),
            mlp_h: Dense::new(shape.lstm_hidden, shape.history_code(), Activation::Relu, true, rng),
            mlp_f: Dense::new(shape.future_input(), shape.future_code(), Activation::Relu, true, rng),
            mlp_l_hidden: Dense::new(n, n, Activation::Relu, true, rng),
            mlp_l_out: Dense::new(n, shape.k, Activation::Linear, true, rng),
        })
    }

    /// All parameters zero.
    pub fn zeroed(shape: TemporalShape) -> Result<Self> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut net = Self::new(shape, &mut rng)?;
        for p in net.params_mut() {
            p.values_mut().fill(0.0);
        }
        Ok(net)
    }

    pub fn bind(&self, tape: &mut Tape) -> TemporalVars {
        TemporalVars {
            lstm: self.lstm.bind(tape),
            mlp_h: self.mlp_h.bind(tape),
            mlp_f: self.mlp_f.bind(tape),
            mlp_l_hidden: self.mlp_l_hidden.bind(tape),
            mlp_l_out: self.mlp_l_out.bind(tape),
        }
    }

    /// `[B×W×hw] → [B×2H]`.
    pub fn encode_history_tape(&self, tape: &mut Tape, vars: &TemporalVars, history: Var) -> Result<Var> {
        let h = tape.lstm_forward(history, &vars.lstm)?;
        vars.mlp_h.forward(tape, h)
    }

    /// `[B×K·fw] → [B×multiplier·K·fw]`.
    pub fn encode_future_tape(&self, tape: &mut Tape, vars: &TemporalVars, future: Var) -> Result<Var> {
        vars.mlp_f.forward(tape, future)
    }

    /// Returns `(predictions [B×K], representation [B×N])`.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &TemporalVars, history: Var, future: Var) -> Result<(Var, Var)> {
        check_inputs("temporal_forward", tape, &[history, future], &self.input_shapes())?;
        let hh = self.encode_history_tape(tape, vars, history)?;
        let hf = self.encode_future_tape(tape, vars, future)?;
        let joined = tape.concat(&[hh, hf])?;
        let repr = vars.mlp_l_hidden.forward(tape, joined)?;
        let pred = vars.mlp_l_out.forward(tape, repr)?;
        Ok((pred, repr))
    }

    fn batched(t: &Tensor, tail: &[usize]) -> Result<Tensor> {
        let per: usize = tail.iter().product();
        if per == 0 || !t.len().is_multiple_of(per) {
            return Err(Error::dim("temporal input", tail, t.shape()));
        }
        let mut shape = vec![t.len() / per];
        shape.extend_from_slice(tail);
        t.clone().reshaped(shape)
    }

    /// History encoding for `[W×hw]` or `[B×W×hw]` input.
    pub fn encode_history(&self, history: &Tensor) -> Result<Tensor> {
        let s = self.shape;
        if history.shape().last() != Some(&s.history_width) {
            return Err(Error::dim("encode_history", &[s.w, s.history_width], history.shape()));
        }
        let h = Self::batched(history, &[s.w, s.history_width])?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let x = tape.leaf(&h);
        let y = self.encode_history_tape(&mut tape, &vars, x)?;
        Ok(tape.tensor(y))
    }

    /// Future encoding for a flattened `K·fw` block (optionally batched).
    pub fn encode_future(&self, future: &Tensor) -> Result<Tensor> {
        let s = self.shape;
        if !future.len().is_multiple_of(s.future_input()) {
            return Err(Error::dim("encode_future", &[s.future_input()], future.shape()));
        }
        let f = Self::batched(future, &[s.future_input()])?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let x = tape.leaf(&f);
        let y = self.encode_future_tape(&mut tape, &vars, x)?;
        Ok(tape.tensor(y))
    }

    /// Predictions and representation for a single window (already
    /// normalized).
    pub fn forward_window(&self, window: &SampleWindow) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.shape;
        let h = Tensor::new(vec![1, s.w, s.history_width], window.history.clone())?;
        let f = Tensor::new(vec![1, s.future_input()], window.future.clone())?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let (hv, fv) = (tape.leaf(&h), tape.leaf(&f));
        let (p, r) = self.forward_tape(&mut tape, &vars, hv, fv)?;
        Ok((tape.value(p).to_vec(), tape.value(r).to_vec()))
    }

    /// Batched predictions and representations.
    pub fn forward_batch(&self, history: &Tensor, future: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let (hv, fv) = (tape.leaf(history), tape.leaf(future));
        let (p, r) = self.forward_tape(&mut tape, &vars, hv, fv)?;
        Ok((tape.tensor(p), tape.tensor(r)))
    }
}

impl Parameterized for TemporalNet {
    fn params(&self) -> Vec<&Tensor> {
        let mut v = self.lstm.params();
        for d in [&self.mlp_h, &self.mlp_f, &self.mlp_l_hidden, &self.mlp_l_out] {
            v.extend(d.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.lstm.params_mut();
        v.extend(self.mlp_h.params_mut());
        v.extend(self.mlp_f.params_mut());
        v.extend(self.mlp_l_hidden.params_mut());
        v.extend(self.mlp_l_out.params_mut());
        v
    }
}

impl Network for TemporalNet {
    fn input_shapes(&self) -> Vec<Vec<usize>> {
        let s = self.shape;
        vec![vec![s.w, s.history_width], vec![s.future_input()]]
    }

    fn outputs(&self) -> usize {
        self.shape.k
    }

    fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<(Var, Vec<Var>)> {
        check_inputs("temporal_forward", tape, inputs, &self.input_shapes())?;
        let vars = self.bind(tape);
        let (pred, _) = self.forward_tape(tape, &vars, inputs[0], inputs[1])?;
        Ok((pred, vars.all()))
    }
}
