//! Parameter bundles for the three layer types and their binding to a tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Activation, LstmVars, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Anything that owns trainable tensors in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// All parameter values, concatenated in order.
    fn flat_values(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.values().iter().copied()).collect()
    }

    /// Overwrites parameter values from a flat buffer produced by
    /// [`Parameterized::flat_values`].
    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.params().iter().map(|p| p.len()).sum();
        if total != flat.len() {
            return Err(Error::dim("load_flat", &[total], &[flat.len()]));
        }
        let mut at = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.values_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }
}

/// Fully connected layer, `activation(x · W + b)` with `W: [in×out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug)]
pub struct DenseVars {
    pub weights: Var,
    pub bias: Option<Var>,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        Self {
            weights: Tensor::glorot_uniform(&[inputs, outputs], inputs, outputs, rng),
            bias: bias.then(|| Tensor::zeros(&[outputs])),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn bind(&self, tape: &mut Tape) -> DenseVars {
        DenseVars {
            weights: tape.leaf(&self.weights),
            bias: self.bias.as_ref().map(|b| tape.leaf(b)),
            activation: self.activation,
        }
    }
}

impl DenseVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.dense(x, self.weights, self.bias, self.activation)
    }

    pub fn vars(&self) -> Vec<Var> {
        std::iter::once(self.weights).chain(self.bias).collect()
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&Tensor> {
        std::iter::once(&self.weights).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.weights).chain(self.bias.as_mut()).collect()
    }
}

/// Single-layer LSTM with stacked gate kernels (input, forget, candidate,
/// output).
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    /// `[features × 4H]`
    pub input_kernel: Tensor,
    /// `[H × 4H]`
    pub recurrent_kernel: Tensor,
    /// `[4H]`
    pub bias: Tensor,
}

impl Lstm {
    /// Glorot-uniform kernels, zero biases except a forget-gate bias of one.
    pub fn new<R: Rng + ?Sized>(features: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.values_mut()[hidden..2 * hidden].fill(1.0);
        Self {
            input_kernel: Tensor::glorot_uniform(&[features, 4 * hidden], features, 4 * hidden, rng),
            recurrent_kernel: Tensor::glorot_uniform(&[hidden, 4 * hidden], hidden, 4 * hidden, rng),
            bias,
        }
    }

    pub fn zeroed(features: usize, hidden: usize) -> Self {
        Self {
            input_kernel: Tensor::zeros(&[features, 4 * hidden]),
            recurrent_kernel: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn features(&self) -> usize {
        self.input_kernel.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.recurrent_kernel.shape()[0]
    }

    pub fn bind(&self, tape: &mut Tape) -> LstmVars {
        LstmVars {
            input_kernel: tape.leaf(&self.input_kernel),
            recurrent_kernel: tape.leaf(&self.recurrent_kernel),
            bias: tape.leaf(&self.bias),
        }
    }
}

impl LstmVars {
    pub fn vars(&self) -> Vec<Var> {
        vec![self.input_kernel, self.recurrent_kernel, self.bias]
    }
}

impl Parameterized for Lstm {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.input_kernel, &self.recurrent_kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.input_kernel, &mut self.recurrent_kernel, &mut self.bias]
    }
}

/// Valid 1-D convolution with `filters: [k × channels × F]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub filters: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug)]
pub struct Conv1dVars {
    pub filters: Var,
    pub bias: Var,
    pub activation: Activation,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        kernel: usize,
        channels: usize,
        filters: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            filters: Tensor::glorot_uniform(&[kernel, channels, filters], kernel * channels, kernel * filters, rng),
            bias: Tensor::zeros(&[filters]),
            activation,
        }
    }

    pub fn kernel(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.filters.shape()[1]
    }

    pub fn filter_count(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn bind(&self, tape: &mut Tape) -> Conv1dVars {
        Conv1dVars {
            filters: tape.leaf(&self.filters),
            bias: tape.leaf(&self.bias),
            activation: self.activation,
        }
    }
}

impl Conv1dVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.conv1d(x, self.filters, self.bias)?;
        tape.activate(y, self.activation)
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.filters, self.bias]
    }
}

impl Parameterized for Conv1d {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.filters, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.filters, &mut self.bias]
    }
}

/// Shape-only description of a parameter, recorded in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
}
