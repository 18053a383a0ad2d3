use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Examples for one network: a fixed list of inputs per example and a
/// target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    shapes: Vec<Vec<usize>>,
    outputs: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    len: usize,
}

impl Dataset {
    /// `shapes` are per-example input shapes without the batch axis.
    pub fn new(shapes: Vec<Vec<usize>>, outputs: usize) -> Self {
        let inputs = vec![Vec::new(); shapes.len()];
        Self {
            shapes,
            outputs,
            inputs,
            targets: Vec::new(),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn push(&mut self, inputs: &[&[f64]], target: &[f64]) -> Result<()> {
        if inputs.len() != self.shapes.len() {
            return Err(Error::dim("dataset", &[self.shapes.len()], &[inputs.len()]));
        }
        for (x, shape) in inputs.iter().zip(&self.shapes) {
            let n: usize = shape.iter().product();
            if x.len() != n {
                return Err(Error::dim("dataset", shape, &[x.len()]));
            }
        }
        if target.len() != self.outputs {
            return Err(Error::dim("dataset target", &[self.outputs], &[target.len()]));
        }
        for (buf, x) in self.inputs.iter_mut().zip(inputs) {
            buf.extend_from_slice(x);
        }
        self.targets.extend_from_slice(target);
        self.len += 1;
        Ok(())
    }

    /// Input tensors and target for the given example positions.
    pub fn batch(&self, idx: &[usize]) -> Result<(Vec<Tensor>, Tensor)> {
        let mut tensors = Vec::with_capacity(self.shapes.len());
        for (buf, shape) in self.inputs.iter().zip(&self.shapes) {
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(idx.len() * n);
            for &i in idx {
                values.extend_from_slice(&buf[i * n..(i + 1) * n]);
            }
            let mut full = vec![idx.len()];
            full.extend_from_slice(shape);
            tensors.push(Tensor::new(full, values)?);
        }
        let mut t = Vec::with_capacity(idx.len() * self.outputs);
        for &i in idx {
            t.extend_from_slice(&self.targets[i * self.outputs..(i + 1) * self.outputs]);
        }
        Ok((tensors, Tensor::new(vec![idx.len(), self.outputs], t)?))
    }

    pub fn all(&self) -> Result<(Vec<Tensor>, Tensor)> {
        self.batch(&(0..self.len).collect::<Vec<_>>())
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.outputs..(i + 1) * self.outputs]
    }
}
