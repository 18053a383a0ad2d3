use super::{check_inputs, Network};
use crate::error::{Error, Result};
use crate::numerics::{Parameterized, Tape, Tensor, Var};

/// Bias-free blend `ŷ_j = Σ_i W_l[i][j]·ŷ_l[i] + Σ_i W_s[i][j]·ŷ_s[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleNet {
    pub w_l: Tensor,
    pub w_s: Tensor,
}

/// Both `K × K` matrices filled with `1/(2K)`.
pub fn ensemble_init(k: usize) -> Result<EnsembleNet> {
    if k == 0 {
        return Err(Error::Argument("ensemble needs K >= 1".into()));
    }
    let w = 1.0 / (2 * k) as f64;
    Ok(EnsembleNet {
        w_l: Tensor::filled(&[k, k], w),
        w_s: Tensor::filled(&[k, k], w),
    })
}

pub fn ensemble_forward(y_l: &[f64], y_s: &[f64], net: &EnsembleNet) -> Result<Vec<f64>> {
    let k = net.k();
    if y_l.len() != k || y_s.len() != k {
        return Err(Error::dim("ensemble_forward", &[y_l.len(), y_s.len()], &[k, k]));
    }
    let l = Tensor::new(vec![1, k], y_l.to_vec())?;
    let s = Tensor::new(vec![1, k], y_s.to_vec())?;
    Ok(net.predict(&[l, s])?.into_values())
}

impl EnsembleNet {
    pub fn k(&self) -> usize {
        self.w_l.shape()[0]
    }
}

impl Parameterized for EnsembleNet {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_l, &self.w_s]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_l, &mut self.w_s]
    }
}

impl Network for EnsembleNet {
    fn input_shapes(&self) -> Vec<Vec<usize>> {
        vec![vec![self.k()], vec![self.k()]]
    }

    fn outputs(&self) -> usize {
        self.k()
    }

    fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<(Var, Vec<Var>)> {
        check_inputs("ensemble_forward", tape, inputs, &self.input_shapes())?;
        let wl = tape.leaf(&self.w_l);
        let ws = tape.leaf(&self.w_s);
        let a = tape.matmul(inputs[0], wl)?;
        let b = tape.matmul(inputs[1], ws)?;
        Ok((tape.add(a, b)?, vec![wl, ws]))
    }
}
