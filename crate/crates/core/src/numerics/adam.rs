use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Adam optimizer state for a fixed, ordered list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    shapes: Vec<Vec<usize>>,
}

impl AdamState {
    pub fn new(params: &[&Tensor], learning_rate: f64) -> Result<Self> {
        Self::with_moments(params, learning_rate, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_moments(params: &[&Tensor], learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
            return Err(Error::Argument("Adam betas must lie in [0, 1) and epsilon > 0".into()));
        }
        Ok(Self {
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    /// Applies one bias-corrected Adam update using each tensor's gradient
    /// accumulator.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if params.len() != self.shapes.len() {
            return Err(Error::dim("adam_step", &[self.shapes.len()], &[params.len()]));
        }
        for (p, shape) in params.iter().zip(&self.shapes) {
            if p.shape() != shape.as_slice() {
                return Err(Error::dim("adam_step", shape, p.shape()));
            }
            if p.grad().is_none() {
                return Err(Error::State("adam_step called on a parameter without gradients".into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(self.first.iter_mut()).zip(self.second.iter_mut()) {
            let grad = p.grad().expect("checked above").to_vec();
            for (((x, g), mi), vi) in p.values_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / correct1;
                let v_hat = *vi / correct2;
                *x -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::vector(vec![1.0, -2.0, 3.0]);
        p.zero_grad();
        let mut adam = AdamState::new(&[&p], 1e-3).unwrap();
        adam.step(&mut [&mut p]).unwrap();
        assert_eq!(p.values(), &[1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Tensor::scalar(0.5);
        p.accumulate_grad(&[1.0]).unwrap();
        let mut adam = AdamState::new(&[&p], 1e-3).unwrap();
        adam.step(&mut [&mut p]).unwrap();
        let expected = 0.5 - 1e-3 / (1.0 + DEFAULT_EPSILON);
        assert!((p.values()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn quadratic_loss_shrinks_monotonically() {
        // loss = x^2, grad = 2x
        let mut p = Tensor::scalar(1.0);
        let mut adam = AdamState::new(&[&p], 1e-3).unwrap();
        let mut last = 1.0;
        for _ in 0..2 {
            p.zero_grad();
            let x = p.values()[0];
            p.accumulate_grad(&[2.0 * x]).unwrap();
            adam.step(&mut [&mut p]).unwrap();
            let loss = p.values()[0].powi(2);
            assert!(loss < last);
            last = loss;
        }
    }

    #[test]
    fn missing_grad_is_a_state_error() {
        let mut p = Tensor::scalar(1.0);
        let mut adam = AdamState::new(&[&p], 1e-3).unwrap();
        assert!(matches!(adam.step(&mut [&mut p]), Err(Error::State(_))));
        assert_eq!(adam.step_count(), 0);
    }
}
