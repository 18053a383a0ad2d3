//! Dense tensors, reverse-mode differentiation and the Adam optimizer.
//!
//! The free functions in this module evaluate a single operator on plain
//! tensors. Training code records whole forward passes on a [`Tape`]
//! instead, so that [`Tape::backward`] can reach every parameter.

mod adam;
mod layers;
mod tape;
mod tensor;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use layers::{Conv1d, Conv1dVars, Dense, DenseVars, Lstm, ParamShape, Parameterized};
pub use tape::{Activation, Gradients, LstmVars, Tape, Var};
pub use tensor::Tensor;

use crate::error::Result;

/// `activation(input · weights + bias)` for `input: [batch×in]`.
pub fn dense_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&Tensor>,
    activation: Activation,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.leaf(input);
    let w = tape.leaf(weights);
    let b = bias.map(|b| tape.leaf(b));
    let y = tape.dense(x, w, b, activation)?;
    Ok(tape.tensor(y))
}

/// One LSTM step; returns `(h_t, c_t)`.
pub fn lstm_cell(x: &Tensor, h_prev: &Tensor, c_prev: &Tensor, params: &Lstm) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let (x, h, c) = (tape.leaf(x), tape.leaf(h_prev), tape.leaf(c_prev));
    let (h, c) = tape.lstm_cell(x, h, c, &vars)?;
    Ok((tape.tensor(h), tape.tensor(c)))
}

/// Last hidden state of an LSTM run over `[batch×steps×features]`.
pub fn lstm_forward(sequence: &Tensor, params: &Lstm) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let seq = tape.leaf(sequence);
    let h = tape.lstm_forward(seq, &vars)?;
    Ok(tape.tensor(h))
}

pub fn conv1d_forward(input: &Tensor, filters: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (x, f, b) = (tape.leaf(input), tape.leaf(filters), tape.leaf(bias));
    let y = tape.conv1d(x, f, b)?;
    let y = tape.activate(y, activation)?;
    Ok(tape.tensor(y))
}

/// Pairwise max pooling along the length axis of `[batch×L×F]`.
pub fn maxpool1d(input: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.leaf(input);
    let y = tape.maxpool2(x)?;
    Ok(tape.tensor(y))
}

pub fn mse_loss(truth: &Tensor, pred: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let (t, p) = (tape.leaf(truth), tape.leaf(pred));
    let l = tape.mse(t, p)?;
    Ok(tape.value(l)[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
    }

    fn identity2() -> Tensor {
        t(&[2, 2], &[1.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn dense_examples() {
        let zero = dense_forward(
            &Tensor::zeros(&[1, 3]),
            &t(&[3, 2], &[1., 2., 3., 4., 5., 6.]),
            None,
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(zero.values(), &[0.0, 0.0]);

        let y = dense_forward(
            &t(&[1, 2], &[1.0, 2.0]),
            &identity2(),
            Some(&Tensor::zeros(&[2])),
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(y.values(), &[1.0, 2.0]);

        let y = dense_forward(&t(&[1, 2], &[1.0, -3.0]), &identity2(), None, Activation::Relu).unwrap();
        assert_eq!(y.values(), &[1.0, 0.0]);
    }

    #[test]
    fn dense_shape_mismatch_reports_both_shapes() {
        let err = dense_forward(&Tensor::zeros(&[1, 3]), &identity2(), None, Activation::Linear).unwrap_err();
        match err {
            Error::Dimension { left, right, .. } => {
                assert_eq!(left, vec![1, 3]);
                assert_eq!(right, vec![2, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lstm_cell_zero_parameters() {
        let params = Lstm::zeroed(1, 1);
        let z = Tensor::zeros(&[1, 1]);
        let (h, c) = lstm_cell(&z, &z, &z, &params).unwrap();
        assert_eq!((h.values()[0], c.values()[0]), (0.0, 0.0));

        let (h, c) = lstm_cell(&z, &z, &Tensor::filled(&[1, 1], 1.0), &params).unwrap();
        assert!((c.values()[0] - 0.5).abs() < 1e-15);
        assert!((h.values()[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h.values()[0] - 0.231059).abs() < 1e-6);
    }

    #[test]
    fn lstm_cell_hidden_mismatch() {
        let params = Lstm::zeroed(1, 2);
        let x = Tensor::zeros(&[1, 1]);
        let h = Tensor::zeros(&[1, 3]);
        assert!(matches!(lstm_cell(&x, &h, &h, &params), Err(Error::Dimension { .. })));
    }

    fn random_lstm(seed: u64, features: usize, hidden: usize) -> Lstm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = Lstm::new(features, hidden, &mut rng);
        for v in l.bias.values_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        l
    }

    #[test]
    fn single_step_sequence_matches_cell_bit_exact() {
        let params = random_lstm(7, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let seq = t(&[2, 1, 3], &x);
        let h_seq = lstm_forward(&seq, &params).unwrap();
        let zero = Tensor::zeros(&[2, 4]);
        let (h_cell, _) = lstm_cell(&t(&[2, 3], &x), &zero, &zero, &params).unwrap();
        assert_eq!(h_seq.values(), h_cell.values());
    }

    /// Scalar re-derivation of the gate equations, batch of one.
    fn unrolled_oracle(seq: &[Vec<f64>], p: &Lstm) -> Vec<f64> {
        let hidden = p.hidden();
        let feats = p.features();
        let wx = p.input_kernel.values();
        let wh = p.recurrent_kernel.values();
        let b = p.bias.values();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        for x in seq {
            let mut z = b.to_vec();
            for (col, zc) in z.iter_mut().enumerate() {
                for (f, xv) in x.iter().enumerate().take(feats) {
                    *zc += xv * wx[f * 4 * hidden + col];
                }
                for (j, hv) in h.iter().enumerate() {
                    *zc += hv * wh[j * 4 * hidden + col];
                }
            }
            let mut nh = vec![0.0; hidden];
            for u in 0..hidden {
                let i = sig(z[u]);
                let f = sig(z[hidden + u]);
                let g = z[2 * hidden + u].tanh();
                let o = sig(z[3 * hidden + u]);
                c[u] = f * c[u] + i * g;
                nh[u] = o * c[u].tanh();
            }
            h = nh;
        }
        h
    }

    #[test]
    fn sequence_matches_unrolled_oracle() {
        let params = random_lstm(11, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let steps: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let seq = t(&[1, 6, 2], &steps.concat());
        let got = lstm_forward(&seq, &params).unwrap();
        let want = unrolled_oracle(&steps, &params);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_is_an_argument_error() {
        let params = Lstm::zeroed(1, 2);
        assert!(matches!(
            lstm_forward(&Tensor::zeros(&[1, 0, 1]), &params),
            Err(Error::Argument(_))
        ));
        let zero = lstm_forward(&Tensor::zeros(&[1, 5, 1]), &params).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv1d_examples() {
        let y = conv1d_forward(
            &t(&[1, 3, 1], &[1., 2., 3.]),
            &t(&[2, 1, 1], &[1., 1.]),
            &Tensor::zeros(&[1]),
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(y.shape(), &[1, 2, 1]);
        assert_eq!(y.values(), &[3.0, 5.0]);

        let y = conv1d_forward(
            &t(&[1, 4, 2], &[1., 2., 3., 4., 5., 6., 7., 8.]),
            &Tensor::zeros(&[2, 2, 3]),
            &Tensor::zeros(&[3]),
            Activation::Relu,
        )
        .unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));

        // kernel spanning the whole input collapses to one weighted sum
        let w = [0.5, -1.0, 2.0, 0.25];
        let y = conv1d_forward(
            &t(&[1, 4, 1], &[1., 2., 3., 4.]),
            &t(&[4, 1, 1], &w),
            &t(&[1], &[0.1]),
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert!((y.values()[0] - (0.5 - 2.0 + 6.0 + 1.0 + 0.1)).abs() < 1e-12);

        assert!(matches!(
            conv1d_forward(
                &t(&[1, 2, 1], &[1., 2.]),
                &Tensor::zeros(&[3, 1, 1]),
                &Tensor::zeros(&[1]),
                Activation::Relu
            ),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn maxpool_examples() {
        let y = maxpool1d(&t(&[1, 4, 1], &[1., 3., 2., 2.])).unwrap();
        assert_eq!(y.values(), &[3.0, 2.0]);
        let y = maxpool1d(&Tensor::filled(&[1, 5, 2], 4.0)).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.values().iter().all(|&v| v == 4.0));
        assert!(matches!(maxpool1d(&Tensor::zeros(&[1, 1, 1])), Err(Error::Argument(_))));
    }

    #[test]
    fn maxpool_gradient_goes_to_argmax_only() {
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 4, 1], &[1., 3., 2.5, 2.]));
        let y = tape.maxpool2(x).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn mse_examples() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        let b = t(&[2, 2], &[2., 3., 4., 5.]);
        assert_eq!(mse_loss(&a, &b).unwrap(), 1.0);
        assert_eq!(mse_loss(&Tensor::zeros(&[2, 2]), &a).unwrap(), 7.5);
        assert!(matches!(
            mse_loss(&a, &Tensor::zeros(&[4])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn backward_examples() {
        // d mse / d pred vanishes at the minimum
        let mut tape = Tape::new();
        let truth = tape.leaf(&t(&[3], &[1., 2., 3.]));
        let pred = tape.leaf(&t(&[3], &[1., 2., 3.]));
        let l = tape.mse(truth, pred).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(pred).unwrap(), &[0.0, 0.0, 0.0]);

        // y = tanh(w x), x = 1, w = 0 -> dy/dw = 1
        let mut tape = Tape::new();
        let x = tape.leaf(&t(&[1, 1], &[1.0]));
        let w = tape.leaf(&t(&[1, 1], &[0.0]));
        let y = tape.dense(x, w, None, Activation::Tanh).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(w).unwrap(), &[1.0]);
    }

    #[test]
    fn backward_rejects_foreign_and_non_scalar_nodes() {
        let mut a = Tape::new();
        let b = Tape::new();
        let v = a.leaf(&Tensor::scalar(1.0));
        assert!(matches!(b.backward(v), Err(Error::State(_))));
        let m = a.leaf(&Tensor::zeros(&[2]));
        assert!(matches!(a.backward(m), Err(Error::State(_))));
    }

    #[test]
    fn repeated_accumulation_adds_up() {
        let mut param = Tensor::scalar(2.0);
        param.zero_grad();
        let mut tape = Tape::new();
        let p = tape.leaf(&param);
        let y = tape.mul(p, p).unwrap();
        let g = tape.backward(y).unwrap();
        g.accumulate(&[p], vec![&mut param]).unwrap();
        let g = tape.backward(y).unwrap();
        g.accumulate(&[p], vec![&mut param]).unwrap();
        assert_eq!(param.grad().unwrap(), &[8.0]);
    }

    fn finite_difference_check(seed: u64) {
        // y = sum(r ⊙ relu(conv(stack[x·W1 + b1, x·W2]))) exercises most ops
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let inputs = vec![
            rand_t(&[2, 3]),
            rand_t(&[3, 6]),
            rand_t(&[6]),
            rand_t(&[3, 6]),
            rand_t(&[3, 2, 4]),
            rand_t(&[4]),
        ];
        let weights = rand_t(&[2, 2, 4]);
        let eval = |vals: &[Tensor]| -> (f64, Vec<Vec<f64>>) {
            let mut tape = Tape::new();
            let v: Vec<Var> = vals.iter().map(|x| tape.leaf(x)).collect();
            let a = tape.dense(v[0], v[1], Some(v[2]), Activation::Tanh).unwrap();
            let b = tape.dense(v[0], v[3], None, Activation::Sigmoid).unwrap();
            let m = tape.stack_channels(&[a, b]).unwrap();
            let c = tape.conv1d(m, v[4], v[5]).unwrap();
            let c = tape.relu(c).unwrap();
            let p = tape.maxpool2(c).unwrap();
            let r = tape.leaf(&weights);
            let y = tape.mul(p, r).unwrap();
            let s = tape.sum(y).unwrap();
            let g = tape.backward(s).unwrap();
            (
                tape.value(s)[0],
                v.iter().map(|x| g.get(*x).unwrap_or(&[]).to_vec()).collect(),
            )
        };
        let (_, analytic) = eval(&inputs);
        let h = 1e-5;
        for (ti, tensor) in inputs.iter().enumerate() {
            for k in 0..tensor.len() {
                let mut plus = inputs.clone();
                plus[ti].values_mut()[k] += h;
                let mut minus = inputs.clone();
                minus[ti].values_mut()[k] -= h;
                let numeric = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
                let a = analytic[ti].get(k).copied().unwrap_or(0.0);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} tensor {ti}[{k}]: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        for seed in 0..5 {
            finite_difference_check(seed);
        }
    }
}
