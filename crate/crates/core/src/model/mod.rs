//! The per-station networks: temporal fusion, spatial convolution, the
//! linear ensemble, and a history-only recurrent baseline.

mod ensemble;
mod history;
mod spatial;
mod temporal;

pub use ensemble::{ensemble_forward, ensemble_init, EnsembleNet};
pub use history::{HistoryNet, HistoryShape};
pub use spatial::{build_feature_map, spatial_forward, FeatureMap, SpatialNet, SpatialShape};
pub use temporal::{TemporalNet, TemporalShape, TemporalVars};

use crate::error::Result;
use crate::numerics::{Parameterized, Tape, Tensor, Var};

/// A network trained by minimizing squared error on batches.
pub trait Network: Parameterized + Clone + Send + Sync {
    /// Shapes of one example's inputs, without the batch axis.
    fn input_shapes(&self) -> Vec<Vec<usize>>;

    fn outputs(&self) -> usize;

    /// Records a forward pass on `inputs` (each with a leading batch axis).
    /// Returns the `[batch × outputs]` prediction and the parameter handles,
    /// in [`Parameterized::params`] order.
    fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<(Var, Vec<Var>)>;

    /// Forward pass on plain tensors.
    fn predict(&self, inputs: &[Tensor]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t)).collect();
        let (y, _) = self.forward(&mut tape, &vars)?;
        Ok(tape.tensor(y))
    }
}

/// Checks the input count and that each input is `[batch, shape...]` with a
/// shared batch size. Returns the batch size.
pub(crate) fn check_inputs(op: &'static str, tape: &Tape, inputs: &[Var], shapes: &[Vec<usize>]) -> Result<usize> {
    use crate::error::Error;
    if inputs.len() != shapes.len() {
        return Err(Error::dim(op, &[shapes.len()], &[inputs.len()]));
    }
    let batch = inputs.first().map_or(0, |&v| tape.shape(v)[0]);
    for (&v, shape) in inputs.iter().zip(shapes) {
        let got = tape.shape(v);
        let mut want = vec![batch];
        want.extend_from_slice(shape);
        if got != want.as_slice() {
            return Err(Error::dim(op, &want, got));
        }
    }
    Ok(batch)
}
