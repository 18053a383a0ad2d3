use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, Network};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Conv1d, Dense, Parameterized, Tape, Tensor, Var};

/// Station representations stacked as channels: `values` is `[N × V]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub values: Tensor,
    pub stations: Vec<String>,
}

impl FeatureMap {
    pub fn length(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Stacks one length-`N` representation per station, in the given order.
pub fn build_feature_map(stations: &[String], representations: &[Vec<f64>]) -> Result<FeatureMap> {
    let first = representations
        .first()
        .ok_or_else(|| Error::Argument("feature map needs at least one station".into()))?;
    if stations.len() != representations.len() {
        return Err(Error::dim(
            "build_feature_map",
            &[stations.len()],
            &[representations.len()],
        ));
    }
    let n = first.len();
    if let Some(r) = representations.iter().find(|r| r.len() != n) {
        return Err(Error::dim("build_feature_map", &[n], &[r.len()]));
    }
    let v = representations.len();
    let mut values = vec![0.0; n * v];
    for (c, r) in representations.iter().enumerate() {
        for (i, x) in r.iter().enumerate() {
            values[i * v + c] = *x;
        }
    }
    Ok(FeatureMap {
        values: Tensor::new(vec![n, v], values)?,
        stations: stations.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialShape {
    /// Representation length `N`.
    pub n: usize,
    /// Number of stations `V`.
    pub stations: usize,
    pub k: usize,
    pub filters: usize,
    pub kernel: usize,
}

impl SpatialShape {
    pub fn new(n: usize, stations: usize, k: usize) -> Self {
        Self {
            n,
            stations,
            k,
            filters: 64,
            kernel: 5,
        }
    }

    pub fn conv_len(&self) -> usize {
        self.n + 1 - self.kernel
    }

    pub fn pooled_len(&self) -> usize {
        self.conv_len() / 2
    }

    pub fn flattened(&self) -> usize {
        self.pooled_len() * self.filters
    }
}

/// Convolution over the station feature map, pooling and a linear read-out.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialNet {
    pub shape: SpatialShape,
    pub conv: Conv1d,
    pub out: Dense,
}

impl SpatialNet {
    pub fn new<R: Rng + ?Sized>(shape: SpatialShape, rng: &mut R) -> Result<Self> {
        if shape.kernel == 0 || shape.n < shape.kernel {
            return Err(Error::Argument(format!(
                "representation length {} is shorter than the kernel {}",
                shape.n, shape.kernel
            )));
        }
        if shape.conv_len() < 2 || shape.stations == 0 || shape.k == 0 || shape.filters == 0 {
            return Err(Error::Argument(format!("invalid spatial sizes {shape:?}")));
        }
        Ok(Self {
            shape,
            conv: Conv1d::new(shape.kernel, shape.stations, shape.filters, Activation::Relu, rng),
            out: Dense::new(shape.flattened(), shape.k, Activation::Linear, true, rng),
        })
    }

    pub fn zeroed(shape: SpatialShape) -> Result<Self> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut net = Self::new(shape, &mut rng)?;
        for p in net.params_mut() {
            p.values_mut().fill(0.0);
        }
        Ok(net)
    }
}

/// K predictions for one feature map.
pub fn spatial_forward(map: &FeatureMap, net: &SpatialNet) -> Result<Vec<f64>> {
    let (n, v) = (map.length(), map.channels());
    if n < net.shape.kernel {
        return Err(Error::Argument(format!(
            "representation length {n} is shorter than the kernel {}",
            net.shape.kernel
        )));
    }
    let x = map.values.clone().reshaped(vec![1, n, v])?;
    Ok(net.predict(&[x])?.into_values())
}

impl Parameterized for SpatialNet {
    fn params(&self) -> Vec<&Tensor> {
        let mut v = self.conv.params();
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.conv.params_mut();
        v.extend(self.out.params_mut());
        v
    }
}

impl Network for SpatialNet {
    fn input_shapes(&self) -> Vec<Vec<usize>> {
        vec![vec![self.shape.n, self.shape.stations]]
    }

    fn outputs(&self) -> usize {
        self.shape.k
    }

    fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<(Var, Vec<Var>)> {
        let batch = check_inputs("spatial_forward", tape, inputs, &self.input_shapes())?;
        let conv = self.conv.bind(tape);
        let out = self.out.bind(tape);
        let c = conv.forward(tape, inputs[0])?;
        let p = tape.maxpool2(c)?;
        let flat = tape.reshape(p, vec![batch, self.shape.flattened()])?;
        let y = out.forward(tape, flat)?;
        let mut vars = conv.vars();
        vars.extend(out.vars());
        Ok((y, vars))
    }
}
