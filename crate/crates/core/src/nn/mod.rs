// SPDX-License-Identifier: MIT OR Apache-2.0

//! Feed-forward networks `x -> W_L s(... W_1 s(W_0 x + b_0) + b_1 ...) + b_L`
//! with reverse-mode gradients, Adam, and operator-norm budgets.

mod adam;
mod checkpoint;
mod lipschitz;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{NetworkCheckpoint, NETWORK_FORMAT_VERSION};
pub(crate) use checkpoint::check_version as checkpoint_version_check;
pub use lipschitz::{clip_weights, operator_norm_product, project_lipschitz, LipschitzBudget};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::CounterRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    /// No nonlinearity; used for linear-network checks.
    Identity,
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative with the left-derivative convention at the kink, so ReLU
    /// has derivative 0 at exactly 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map `z = W a + b`; `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    /// Hard clamp of every output coordinate to `[-B, B]`.
    pub output_clamp: Option<f64>,
    /// When false the biases stay at zero and receive no updates, which is
    /// the bias-free network class.
    pub bias_enabled: bool,
}

/// Scalar objective applied to the batch of network outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossHead {
    /// Mean over the batch of the sum of output coordinates.
    Mean,
    NegMean,
    /// Mean over the batch of output coordinate `j`.
    Coordinate(usize),
}

/// Parameter-shaped gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `inputs[l]` is the batch fed into layer `l`.
    inputs: Vec<Matrix>,
    /// `pre[l]` is the affine output of layer `l` before the nonlinearity.
    pre: Vec<Matrix>,
}

impl MlpParams {
    /// A network with all weights and biases zero. `dims` lists the layer
    /// widths from input to output.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!(
                "network needs at least two positive widths, got {dims:?}"
            )));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            activation,
            output_clamp: None,
            bias_enabled: true,
        })
    }

    /// Gaussian initialization `W_ij ~ N(0, gain^2 / fan_in)` with zero biases.
    pub fn gaussian(
        dims: &[usize],
        activation: Activation,
        gain: f64,
        rng: &mut CounterRng,
    ) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        for layer in &mut net.layers {
            let std = gain / (layer.input_dim() as f64).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = std * rng.normal();
            }
        }
        Ok(net)
    }

    pub fn with_clamp(mut self, bound: Option<f64>) -> Self {
        self.output_clamp = bound;
        self
    }

    pub fn with_bias(mut self, enabled: bool) -> Self {
        self.bias_enabled = enabled;
        if !enabled {
            for l in &mut self.layers {
                l.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Layer::output_dim));
        d
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Checks the structural invariants: adjacent widths agree, entries are
    /// finite, clamp is positive.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::shape(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.output_dim()
                )));
            }
            if i > 0 && l.input_dim() != self.layers[i - 1].output_dim() {
                return Err(Error::shape(format!(
                    "layer {i} takes {} inputs but layer {} produces {}",
                    l.input_dim(),
                    i - 1,
                    self.layers[i - 1].output_dim()
                )));
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite entries")));
            }
        }
        if let Some(b) = self.output_clamp {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("output clamp must be positive, got {b}")));
            }
        }
        if let Activation::LeakyRelu { slope } = self.activation {
            if !slope.is_finite() {
                return Err(Error::invalid("leaky slope must be finite"));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&batch)?.into_vec())
    }

    /// Forward pass over a batch (one example per row).
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = affine(&self.layers[0], x);
        check_finite(&a, 0)?;
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            self.activate_in_place(&mut a);
            a = affine(layer, &a);
            check_finite(&a, l)?;
        }
        self.clamp_in_place(&mut a);
        Ok(a)
    }

    /// Forward pass retaining what [`MlpParams::backward`] needs.
    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &a);
            check_finite(&z, l)?;
            inputs.push(a);
            a = z.clone();
            if l + 1 < self.layers.len() {
                self.activate_in_place(&mut a);
            }
            pre.push(z);
        }
        self.clamp_in_place(&mut a);
        Ok((a, ForwardCache { inputs, pre }))
    }

    /// Reverse pass. `upstream` holds d(objective)/d(output) per example.
    /// Returns parameter gradients and, if requested, d(objective)/d(input).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
        want_input_grad: bool,
    ) -> Result<(ParamGrads, Option<Matrix>)> {
        let last = self.layers.len() - 1;
        let out = &cache.pre[last];
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(Error::shape(format!(
                "upstream gradient is {}x{}, outputs are {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut delta = upstream.clone();
        if let Some(bound) = self.output_clamp {
            for (d, &z) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                if z.abs() > bound {
                    *d = 0.0;
                }
            }
        }
        let mut grads = ParamGrads::zeros_like(self);
        let mut input_grad = None;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let g = &mut grads.layers[l];
            for b in 0..delta.rows() {
                let d_row = delta.row(b);
                let x_row = input.row(b);
                for (o, &d) in d_row.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, x_row, g.weight.row_mut(o));
                    }
                }
                if self.bias_enabled {
                    axpy(1.0, d_row, &mut g.bias);
                }
            }
            if !g.weight.is_finite() || g.bias.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(
                    format!("layer {l} gradient"),
                    "non-finite value",
                ));
            }
            if l == 0 && !want_input_grad {
                break;
            }
            let mut prev = Matrix::zeros(delta.rows(), layer.input_dim());
            for b in 0..delta.rows() {
                let d_row = delta.row(b);
                let p_row = prev.row_mut(b);
                for (o, &d) in d_row.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, layer.weight.row(o), p_row);
                    }
                }
            }
            if l == 0 {
                input_grad = Some(prev);
                break;
            }
            let z_prev = &cache.pre[l - 1];
            for (p, &z) in prev.as_mut_slice().iter_mut().zip(z_prev.as_slice()) {
                *p *= self.activation.derivative(z);
            }
            if !prev.is_finite() {
                return Err(Error::numeric(
                    format!("layer {} backpropagated signal", l - 1),
                    "non-finite value",
                ));
            }
            delta = prev;
        }
        Ok((grads, input_grad))
    }

    /// Gradient of a scalar head over the batch outputs.
    pub fn gradients(&self, head: LossHead, batch: &Matrix) -> Result<ParamGrads> {
        if batch.rows() == 0 {
            return Err(Error::invalid("gradient batch is empty"));
        }
        let (out, cache) = self.forward_cached(batch)?;
        let upstream = head_upstream(head, out.rows(), out.cols())?;
        Ok(self.backward(&cache, &upstream, false)?.0)
    }

    /// Evaluates a loss head on the batch outputs.
    pub fn head_value(&self, head: LossHead, batch: &Matrix) -> Result<f64> {
        let out = self.forward_batch(batch)?;
        let n = out.rows() as f64;
        Ok(match head {
            LossHead::Mean => out.as_slice().iter().sum::<f64>() / n,
            LossHead::NegMean => -out.as_slice().iter().sum::<f64>() / n,
            LossHead::Coordinate(j) => (0..out.rows()).map(|r| out.get(r, j)).sum::<f64>() / n,
        })
    }

    /// Scalar-output convenience: mean of `d(x)` over the rows of `batch`.
    pub fn mean_output(&self, batch: &Matrix) -> Result<f64> {
        let out = self.forward_batch(batch)?;
        Ok(out.as_slice().iter().sum::<f64>() / out.rows() as f64)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has dimension {}, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if !x.is_finite() {
            return Err(Error::invalid("network input contains non-finite values"));
        }
        Ok(())
    }

    fn activate_in_place(&self, a: &mut Matrix) {
        let act = self.activation;
        if act != Activation::Identity {
            for v in a.as_mut_slice() {
                *v = act.apply(*v);
            }
        }
    }

    fn clamp_in_place(&self, a: &mut Matrix) {
        if let Some(b) = self.output_clamp {
            for v in a.as_mut_slice() {
                *v = v.clamp(-b, b);
            }
        }
    }
}

fn head_upstream(head: LossHead, rows: usize, cols: usize) -> Result<Matrix> {
    let n = rows as f64;
    let mut up = Matrix::zeros(rows, cols);
    match head {
        LossHead::Mean => up.as_mut_slice().iter_mut().for_each(|v| *v = 1.0 / n),
        LossHead::NegMean => up.as_mut_slice().iter_mut().for_each(|v| *v = -1.0 / n),
        LossHead::Coordinate(j) => {
            if j >= cols {
                return Err(Error::shape(format!(
                    "head coordinate {j} out of range for {cols} outputs"
                )));
            }
            for r in 0..rows {
                up.set(r, j, 1.0 / n);
            }
        }
    }
    Ok(up)
}

fn affine(layer: &Layer, x: &Matrix) -> Matrix {
    let rows = x.rows();
    let out_dim = layer.output_dim();
    let mut z = Matrix::zeros(rows, out_dim);
    for r in 0..rows {
        let x_row = x.row(r);
        let z_row = z.row_mut(r);
        for (o, zo) in z_row.iter_mut().enumerate() {
            *zo = dot(layer.weight.row(o), x_row) + layer.bias[o];
        }
    }
    z
}

fn check_finite(z: &Matrix, layer: usize) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric(
            format!("layer {layer} forward"),
            "non-finite pre-activation",
        ))
    }
}
