// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::error::{Error, Result};

/// Bound `K` on the product of layer operator norms, which bounds the
/// Lipschitz constant of a (leaky) ReLU network by `K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBudget {
    pub k: f64,
    pub power_iters: usize,
}

impl LipschitzBudget {
    pub const DEFAULT_POWER_ITERS: usize = 5;

    pub fn new(k: f64) -> Result<Self> {
        let b = Self {
            k,
            power_iters: Self::DEFAULT_POWER_ITERS,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_power_iters(mut self, iters: usize) -> Self {
        self.power_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!(
                "Lipschitz budget must be positive, got {}",
                self.k
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::invalid("power iteration count must be positive"));
        }
        Ok(())
    }

    /// `K^(1/(L+1))` for a network with `num_layers = L + 1` weight matrices.
    pub fn per_layer_cap(&self, num_layers: usize) -> f64 {
        self.k.powf(1.0 / num_layers as f64)
    }
}

/// Rescales every weight matrix whose estimated operator norm exceeds the
/// per-layer cap down to the cap. Biases are untouched.
pub fn project_lipschitz(params: &mut MlpParams, budget: &LipschitzBudget) {
    let cap = budget.per_layer_cap(params.layers.len());
    for layer in &mut params.layers {
        let sigma = layer.weight.spectral_norm(budget.power_iters);
        if sigma > cap {
            layer.weight.scale(cap / sigma);
        }
    }
}

/// Product of estimated layer operator norms.
pub fn operator_norm_product(params: &MlpParams, power_iters: usize) -> f64 {
    params
        .layers
        .iter()
        .map(|l| l.weight.spectral_norm(power_iters))
        .product()
}

/// Weight clipping to `[-c, c]`, the fallback enforcement mode.
pub fn clip_weights(params: &mut MlpParams, c: f64) {
    for layer in &mut params.layers {
        for w in layer.weight.as_mut_slice() {
            *w = w.clamp(-c, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::nn::Activation;
    use crate::rng::CounterRng;

    #[test]
    fn within_cap_is_bitwise_unchanged() {
        let mut rng = CounterRng::new(1);
        let mut net = MlpParams::gaussian(&[3, 4, 1], Activation::Relu, 0.1, &mut rng).unwrap();
        let before = net.clone();
        project_lipschitz(&mut net, &LipschitzBudget::new(100.0).unwrap());
        assert_eq!(net, before);
    }

    #[test]
    fn diagonal_single_layer() {
        let mut net = MlpParams::zeros(&[3, 3], Activation::Relu).unwrap();
        net.layers[0].weight = Matrix::diag(&[4.0, 4.0, 4.0]);
        project_lipschitz(&mut net, &LipschitzBudget::new(2.0).unwrap());
        let w = &net.layers[0].weight;
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == c { 2.0 } else { 0.0 };
                assert!((w.get(r, c) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn per_layer_cap_splits_geometrically() {
        let b = LipschitzBudget::new(8.0).unwrap();
        assert!((b.per_layer_cap(3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_entries() {
        let mut rng = CounterRng::new(2);
        let mut net = MlpParams::gaussian(&[5, 5, 1], Activation::Relu, 3.0, &mut rng).unwrap();
        clip_weights(&mut net, 0.01);
        assert!(net
            .layers
            .iter()
            .all(|l| l.weight.as_slice().iter().all(|w| w.abs() <= 0.01)));
    }

    #[test]
    fn invalid_budget() {
        assert!(LipschitzBudget::new(0.0).is_err());
        assert!(LipschitzBudget::new(f64::NAN).is_err());
    }
}
