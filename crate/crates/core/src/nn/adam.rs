// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Layer, MlpParams, ParamGrads};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: ParamGrads,
    pub second_moment: ParamGrads,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_moment: ParamGrads::zeros_like(params),
            second_moment: ParamGrads::zeros_like(params),
            step_count: 0,
        })
    }
}

/// One bias-corrected Adam step, minimizing. Biases are left alone when the
/// network has them disabled.
pub fn adam_step(params: &mut MlpParams, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != params.layers.len()
        || state.first_moment.layers.len() != params.layers.len()
    {
        return Err(Error::shape("gradient layer count does not match parameters"));
    }
    for (i, (p, g)) in params.layers.iter().zip(&grads.layers).enumerate() {
        if p.weight.rows() != g.weight.rows()
            || p.weight.cols() != g.weight.cols()
            || p.bias.len() != g.bias.len()
        {
            return Err(Error::shape(format!("gradient shape differs at layer {i}")));
        }
    }
    if !grads.is_finite() {
        return Err(Error::numeric("adam step", "non-finite gradient"));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let corr1 = 1.0 - beta1.powi(t);
    let corr2 = 1.0 - beta2.powi(t);
    let bias_enabled = params.bias_enabled;

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.first_moment.layers.iter_mut())
        .zip(state.second_moment.layers.iter_mut())
    {
        let Layer { weight, bias } = p;
        update(
            weight.as_mut_slice(),
            g.weight.as_slice(),
            m.weight.as_mut_slice(),
            v.weight.as_mut_slice(),
        );
        if bias_enabled {
            update(bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::nn::Activation;

    fn scalar_net(w: f64) -> MlpParams {
        let mut net = MlpParams::zeros(&[1, 1], Activation::Identity).unwrap();
        net.layers[0].weight.set(0, 0, w);
        net
    }

    fn scalar_grad(g: f64) -> ParamGrads {
        ParamGrads {
            layers: vec![Layer {
                weight: Matrix::from_vec(1, 1, vec![g]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut net = scalar_net(0.7);
        let before = net.clone();
        let mut st = AdamState::new(&net, AdamConfig::default()).unwrap();
        adam_step(&mut net, &scalar_grad(0.0), &mut st).unwrap();
        assert_eq!(net, before);
        assert_eq!(st.first_moment.max_abs(), 0.0);
        assert_eq!(st.second_moment.max_abs(), 0.0);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_matches_hand_formula() {
        // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1,
        // p = 1 - 0.1 * 1 / (1 + 1e-8)
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(&net, AdamConfig::with_lr(0.1)).unwrap();
        adam_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((net.layers[0].weight.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn two_step_trace() {
        // Step 2 with g = 1 again:
        // m = 0.19, v = 0.001999, m_hat = 0.19/0.19 = 1, v_hat = 0.001999/0.001999 = 1
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(&net, AdamConfig::with_lr(0.1)).unwrap();
        adam_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        adam_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        let step = 0.1 / (1.0 + 1e-8);
        assert!((net.layers[0].weight.get(0, 0) - (1.0 - 2.0 * step)).abs() < 1e-14);
        assert!((st.first_moment.layers[0].weight.get(0, 0) - 0.19).abs() < 1e-15);
        assert!((st.second_moment.layers[0].weight.get(0, 0) - 0.001999).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(&net, AdamConfig::default()).unwrap();
        assert!(matches!(
            adam_step(&mut net, &scalar_grad(f64::NAN), &mut st),
            Err(Error::Numeric { .. })
        ));
        assert!(AdamState::new(&net, AdamConfig::with_lr(0.0)).is_err());
    }
}
