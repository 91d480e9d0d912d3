// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON checkpoint for a single network.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, MlpParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Row-major `output_dim x input_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub seed: Option<u64>,
    pub activation: Activation,
    pub output_clamp: Option<f64>,
    pub bias_enabled: bool,
    pub budget_k: Option<f64>,
    pub layers: Vec<LayerRecord>,
}

impl NetworkCheckpoint {
    pub fn from_params(params: &MlpParams, seed: Option<u64>, budget_k: Option<f64>) -> Self {
        Self {
            format_version: NETWORK_FORMAT_VERSION,
            seed,
            activation: params.activation,
            output_clamp: params.output_clamp,
            bias_enabled: params.bias_enabled,
            budget_k,
            layers: params
                .layers
                .iter()
                .map(|l| LayerRecord {
                    input_dim: l.input_dim(),
                    output_dim: l.output_dim(),
                    weights: l.weight.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<MlpParams> {
        if self.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.format_version,
                expected: NETWORK_FORMAT_VERSION,
            });
        }
        let layers = self
            .layers
            .iter()
            .map(|r| {
                Ok(Layer {
                    weight: Matrix::from_vec(r.output_dim, r.input_dim, r.weights.clone())?,
                    bias: r.bias.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams {
            layers,
            activation: self.activation,
            output_clamp: self.output_clamp,
            bias_enabled: self.bias_enabled,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
        check_version(&probe, NETWORK_FORMAT_VERSION)?;
        serde_json::from_value(probe).map_err(|e| Error::Corrupt(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Reads `format_version` from a parsed document before full decoding so a
/// newer file reports a version error rather than a schema error.
pub(crate) fn check_version(doc: &serde_json::Value, expected: u32) -> Result<()> {
    let found = doc
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    if found != u64::from(expected) {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = CounterRng::new(4);
        let net = MlpParams::gaussian(&[3, 7, 2], Activation::leaky(), 1.3, &mut rng)
            .unwrap()
            .with_clamp(Some(50.0));
        let ck = NetworkCheckpoint::from_params(&net, Some(4), Some(2.0));
        let back = NetworkCheckpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back.to_params().unwrap(), net);
    }

    #[test]
    fn future_version_rejected() {
        let net = MlpParams::zeros(&[1, 1], Activation::Relu).unwrap();
        let mut ck = NetworkCheckpoint::from_params(&net, None, None);
        ck.format_version = 9;
        match NetworkCheckpoint::from_json(&ck.to_json()) {
            Err(Error::Version { found, expected }) => {
                assert_eq!((found, expected), (9, NETWORK_FORMAT_VERSION));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
