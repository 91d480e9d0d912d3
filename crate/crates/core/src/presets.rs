// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named experiment configurations.

use crate::cpd::CpdConfig;
use crate::gan::{ModelConfig, TrainConfig};
use crate::timeseries::{ChangePointSpec, InitSpec, NoiseSpec, VarSpec};

/// 20-dimensional VAR(3) `x_t = x_{t-1} - 0.01 x_{t-2} - 0.5 x_{t-3} + v_t`,
/// `v_t ~ N(0, 0.2 I)`, 500 burn-in rows, 10000 kept.
pub fn ar20() -> VarSpec {
    VarSpec {
        p: 20,
        lag_coeffs: vec![1.0, -0.01, -0.5],
        noise: NoiseSpec {
            mean: vec![0.0; 20],
            cov_scale: 0.2,
        },
        init: InitSpec::Uniform { lo: 0.0, hi: 0.01 },
        burn_in: 500,
        n_keep: 10_000,
    }
}

/// Generator latent must be at least as wide as the data for a
/// full-rank Gaussian target.
pub fn ar20_model() -> ModelConfig {
    ModelConfig {
        latent_dim: 32,
        ..ModelConfig::default()
    }
}

pub fn ar20_train() -> TrainConfig {
    TrainConfig::standard_schedule(1000)
}

/// 23-dimensional VAR(2) `x_t = 0.6 x_{t-1} - 0.5 x_{t-2} + v_t` whose
/// innovation mean moves from 0 to 2 at kept row 5000.
pub fn cp23() -> ChangePointSpec {
    ChangePointSpec {
        p: 23,
        lag_coeffs: vec![0.6, -0.5],
        cov_scale: 1.0,
        pre_mean: vec![0.0; 23],
        post_mean: vec![2.0; 23],
        init: InitSpec::Zeros,
        burn_in: 500,
        n_keep: 10_000,
        change_at_raw: 5_500,
    }
}

pub fn cp23_model() -> ModelConfig {
    ModelConfig {
        latent_dim: 32,
        ..ModelConfig::default()
    }
}

pub fn cp23_train() -> TrainConfig {
    TrainConfig::standard_schedule(200)
}

pub fn cp23_cpd(seed: u64) -> CpdConfig {
    CpdConfig::new(2000, 200, 6, seed)
}

/// Reduced change-point problem: p = 8, 2000 kept rows, change at 1000.
pub fn cp_small() -> ChangePointSpec {
    ChangePointSpec {
        p: 8,
        n_keep: 2_000,
        change_at_raw: 1_500,
        pre_mean: vec![0.0; 8],
        post_mean: vec![2.0; 8],
        ..cp23()
    }
}

pub fn cp_small_model() -> ModelConfig {
    ModelConfig {
        latent_dim: 16,
        generator_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        ..ModelConfig::default()
    }
}

pub fn cp_small_train() -> TrainConfig {
    TrainConfig::standard_schedule(300)
}

pub fn cp_small_cpd(seed: u64) -> CpdConfig {
    CpdConfig::new(400, 50, 4, seed)
}

/// Scalar AR(1) with coefficient 0.5 and unit noise.
pub fn ar1_half() -> VarSpec {
    VarSpec {
        p: 1,
        lag_coeffs: vec![0.5],
        noise: NoiseSpec {
            mean: vec![0.0],
            cov_scale: 1.0,
        },
        init: InitSpec::Zeros,
        burn_in: 100,
        n_keep: 2_000,
    }
}

/// Scalar Gaussian random walk.
pub fn random_walk() -> VarSpec {
    VarSpec {
        lag_coeffs: vec![1.0],
        ..ar1_half()
    }
}
