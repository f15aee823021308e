//! Off-policy actor-critic with experience replay, capped importance
//! weights and a regularizer toward the behaviour policy.

mod replay;
mod run;
mod update;

pub use replay::{ReplayBuffer, Transition};
pub use run::{train, train_fixed, EpisodeMetrics, TrainError, TrainSpec, TrainSummary, METRICS_HEADER};
pub use update::{
    frozen_surrogate, importance_weight, surrogate_gradients, td_target, Learner, Target,
    UpdateStats,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub gamma: f64,
    /// `C` in `min(pi / p, C)`.
    pub importance_cap: f64,
    /// Policy learning rate `eta`.
    pub lr: f64,
    /// `eta' / eta`: weight of the critic term.
    pub critic_weight: f64,
    /// `lambda / eta`: weight of the behaviour-policy regularizer.
    pub regularizer_weight: f64,
    pub batch_size: usize,
    /// Environment steps between updates.
    pub update_period: usize,
    pub buffer_capacity: usize,
    pub rms_decay: f64,
    pub rms_eps: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            importance_cap: 10.0,
            lr: 0.001,
            critic_weight: 0.01,
            regularizer_weight: 1.0,
            batch_size: 128,
            update_period: 32,
            buffer_capacity: 50_000,
            rms_decay: 0.99,
            rms_eps: 1e-8,
        }
    }
}
