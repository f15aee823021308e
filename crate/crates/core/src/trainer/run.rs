use super::update::UpdateError;
use super::{Hyperparams, Learner, ReplayBuffer, Transition};
use crate::env::{
    generate, place_within_bound, CurriculumSchedule, CurriculumState, EnvError, EnvKind, GridWorld,
    Outcome,
};
use crate::planners::{choose_depth, ValueMap};
use crate::tensor::TensorError;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

pub const METRICS_HEADER: &str = "episode,steps,reward,win,curriculum_bound,wall_clock_s";

/// What to train on and for how long.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub env: EnvKind,
    /// Square maps with sides drawn uniformly from `min_size..=max_size`.
    pub min_size: usize,
    pub max_size: usize,
    pub episodes: usize,
    pub seed: u64,
    pub curriculum: bool,
    pub hp: Hyperparams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: u32,
    pub reward: f64,
    pub win: bool,
    pub curriculum_bound: usize,
    pub wall_clock_s: f64,
}

impl EpisodeMetrics {
    /// One line matching [`METRICS_HEADER`], without the newline.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.episode,
            self.steps,
            self.reward,
            u8::from(self.win),
            self.curriculum_bound,
            self.wall_clock_s
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSummary {
    pub episodes: usize,
    pub env_steps: u64,
    pub updates: u64,
    pub wins: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("training aborted in episode {episode}: non-finite values after update {update}\n{dump}")]
    NonFinite { episode: usize, update: u64, dump: String },
}

impl TrainSpec {
    fn validate(&self) -> Result<(), TrainError> {
        if self.min_size < 6 || self.min_size > self.max_size {
            return Err(TrainError::Spec(format!(
                "map sizes {}..={} (need 6 <= min <= max)",
                self.min_size, self.max_size
            )));
        }
        let hp = &self.hp;
        if hp.batch_size == 0 || hp.update_period == 0 || hp.buffer_capacity == 0 {
            return Err(TrainError::Spec("batch size, update period and buffer capacity must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `spec.episodes` episodes of collection, updating every
/// `update_period` environment steps once the buffer holds a full batch.
/// `on_episode` sees every episode's metrics in order.
pub fn train(
    spec: &TrainSpec,
    learner: &mut Learner,
    on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<TrainSummary, TrainError> {
    spec.validate()?;
    run(spec, None, learner, on_episode)
}

/// Like [`train`], but every episode restarts from a copy of `world`. The
/// spec's map sizes and curriculum are ignored.
pub fn train_fixed(
    spec: &TrainSpec,
    world: &GridWorld,
    learner: &mut Learner,
    on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<TrainSummary, TrainError> {
    let spec = TrainSpec {
        curriculum: false,
        min_size: world.width().max(world.height()),
        max_size: world.width().max(world.height()),
        ..spec.clone()
    };
    run(&spec, Some(world), learner, on_episode)
}

fn run(
    spec: &TrainSpec,
    fixed: Option<&GridWorld>,
    learner: &mut Learner,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<TrainSummary, TrainError> {
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut map_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut act_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut batch_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut buffer = ReplayBuffer::new(spec.hp.buffer_capacity);
    let mut curriculum = CurriculumState::new(CurriculumSchedule::for_map(spec.max_size, spec.max_size));
    let mut summary = TrainSummary::default();
    let start = Instant::now();

    for episode in 0..spec.episodes {
        let mut world = match fixed {
            Some(w) => w.clone(),
            None => {
                let side = map_rng.gen_range(spec.min_size..=spec.max_size);
                generate(spec.env, side, side, &mut map_rng)?
            }
        };
        if spec.curriculum {
            place_within_bound(&mut world, &curriculum, &mut map_rng)?;
        }
        let depth = choose_depth(world.width(), world.height());
        let mut obs = Arc::new(world.observe_grid());
        let mut cache: Option<ValueMap> = None;
        let mut reward = 0.0;
        let outcome = loop {
            let agent = world.agent();
            let seen = Arc::clone(&obs);
            let map = match cache.take() {
                Some(m) => m,
                None => learner.planner.value_map(&obs, depth)?,
            };
            let policy = learner.planner.policy_at(&map, &obs, agent)?;
            let action = policy.sample(&mut act_rng);
            let res = world.step(action)?;
            reward += res.reward;
            let next = match res.outcome {
                Outcome::Win | Outcome::WallDeath | Outcome::Caught => None,
                Outcome::Ongoing | Outcome::Timeout => {
                    let grid = world.observe_grid();
                    if *obs == grid {
                        cache = Some(map);
                    } else {
                        obs = Arc::new(grid);
                    }
                    Some((obs.clone(), world.agent()))
                }
            };
            buffer.push(Transition {
                obs: seen,
                agent,
                action,
                reward: res.reward,
                probs: policy.probs,
                next,
            });
            summary.env_steps += 1;
            if summary.env_steps % spec.hp.update_period as u64 == 0
                && buffer.len() >= spec.hp.batch_size
            {
                let batch = buffer.sample(spec.hp.batch_size, &mut batch_rng);
                learner.update(&batch).map_err(|e| match e {
                    UpdateError::Tensor(t) => TrainError::Tensor(t),
                    UpdateError::NonFinite { update, dump } => TrainError::NonFinite {
                        episode,
                        update,
                        dump,
                    },
                })?;
                summary.updates += 1;
                cache = None;
            }
            if res.terminal {
                break res.outcome;
            }
        };
        let win = outcome == Outcome::Win;
        summary.episodes += 1;
        summary.wins += usize::from(win);
        on_episode(&EpisodeMetrics {
            episode,
            steps: world.step_count(),
            reward,
            win,
            curriculum_bound: if spec.curriculum { curriculum.bound } else { spec.max_size },
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
        curriculum.record_episode();
    }
    Ok(summary)
}
