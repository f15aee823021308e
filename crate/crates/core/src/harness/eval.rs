use crate::env::{generate, EnvError, EnvKind, GridWorld, Outcome};
use crate::grid::Action;
use crate::oracle::{shortest_path, Metric};
use crate::planners::{choose_depth, Planner, ValueMap};
use crate::tensor::TensorError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Evaluation seeds used when none are given.
pub const DEFAULT_EVAL_SEEDS: [u64; 5] = [1001, 1002, 1003, 1004, 1005];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Something that picks moves in a world.
pub trait Policy {
    /// Called once before each episode.
    fn reset(&mut self, _world: &GridWorld) {}

    fn act(&mut self, world: &GridWorld) -> Result<Action, EvalError>;
}

/// Greedy argmax over a planner's logits. The recurrence is recomputed only
/// when the observation changes.
pub struct GreedyPlanner<'a> {
    planner: &'a Planner<f32>,
    cache: Option<(Arc<crate::env::GridObservation>, ValueMap)>,
}

impl<'a> GreedyPlanner<'a> {
    pub fn new(planner: &'a Planner<f32>) -> Self {
        Self {
            planner,
            cache: None,
        }
    }
}

impl Policy for GreedyPlanner<'_> {
    fn reset(&mut self, _world: &GridWorld) {
        self.cache = None;
    }

    fn act(&mut self, world: &GridWorld) -> Result<Action, EvalError> {
        let grid = world.observe_grid();
        let fresh = !matches!(&self.cache, Some((g, _)) if **g == grid);
        if fresh {
            let depth = choose_depth(world.width(), world.height());
            let map = self.planner.value_map(&grid, depth)?;
            self.cache = Some((Arc::new(grid), map));
        }
        let (g, map) = self.cache.as_ref().expect("filled above");
        Ok(self.planner.policy_at(map, g, world.agent())?.greedy())
    }
}

/// Uniformly random moves.
pub struct RandomPolicy(pub ChaCha8Rng);

impl Policy for RandomPolicy {
    fn act(&mut self, _world: &GridWorld) -> Result<Action, EvalError> {
        Ok(Action::from_index(self.0.gen_range(0..Action::COUNT)).expect("index below COUNT"))
    }
}

/// Follows a hop-optimal path to the goal around walls and wall blocks.
pub struct ShortestPathPolicy;

impl Policy for ShortestPathPolicy {
    fn act(&mut self, world: &GridWorld) -> Result<Action, EvalError> {
        let path = shortest_path(&world.blocked_mask(), world.agent(), world.goal(), Metric::Hops);
        let Some(&next) = path.path.get(1) else {
            return Ok(Action::North);
        };
        Ok(Action::ALL
            .into_iter()
            .find(|&a| world.agent().step(a, world.width(), world.height()) == Some(next))
            .expect("path cells are adjacent"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub steps: u32,
    pub reward: f64,
    pub optimal_hops: usize,
}

impl EpisodeResult {
    pub fn win(&self) -> bool {
        self.outcome == Outcome::Win
    }

    /// Steps beyond the shortest path; meaningful for wins.
    pub fn distance_to_optimal(&self) -> f64 {
        self.steps as f64 - self.optimal_hops as f64
    }
}

/// Plays one episode to termination.
pub fn run_episode(world: &mut GridWorld, policy: &mut impl Policy) -> Result<EpisodeResult, EvalError> {
    let optimal_hops = world.optimal_hops().unwrap_or(0);
    policy.reset(world);
    let mut reward = 0.0;
    loop {
        let a = policy.act(world)?;
        let r = world.step(a)?;
        reward += r.reward;
        if r.terminal {
            return Ok(EpisodeResult {
                outcome: r.outcome,
                steps: world.step_count(),
                reward,
                optimal_hops,
            });
        }
    }
}

/// Results for one map size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub size: usize,
    pub episodes: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// Mean of `steps - optimal hops` over won episodes; `None` without wins.
    pub mean_distance_to_optimal: Option<f64>,
    /// Per-seed mean episode reward: smallest, average and largest over seeds.
    pub reward_min: f64,
    pub reward_mean: f64,
    pub reward_max: f64,
    /// Win rate of each seed, in seed order.
    pub seed_win_rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: EnvKind,
    pub episodes_per_seed: usize,
    pub seeds: Vec<u64>,
    pub sizes: Vec<SizeReport>,
}

impl EvalReport {
    pub fn size(&self, size: usize) -> Option<&SizeReport> {
        self.sizes.iter().find(|s| s.size == size)
    }
}

/// The maps of one evaluation seed and size: a pure function of both.
pub fn eval_worlds(kind: EnvKind, size: usize, seed: u64) -> impl Iterator<Item = Result<GridWorld, EnvError>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ size as u64);
    std::iter::repeat_with(move || generate(kind, size, size, &mut rng))
}

/// Runs `episodes` fresh maps per seed and size, using a new policy from
/// `make_policy` for each seed.
pub fn evaluate<P: Policy>(
    kind: EnvKind,
    sizes: &[usize],
    episodes: usize,
    seeds: &[u64],
    mut make_policy: impl FnMut(u64) -> P,
) -> Result<EvalReport, EvalError> {
    let mut reports = Vec::new();
    for &size in sizes {
        let (mut wins, mut dist_sum) = (0usize, 0.0);
        let mut seed_rewards = Vec::new();
        let mut seed_win_rates = Vec::new();
        for &seed in seeds {
            let mut policy = make_policy(seed);
            let (mut reward, mut seed_wins) = (0.0, 0);
            for world in eval_worlds(kind, size, seed).take(episodes) {
                let res = run_episode(&mut world?, &mut policy)?;
                reward += res.reward;
                if res.win() {
                    seed_wins += 1;
                    dist_sum += res.distance_to_optimal();
                }
            }
            wins += seed_wins;
            seed_rewards.push(reward / episodes.max(1) as f64);
            seed_win_rates.push(seed_wins as f64 / episodes.max(1) as f64);
        }
        let total = episodes * seeds.len();
        let n = seed_rewards.len().max(1) as f64;
        reports.push(SizeReport {
            size,
            episodes: total,
            wins,
            win_rate: if total == 0 { 0.0 } else { wins as f64 / total as f64 },
            mean_distance_to_optimal: (wins > 0).then(|| dist_sum / wins as f64),
            reward_min: seed_rewards.iter().copied().fold(f64::INFINITY, f64::min),
            reward_mean: seed_rewards.iter().sum::<f64>() / n,
            reward_max: seed_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            seed_win_rates,
        });
    }
    Ok(EvalReport {
        env: kind,
        episodes_per_seed: episodes,
        seeds: seeds.to_vec(),
        sizes: reports,
    })
}

/// Greedy evaluation of a planner.
pub fn evaluate_planner(
    planner: &Planner<f32>,
    kind: EnvKind,
    sizes: &[usize],
    episodes: usize,
    seeds: &[u64],
) -> Result<EvalReport, EvalError> {
    evaluate(kind, sizes, episodes, seeds, |_| GreedyPlanner::new(planner))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_path_policy_is_perfect_on_static_maps() {
        let r = evaluate(EnvKind::Static, &[8, 12], 20, &[1, 2], |_| ShortestPathPolicy).unwrap();
        for s in &r.sizes {
            assert_eq!(s.episodes, 40);
            assert_eq!(s.win_rate, 1.0);
            assert_eq!(s.mean_distance_to_optimal, Some(0.0));
        }
    }

    #[test]
    fn random_policy_rarely_wins_on_16x16() {
        let r = evaluate(EnvKind::Static, &[16], 100, &DEFAULT_EVAL_SEEDS, |s| {
            RandomPolicy(ChaCha8Rng::seed_from_u64(s))
        })
        .unwrap();
        let s = r.size(16).unwrap();
        assert_eq!(s.episodes, 500);
        assert!(s.win_rate < 0.10, "{}", s.win_rate);
        assert!(s.reward_min <= s.reward_mean && s.reward_mean <= s.reward_max);
    }

    #[test]
    fn eval_maps_are_reproducible() {
        let a: Vec<_> = eval_worlds(EnvKind::Static, 8, 3).take(3).map(|w| w.unwrap().agent()).collect();
        let b: Vec<_> = eval_worlds(EnvKind::Static, 8, 3).take(3).map(|w| w.unwrap().agent()).collect();
        assert_eq!(a, b);
    }
}
