use super::{EnvError, GridWorld};
use crate::oracle::hop_distances;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cap on the optimal path length of training episodes, raised every
/// `period` episodes until it reaches `ceiling`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub initial: usize,
    pub increment: usize,
    pub period: usize,
    pub ceiling: usize,
}

impl CurriculumSchedule {
    /// 4 steps to start, +2 every 2500 episodes, capped at the map diagonal.
    pub fn for_map(width: usize, height: usize) -> Self {
        Self {
            initial: 4,
            increment: 2,
            period: 2500,
            ceiling: width.max(height),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurriculumState {
    pub schedule: CurriculumSchedule,
    pub bound: usize,
    pub episodes_done: usize,
}

impl CurriculumState {
    pub fn new(schedule: CurriculumSchedule) -> Self {
        Self {
            schedule,
            bound: schedule.initial.min(schedule.ceiling),
            episodes_done: 0,
        }
    }

    /// Once the bound reaches the ceiling every map is accepted.
    pub fn saturated(&self) -> bool {
        self.bound >= self.schedule.ceiling
    }

    pub fn accepts(&self, optimal_hops: usize) -> bool {
        self.saturated() || optimal_hops <= self.bound
    }

    pub fn record_episode(&mut self) {
        self.episodes_done += 1;
        let s = self.schedule;
        let steps = if s.period == 0 { 0 } else { self.episodes_done / s.period };
        let bound = s.initial + s.increment * steps;
        self.bound = bound.min(s.ceiling).max(self.bound);
    }
}

/// Accept iff the agent-to-goal optimal hop count is within the current bound.
pub fn curriculum_filter(world: &GridWorld, curriculum: &CurriculumState) -> bool {
    world
        .optimal_hops()
        .is_some_and(|h| curriculum.accepts(h))
}

/// Re-draws agent and goal so that the optimal hop count is within the
/// current bound: the agent uniformly over free cells, then the goal uniformly
/// over free cells at hop distance `1..=bound` from it. Leaves the world alone
/// once the curriculum is saturated.
pub fn place_within_bound(
    world: &mut GridWorld,
    curriculum: &CurriculumState,
    rng: &mut impl Rng,
) -> Result<(), EnvError> {
    if curriculum.saturated() {
        return Ok(());
    }
    let blocked = world.blocked_mask();
    let occupied: Vec<_> = world.entities().iter().map(|e| e.pos).collect();
    let free: Vec<_> = blocked
        .cells()
        .filter(|c| !blocked[*c] && !occupied.contains(c))
        .collect();
    for _ in 0..100 {
        let agent = free[rng.gen_range(0..free.len())];
        let dist = hop_distances(&blocked, agent);
        let goals: Vec<_> = free
            .iter()
            .copied()
            .filter(|&c| dist[c].is_some_and(|d| d >= 1 && d <= curriculum.bound))
            .collect();
        if goals.is_empty() {
            continue;
        }
        let goal = goals[rng.gen_range(0..goals.len())];
        return world.set_endpoints(agent, goal);
    }
    Err(EnvError::Unsatisfiable {
        kind: world.kind(),
        attempts: 100,
    })
}
