//! Grid-world navigation environments.
//!
//! An episode ends when the agent reaches the goal (+1), moves into a wall or
//! off the grid (-1), is caught by a moving entity (-1), or runs out of steps.
//! Every other move costs `0.01` times its Euclidean length.

mod curriculum;
mod generate;
mod mapfile;

pub use curriculum::{curriculum_filter, place_within_bound, CurriculumSchedule, CurriculumState};
pub use generate::{adversary_count, generate, max_steps_for, ENTITY_RATIO, STATIC_WALL_RATIO};
pub use mapfile::{parse_map, write_map, MapFormatError};

use crate::grid::{Action, Cell, Grid};
use crate::oracle::{self, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

pub const REWARD_WIN: f64 = 1.0;
pub const REWARD_DEATH: f64 = -1.0;
pub const MOVE_COST: f64 = 0.01;

/// Observation planes: wall, goal, noop entity, directional entity, adversarial entity.
pub const OBS_CHANNELS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("map {0}x{1} is too small; need at least 6x6")]
    TooSmall(usize, usize),
    #[error("could not generate a valid {kind} map after {attempts} attempts")]
    Unsatisfiable { kind: EnvKind, attempts: usize },
    #[error("episode already ended ({0:?})")]
    EpisodeOver(Outcome),
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Static,
    Avalanche,
    EnemiesOnly,
    Mixed,
    Adversarial,
    /// Adversarial A* chasers on 10% of the interior plus 10% walls/noop entities.
    MixedAppendix,
}

impl EnvKind {
    pub const ALL: [EnvKind; 6] = [
        EnvKind::Static,
        EnvKind::Avalanche,
        EnvKind::EnemiesOnly,
        EnvKind::Mixed,
        EnvKind::Adversarial,
        EnvKind::MixedAppendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Static => "static",
            EnvKind::Avalanche => "avalanche",
            EnvKind::EnemiesOnly => "enemies_only",
            EnvKind::Mixed => "mixed",
            EnvKind::Adversarial => "adversarial",
            EnvKind::MixedAppendix => "mixed_appendix",
        }
    }

    pub fn is_dynamic(self) -> bool {
        self != EnvKind::Static
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown environment kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntityKind {
    /// Static obstacle placed as an entity.
    WallBlock,
    /// Moves in a uniformly random direction with probability `eps`.
    Noop { eps: f64 },
    /// Moves in `dir` with probability `eps`.
    Directional { eps: f64, dir: Action },
    /// Chases the agent along A* paths.
    Adversarial,
}

impl EntityKind {
    fn channel(self) -> usize {
        match self {
            EntityKind::WallBlock => 0,
            EntityKind::Noop { .. } => 2,
            EntityKind::Directional { .. } => 3,
            EntityKind::Adversarial => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entity {
    pub pos: Cell,
    pub kind: EntityKind,
    pub alive: bool,
}

impl Entity {
    pub fn new(pos: Cell, kind: EntityKind) -> Self {
        Self {
            pos,
            kind,
            alive: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Ongoing,
    Win,
    WallDeath,
    Caught,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminal: bool,
    pub outcome: Outcome,
}

impl StepResult {
    fn ongoing(reward: f64) -> Self {
        Self {
            reward,
            terminal: false,
            outcome: Outcome::Ongoing,
        }
    }

    fn end(reward: f64, outcome: Outcome) -> Self {
        Self {
            reward,
            terminal: true,
            outcome,
        }
    }
}

/// One-hot feature planes `[OBS_CHANNELS, height, width]`, agent excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct GridObservation {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GridObservation {
    /// Wraps `[OBS_CHANNELS, height, width]` planes.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, EnvError> {
        if data.len() != OBS_CHANNELS * width * height {
            return Err(EnvError::Invalid(format!(
                "observation of {width}x{height} needs {} values, got {}",
                OBS_CHANNELS * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, cell: Cell) -> f32 {
        self.data[(c * self.height + cell.y) * self.width + cell.x]
    }

    /// The 3x3 neighborhood of `center` for every channel, zero outside the
    /// map, ordered channel-major then row-major.
    pub fn patch3x3(&self, center: Cell) -> [f32; 9 * OBS_CHANNELS] {
        let mut out = [0.0; 9 * OBS_CHANNELS];
        let mut k = 0;
        for c in 0..OBS_CHANNELS {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let x = center.x as isize + dx;
                    let y = center.y as isize + dy;
                    if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
                        out[k] = self.get(c, Cell::new(x as usize, y as usize));
                    }
                    k += 1;
                }
            }
        }
        out
    }
}

/// What the agent sees: the feature planes plus its own position.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub grid: Arc<GridObservation>,
    pub agent: Cell,
}

/// Complete environment state.
#[derive(Clone, Debug)]
pub struct GridWorld {
    kind: EnvKind,
    walls: Grid<bool>,
    goal: Cell,
    agent: Cell,
    entities: Vec<Entity>,
    step_count: u32,
    max_steps: u32,
    seed: u64,
    rng: ChaCha8Rng,
    outcome: Outcome,
}

/// Decision of a single entity for one tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntityMove {
    Stay,
    MoveTo(Cell),
    /// Left the playable area; re-enters at the given cell or disappears.
    Respawn(Option<Cell>),
}

impl GridWorld {
    /// Builds a world from explicit parts. `max_steps` is derived from the
    /// shortest path unless the goal is unreachable, which is an error.
    pub fn from_parts(
        kind: EnvKind,
        walls: Grid<bool>,
        agent: Cell,
        goal: Cell,
        entities: Vec<Entity>,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let mut world = Self {
            kind,
            walls,
            goal,
            agent,
            entities,
            step_count: 0,
            max_steps: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            outcome: Outcome::Ongoing,
        };
        world.validate()?;
        let hops = world
            .optimal_hops()
            .ok_or_else(|| EnvError::Invalid("goal unreachable from agent".into()))?;
        world.max_steps = max_steps_for(hops);
        Ok(world)
    }

    fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Invalid(m));
        for (name, c) in [("agent", self.agent), ("goal", self.goal)] {
            if !self.walls.contains(c) {
                return bad(format!("{name} {c} outside the map"));
            }
            if self.is_blocked(c) {
                return bad(format!("{name} {c} on a wall"));
            }
        }
        if self.agent == self.goal {
            return bad("agent starts on the goal".into());
        }
        let mut seen = std::collections::HashSet::new();
        for e in self.entities.iter().filter(|e| e.alive) {
            if !self.walls.contains(e.pos) || self.walls[e.pos] {
                return bad(format!("entity at {} not on a free cell", e.pos));
            }
            if e.pos == self.agent || e.pos == self.goal {
                return bad(format!("entity at {} overlaps agent or goal", e.pos));
            }
            if !seen.insert(e.pos) {
                return bad(format!("two entities share {}", e.pos));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.walls.width()
    }

    pub fn height(&self) -> usize {
        self.walls.height()
    }

    pub fn walls(&self) -> &Grid<bool> {
        &self.walls
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn agent(&self) -> Cell {
        self.agent
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome != Outcome::Ongoing
    }

    fn entity_at(&self, c: Cell) -> Option<usize> {
        self.entities.iter().position(|e| e.alive && e.pos == c)
    }

    fn is_wall_block(&self, c: Cell) -> bool {
        self.entity_at(c)
            .is_some_and(|i| self.entities[i].kind == EntityKind::WallBlock)
    }

    /// Wall cell or static wall-block entity.
    pub fn is_blocked(&self, c: Cell) -> bool {
        self.walls[c] || self.is_wall_block(c)
    }

    /// Walls together with wall-block entities.
    pub fn blocked_mask(&self) -> Grid<bool> {
        let mut mask = self.walls.clone();
        for e in &self.entities {
            if e.alive && e.kind == EntityKind::WallBlock {
                mask[e.pos] = true;
            }
        }
        mask
    }

    /// Hop count of the shortest agent-to-goal path, ignoring moving entities.
    pub fn optimal_hops(&self) -> Option<usize> {
        let r = oracle::shortest_path(&self.blocked_mask(), self.agent, self.goal, Metric::Hops);
        r.reachable.then_some(r.steps)
    }

    /// Moves agent and goal; `max_steps` is recomputed.
    pub fn set_endpoints(&mut self, agent: Cell, goal: Cell) -> Result<(), EnvError> {
        let (old_agent, old_goal) = (self.agent, self.goal);
        self.agent = agent;
        self.goal = goal;
        let hops = self.validate().ok().and_then(|_| self.optimal_hops());
        match hops {
            Some(h) => {
                self.max_steps = max_steps_for(h);
                Ok(())
            }
            None => {
                self.agent = old_agent;
                self.goal = old_goal;
                Err(EnvError::Invalid(format!("endpoints {agent} -> {goal} not usable")))
            }
        }
    }

    /// Draws a new agent/goal pair uniformly over distinct free cells.
    pub fn resample_endpoints(&mut self, rng: &mut impl Rng) -> Result<(), EnvError> {
        let free: Vec<Cell> = self
            .walls
            .cells()
            .filter(|&c| !self.is_blocked(c) && self.entity_at(c).is_none())
            .collect();
        if free.len() < 2 {
            return Err(EnvError::Invalid("fewer than two free cells".into()));
        }
        for _ in 0..1000 {
            let a = free[rng.gen_range(0..free.len())];
            let g = free[rng.gen_range(0..free.len())];
            if a != g && self.set_endpoints(a, g).is_ok() {
                return Ok(());
            }
        }
        Err(EnvError::Unsatisfiable {
            kind: self.kind,
            attempts: 1000,
        })
    }

    pub fn observe_grid(&self) -> GridObservation {
        let (w, h) = (self.width(), self.height());
        let n = w * h;
        let mut data = vec![0.0f32; OBS_CHANNELS * n];
        for (i, &wall) in self.walls.as_slice().iter().enumerate() {
            if wall {
                data[i] = 1.0;
            }
        }
        data[n + self.walls.index(self.goal)] = 1.0;
        for e in self.entities.iter().filter(|e| e.alive) {
            data[e.kind.channel() * n + self.walls.index(e.pos)] = 1.0;
        }
        GridObservation {
            width: w,
            height: h,
            data,
        }
    }

    pub fn observe(&self) -> Observation {
        Observation {
            grid: Arc::new(self.observe_grid()),
            agent: self.agent,
        }
    }

    /// Advances the world by one agent action followed by one tick of every
    /// entity in list order.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::EpisodeOver(self.outcome));
        }
        self.step_count += 1;
        let result = self.resolve(action);
        let result = if !result.terminal && self.step_count >= self.max_steps {
            StepResult::end(result.reward, Outcome::Timeout)
        } else {
            result
        };
        self.outcome = result.outcome;
        Ok(result)
    }

    fn resolve(&mut self, action: Action) -> StepResult {
        let target = match self.agent.step(action, self.width(), self.height()) {
            Some(t) if !self.is_blocked(t) => t,
            _ => return StepResult::end(REWARD_DEATH, Outcome::WallDeath),
        };
        self.agent = target;
        if target == self.goal {
            return StepResult::end(REWARD_WIN, Outcome::Win);
        }
        if self.entity_at(target).is_some() {
            return StepResult::end(REWARD_DEATH, Outcome::Caught);
        }
        let reward = -MOVE_COST * action.cost();
        if self.tick_entities() {
            return StepResult::end(REWARD_DEATH, Outcome::Caught);
        }
        StepResult::ongoing(reward)
    }

    /// Moves every entity once; returns true if one lands on the agent.
    fn tick_entities(&mut self) -> bool {
        let mut rng = self.rng.clone();
        let mut caught = false;
        for i in 0..self.entities.len() {
            if !self.entities[i].alive {
                continue;
            }
            match entity_step(self, i, &mut rng) {
                EntityMove::Stay => {}
                EntityMove::MoveTo(c) => {
                    self.entities[i].pos = c;
                    caught |= c == self.agent;
                }
                EntityMove::Respawn(Some(c)) => self.entities[i].pos = c,
                EntityMove::Respawn(None) => self.entities[i].alive = false,
            }
        }
        self.rng = rng;
        caught
    }
}

fn on_border(c: Cell, w: usize, h: usize) -> bool {
    c.x == 0 || c.y == 0 || c.x + 1 == w || c.y + 1 == h
}

/// Decides where entity `index` goes this tick. Moves onto walls, the goal,
/// or other entities are cancelled; moves onto the agent are allowed.
/// Directional entities that would step onto the border ring re-enter on
/// the opposite side of the playable area.
pub fn entity_step(world: &GridWorld, index: usize, rng: &mut impl Rng) -> EntityMove {
    let e = world.entities[index];
    let (w, h) = (world.width(), world.height());
    let dir = match e.kind {
        EntityKind::WallBlock => None,
        EntityKind::Noop { eps } => {
            if rng.gen_bool(eps) {
                Some(Action::ALL[rng.gen_range(0..Action::COUNT)])
            } else {
                None
            }
        }
        EntityKind::Directional { eps, dir } => rng.gen_bool(eps).then_some(dir),
        EntityKind::Adversarial => {
            let others: Vec<Cell> = world
                .entities
                .iter()
                .enumerate()
                .filter(|&(j, o)| j != index && o.alive)
                .map(|(_, o)| o.pos)
                .collect();
            let mut mask = world.blocked_mask();
            mask[world.goal] = true;
            oracle::astar_next_move(&mask, &others, e.pos, world.agent)
        }
    };
    let Some(dir) = dir else { return EntityMove::Stay };
    let Some(target) = e.pos.step(dir, w, h) else {
        return EntityMove::Stay;
    };
    if matches!(e.kind, EntityKind::Directional { .. }) && on_border(target, w, h) {
        return EntityMove::Respawn(respawn_cell(world, dir, rng));
    }
    let free = !world.walls[target]
        && target != world.goal
        && world.entity_at(target).is_none_or(|j| j == index);
    if free {
        EntityMove::MoveTo(target)
    } else {
        EntityMove::Stay
    }
}

/// A random free cell on the interior edge opposite to the direction of travel.
fn respawn_cell(world: &GridWorld, dir: Action, rng: &mut impl Rng) -> Option<Cell> {
    let (w, h) = (world.width(), world.height());
    let (dx, dy) = dir.offset();
    let candidates: Vec<Cell> = if dy != 0 {
        let y = if dy > 0 { 1 } else { h - 2 };
        (1..w - 1).map(|x| Cell::new(x, y)).collect()
    } else {
        let x = if dx > 0 { 1 } else { w - 2 };
        (1..h - 1).map(|y| Cell::new(x, y)).collect()
    };
    let free: Vec<Cell> = candidates
        .into_iter()
        .filter(|&c| {
            !world.walls[c] && c != world.goal && c != world.agent && world.entity_at(c).is_none()
        })
        .collect();
    (!free.is_empty()).then(|| free[rng.gen_range(0..free.len())])
}
