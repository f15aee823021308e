use crate::env::GridObservation;
use crate::grid::{Action, Cell};
use rand::Rng;
use std::sync::Arc;

/// One environment step as seen by the behaviour policy.
#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Arc<GridObservation>,
    pub agent: Cell,
    pub action: Action,
    pub reward: f64,
    /// Full behaviour distribution at collection time.
    pub probs: [f32; Action::COUNT],
    /// Successor state; `None` when the episode ended in a terminal state.
    pub next: Option<(Arc<GridObservation>, Cell)>,
}

impl Transition {
    pub fn behaviour_prob(&self) -> f64 {
        self.probs[self.action.index()] as f64
    }
}

/// Ring buffer over the most recent transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = t;
        }
        self.inserted += 1;
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}
