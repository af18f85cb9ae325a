use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One step of experience. `next_state == None` marks a terminal step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Box<[f64]>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<Box<[f64]>>,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: usize, reward: f64, next_state: Option<Vec<f64>>) -> Self {
        Transition {
            state: state.into_boxed_slice(),
            action,
            reward,
            next_state: next_state.map(Vec::into_boxed_slice),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.next_state.is_none()
    }
}

/// Bounded FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            // grow lazily; capacities in the hundreds of thousands are common
            storage: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Append, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Uniform sample with replacement. Returns `None` (insufficient data)
    /// while the buffer holds fewer than `batch_size` transitions.
    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch_size == 0 || self.storage.len() < batch_size {
            return None;
        }
        let n = self.storage.len();
        Some((0..batch_size).map(|_| &self.storage[rng.gen_range(0..n)]).collect())
    }
}
