use std::collections::VecDeque;

use rand::Rng;

use crate::Tensor;

/// One bandit decision and its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Tensor,
    pub action: usize,
    pub reward: u8,
    pub next_state: Tensor,
    pub terminal: bool,
}

/// Bounded FIFO experience buffer.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            inserted: 0,
        }
    }

    /// Stores a transition, evicting the oldest one when full.
    pub fn push(&mut self, transition: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(transition);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of pushes over the buffer's lifetime.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, size: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.buffer.is_empty() {
            return Vec::new();
        }
        (0..size)
            .map(|_| &self.buffer[rng.random_range(0..self.buffer.len())])
            .collect()
    }
}
