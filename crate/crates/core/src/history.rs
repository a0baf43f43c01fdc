use crate::error::{Error, Result};

/// Ring buffer of the most recent iterates `x_{k−capacity+1..=k}`.
#[derive(Debug, Clone)]
pub struct IterateHistory {
    slots: Vec<Vec<f64>>,
    newest: usize,
}

impl IterateHistory {
    pub fn new(x0: &[f64], capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            slots: vec![x0.to_vec(); capacity],
            newest: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Index of the newest stored iterate.
    pub fn newest(&self) -> usize {
        self.newest
    }

    pub fn get(&self, index: usize) -> Result<&[f64]> {
        if index > self.newest || self.newest - index >= self.slots.len() {
            return Err(Error::EvictedIterate { index, k: self.newest });
        }
        Ok(&self.slots[index % self.slots.len()])
    }

    /// Stores `x_{newest+1}`, evicting the oldest entry.
    pub fn push(&mut self, x: &[f64]) {
        self.newest += 1;
        let cap = self.slots.len();
        self.slots[self.newest % cap].copy_from_slice(x);
    }
}
