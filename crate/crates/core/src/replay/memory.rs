use std::io::Write;

use rand::Rng;

use super::{ReplayError, SumTree};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    /// True terminal: no bootstrapping from `next_observation`.
    pub terminal: bool,
    /// Episode cut by the time limit; targets still bootstrap.
    pub truncated: bool,
}

/// Handle to a stored transition; goes stale once the slot is overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleIndex {
    pub slot: usize,
    serial: u64,
}

#[derive(Debug)]
pub struct PrioritizedBatch<'a> {
    pub transitions: Vec<&'a Transition>,
    pub indices: Vec<SampleIndex>,
    /// Importance-sampling weights, normalised by the batch maximum.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Priorities {
    tree: SumTree,
    alpha: f64,
    epsilon: f64,
    /// Priority before the alpha exponent, per slot.
    raw: Vec<f64>,
    max_raw: f64,
}

/// FIFO ring buffer of transitions, optionally with proportional priorities.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    slots: Vec<Transition>,
    serials: Vec<u64>,
    cursor: usize,
    next_serial: u64,
    priorities: Option<Priorities>,
    stale_updates: usize,
}

impl ReplayMemory {
    pub fn uniform(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            serials: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
            next_serial: 0,
            priorities: None,
            stale_updates: 0,
        }
    }

    /// Proportional prioritized memory: `P(i) = p_i^alpha / sum_j p_j^alpha`,
    /// with `p = |td_error| + epsilon`.
    pub fn prioritized(capacity: usize, alpha: f64, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "priority floor must be positive");
        let mut mem = Self::uniform(capacity);
        mem.priorities = Some(Priorities {
            tree: SumTree::new(capacity),
            alpha,
            epsilon,
            raw: vec![0.0; capacity],
            max_raw: 1.0,
        });
        mem
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_prioritized(&self) -> bool {
        self.priorities.is_some()
    }

    /// Priority updates dropped because their slot had been overwritten.
    pub fn stale_updates(&self) -> usize {
        self.stale_updates
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.slots.len() < self.capacity { 0 } else { self.cursor };
        self.slots[split..].iter().chain(self.slots[..split].iter())
    }

    pub fn push(&mut self, transition: Transition) {
        let slot = self.cursor;
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
            self.serials.push(self.next_serial);
        } else {
            self.slots[slot] = transition;
            self.serials[slot] = self.next_serial;
        }
        self.next_serial += 1;
        self.cursor = (self.cursor + 1) % self.capacity;
        if let Some(pr) = &mut self.priorities {
            pr.raw[slot] = pr.max_raw;
            pr.tree.set(slot, pr.max_raw.powf(pr.alpha));
        }
    }

    fn index(&self, slot: usize) -> SampleIndex {
        SampleIndex {
            slot,
            serial: self.serials[slot],
        }
    }

    /// Handle to the transition currently held in `slot`.
    pub fn index_of(&self, slot: usize) -> Option<SampleIndex> {
        (slot < self.slots.len()).then(|| self.index(slot))
    }

    /// Independent uniform draws with replacement.
    pub fn sample_uniform<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, ReplayError> {
        Ok(self
            .sample_uniform_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.slots[i.slot])
            .collect())
    }

    pub fn sample_uniform_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<SampleIndex>, ReplayError> {
        if batch_size == 0 {
            return Ok(Vec::new());
        }
        if self.is_empty() {
            return Err(ReplayError::Empty {
                requested: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| self.index(rng.random_range(0..self.slots.len())))
            .collect())
    }

    /// Bootstrap resample for one ensemble member, drawn from that member's own stream.
    pub fn sample_bootstrap<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        member_rng: &mut R,
    ) -> Result<Vec<&Transition>, ReplayError> {
        self.sample_uniform(batch_size, member_rng)
    }

    /// Stratified proportional sampling: one draw from each of `batch_size`
    /// equal-mass segments of the priority total.
    pub fn sample_prioritized<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<PrioritizedBatch<'_>, ReplayError> {
        let pr = self.priorities.as_ref().ok_or(ReplayError::NotPrioritized)?;
        if batch_size > 0 && self.is_empty() {
            return Err(ReplayError::Empty {
                requested: batch_size,
            });
        }
        let total = pr.tree.total();
        let segment = total / batch_size.max(1) as f64;
        let n = self.len() as f64;
        let mut indices = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        for i in 0..batch_size {
            let mass = (i as f64 + rng.random::<f64>()) * segment;
            let slot = pr.tree.find(mass).min(self.len() - 1);
            let prob = pr.tree.get(slot) / total;
            weights.push((n * prob).powf(-beta));
            indices.push(self.index(slot));
        }
        let max_w = weights.iter().cloned().fold(0.0, f64::max);
        if max_w > 0.0 {
            weights.iter_mut().for_each(|w| *w /= max_w);
        }
        Ok(PrioritizedBatch {
            transitions: indices.iter().map(|i| &self.slots[i.slot]).collect(),
            indices,
            weights,
        })
    }

    /// Sampling probability of the transition in `slot` under the current priorities.
    pub fn probability(&self, slot: usize) -> Option<f64> {
        let pr = self.priorities.as_ref()?;
        Some(pr.tree.get(slot) / pr.tree.total())
    }

    /// Set `p = |td_error| + epsilon` for each still-live index.
    pub fn update_priorities(
        &mut self,
        indices: &[SampleIndex],
        td_errors: &[f64],
    ) -> Result<(), ReplayError> {
        let pr = self.priorities.as_mut().ok_or(ReplayError::NotPrioritized)?;
        for (idx, err) in indices.iter().zip(td_errors) {
            if idx.slot >= self.serials.len() || self.serials[idx.slot] != idx.serial {
                self.stale_updates += 1;
                continue;
            }
            let p = err.abs() + pr.epsilon;
            pr.raw[idx.slot] = p;
            pr.max_raw = pr.max_raw.max(p);
            pr.tree.set(idx.slot, p.powf(pr.alpha));
        }
        Ok(())
    }

    /// Raw (pre-exponent) priorities by slot.
    pub fn priorities(&self) -> Option<&[f64]> {
        self.priorities.as_ref().map(|p| &p.raw[..self.slots.len()])
    }

    pub fn sum_tree(&self) -> Option<&SumTree> {
        self.priorities.as_ref().map(|p| &p.tree)
    }

    /// Debug dump: `slot,priority,probability` rows.
    pub fn write_priorities_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "priority", "probability"])?;
        if let Some(raw) = self.priorities() {
            for (slot, p) in raw.iter().enumerate() {
                let prob = self.probability(slot).unwrap_or(0.0);
                w.write_record([slot.to_string(), p.to_string(), prob.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
