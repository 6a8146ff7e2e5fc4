/// Binary sum tree over a power-of-two number of leaves.
///
/// Node 1 is the root; node `i` has children `2i` and `2i + 1`; leaves occupy
/// `capacity..2 * capacity`. Every internal node is recomputed as the sum of
/// its children on update, so the structural invariant holds exactly.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// A tree with at least `min_leaves` leaves, all zero.
    pub fn new(min_leaves: usize) -> Self {
        let capacity = min_leaves.max(1).next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    pub fn set(&mut self, leaf: usize, value: f64) {
        debug_assert!(value >= 0.0 && value.is_finite());
        let mut node = self.capacity + leaf;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative-priority interval contains `mass`.
    ///
    /// Never returns a zero-priority leaf while the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut mass = mass.clamp(0.0, self.total());
        let mut node = 1;
        while node < self.capacity {
            let left = 2 * node;
            let right = left + 1;
            if mass < self.nodes[left] || self.nodes[right] <= 0.0 {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = right;
            }
        }
        node - self.capacity
    }

    /// Raw node array (index 0 unused), for invariant checks.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}
