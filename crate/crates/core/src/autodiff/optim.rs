use super::{Gradients, Group, GroupSet, ParamStore};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Adagrad with per-parameter squared-gradient accumulators.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub epsilon: f64,
    accumulators: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            epsilon: ADAGRAD_EPSILON,
            accumulators: Vec::new(),
        }
    }

    pub fn accumulator(&self, index: usize) -> Option<&[f64]> {
        self.accumulators.get(index).map(Vec::as_slice).filter(|a| !a.is_empty())
    }

    /// Applies one update to every parameter whose group is in `active`.
    /// Parameters without a gradient are left alone.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, active: GroupSet) {
        if self.accumulators.len() < store.len() {
            self.accumulators.resize(store.len(), Vec::new());
        }
        for (id, g) in grads.iter() {
            if !active.contains(store.param(id).group) {
                continue;
            }
            let acc = &mut self.accumulators[id.index()];
            let value = store.get_mut(id);
            assert_eq!(value.len(), g.len(), "gradient shape for parameter {}", id.index());
            if acc.is_empty() {
                acc.resize(value.len(), 0.0);
            }
            for ((p, a), &gi) in value.data_mut().iter_mut().zip(acc.iter_mut()).zip(g.data()) {
                *a += gi * gi;
                *p -= self.learning_rate * gi / (a.sqrt() + self.epsilon);
            }
        }
    }
}

/// Active groups at `step` under the alternating block-coordinate schedule
/// with half-period `em_steps`. A zero half-period disables alternation.
pub fn coordinate_schedule(step: u64, em_steps: u64) -> GroupSet {
    if em_steps == 0 {
        return GroupSet::ALL;
    }
    if (step / em_steps) % 2 == 0 {
        GroupSet::of(&[Group::Embed, Group::Other])
    } else {
        GroupSet::of(&[Group::Chi, Group::Other])
    }
}
