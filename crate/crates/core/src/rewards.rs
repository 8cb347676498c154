//! Information rewards: optimistic single-measurement entropy reduction,
//! priority weighting and linear time decay.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::grid::{entropy_unchecked, posterior, BeliefMap, CellIndex, SensorModel};

/// Cell posteriors recorded by one tree node.
pub type Delta = FxHashMap<CellIndex, f64>;

/// Linear decay from 1 down to a floor `gamma`, reached at `(gamma - 1) / beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayFunction {
    pub gamma: f64,
    pub beta: f64,
}

impl Default for DecayFunction {
    /// No decay.
    fn default() -> Self {
        Self {
            gamma: 1.0,
            beta: 0.0,
        }
    }
}

impl DecayFunction {
    pub fn new(gamma: f64, beta: f64) -> Self {
        Self { gamma, beta }
    }

    /// Time at which the floor is reached; infinite when decay is disabled.
    pub fn gamma_t(&self) -> f64 {
        if self.beta < 0.0 {
            (self.gamma - 1.0) / self.beta
        } else {
            f64::INFINITY
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t >= self.gamma_t() {
            self.gamma
        } else {
            self.beta * t + 1.0
        }
    }
}

pub fn decay_value(decay: &DecayFunction, t: f64) -> f64 {
    decay.value(t)
}

/// Entropy reduction of one measurement whose sign is the most likely one
/// (positive iff `p >= 0.5`), and the resulting posterior.
#[inline]
pub fn optimistic_cell_reward(p: f64, range: f64, model: &SensorModel) -> (f64, f64) {
    let (tpr, tnr) = model.lookup_rates(range);
    let post = posterior(p, p >= 0.5, tpr, tnr);
    (entropy_unchecked(p) - entropy_unchecked(post), post)
}

pub fn weighted_cell_reward(
    p: f64,
    range: f64,
    model: &SensorModel,
    priority: f64,
    t: f64,
    decay: &DecayFunction,
) -> f64 {
    priority * decay.value(t) * optimistic_cell_reward(p, range, model).0
}

/// Everything reward evaluation needs besides the tree.
#[derive(Clone, Copy, Debug)]
pub struct RewardContext<'a> {
    pub base: &'a BeliefMap,
    pub model: &'a SensorModel,
    pub decay: DecayFunction,
    /// Converts path cost to arrival time.
    pub speed: f64,
}

impl<'a> RewardContext<'a> {
    pub fn new(base: &'a BeliefMap, model: &'a SensorModel, decay: DecayFunction, speed: f64) -> Self {
        debug_assert!(speed > 0.0);
        Self {
            base,
            model,
            decay,
            speed,
        }
    }

    pub fn time_at(&self, cost: f64) -> f64 {
        cost / self.speed
    }
}

/// Applies one optimistic measurement to every footprint cell, starting from
/// the beliefs returned by `lookup`. Returns the new posteriors and the
/// summed weighted reward.
pub fn node_information(
    mut lookup: impl FnMut(CellIndex) -> f64,
    footprint: &[(CellIndex, f64)],
    ctx: &RewardContext<'_>,
    t_at_node: f64,
) -> (Delta, f64) {
    let gamma = ctx.decay.value(t_at_node);
    let mut delta = Delta::with_capacity_and_hasher(footprint.len(), Default::default());
    let mut gain = 0.0;
    for &(idx, range) in footprint {
        let p = lookup(idx);
        let (r, post) = optimistic_cell_reward(p, range, ctx.model);
        gain += ctx.base.priority(idx) * gamma * r;
        delta.insert(idx, post);
    }
    (delta, gain)
}
