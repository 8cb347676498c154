//! Independent oracles and random fixtures shared by integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, TAU};

use ipp_core::path::Segment;
use ipp_core::{
    BeliefMap, CellIndex, DecayFunction, EdgeGeometry, Footprint, NodeId, PlanTree, Pose,
    RewardContext, SensorModel, TreeParams,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SPEED: f64 = 25.0;

/// Detection rates of the standard table, written out by hand.
pub fn rates(range: f64) -> (f64, f64) {
    if range > 600.0 {
        (0.5, 0.5)
    } else if range <= 200.0 {
        (0.9, 0.9)
    } else {
        let r = 0.9 + (range - 200.0) / 400.0 * (0.5 - 0.9);
        (r, r)
    }
}

pub fn entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    h
}

pub fn bayes(p: f64, positive: bool, tpr: f64, tnr: f64) -> f64 {
    let (num, den) = if positive {
        (tpr * p, tpr * p + (1.0 - tnr) * (1.0 - p))
    } else {
        ((1.0 - tpr) * p, (1.0 - tpr) * p + tnr * (1.0 - p))
    };
    if den <= 0.0 {
        p
    } else {
        num / den
    }
}

pub fn decay(d: &DecayFunction, t: f64) -> f64 {
    if d.beta < 0.0 && t >= (d.gamma - 1.0) / d.beta {
        d.gamma
    } else {
        d.beta * t + 1.0
    }
}

/// Base map, sensor and decay a random tree was scored against.
pub struct Scene {
    pub map: BeliefMap,
    pub sensor: SensorModel,
    pub decay: DecayFunction,
}

impl Scene {
    pub fn ctx(&self) -> RewardContext<'_> {
        RewardContext::new(&self.map, &self.sensor, self.decay, SPEED)
    }
}

pub fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> BeliefMap {
    let probs: Vec<f64> = (0..rows * cols)
        .map(|_| match rng.gen_range(0..6) {
            0 => 0.0,
            1 => 0.5,
            2 => 1.0,
            _ => rng.gen_range(0.0..1.0),
        })
        .collect();
    let mut map = BeliefMap::from_probabilities((0.0, 0.0), 10.0, rows, cols, probs).unwrap();
    if rng.gen_bool(0.5) {
        let w = (0..rows * cols).map(|_| rng.gen_range(0.5..3.0)).collect();
        map.set_priorities(w).unwrap();
    }
    map
}

pub fn random_scene(rng: &mut ChaCha8Rng, max_side: usize) -> Scene {
    let rows = rng.gen_range(2..=max_side);
    let cols = rng.gen_range(2..=max_side);
    let decay = if rng.gen_bool(0.5) {
        DecayFunction::new(rng.gen_range(0.2..1.0), rng.gen_range(-0.02..-0.001))
    } else {
        DecayFunction::default()
    };
    Scene {
        map: random_map(rng, rows, cols),
        sensor: SensorModel::standard(),
        decay,
    }
}

pub fn random_footprint(rng: &mut ChaCha8Rng, n_cells: usize, max_len: usize) -> Footprint {
    let k = rng.gen_range(0..=max_len.min(n_cells));
    let mut cells: Vec<(CellIndex, f64)> = sample(rng, n_cells, k)
        .into_iter()
        .map(|i| (i as CellIndex, rng.gen_range(0.0..700.0)))
        .collect();
    cells.sort_unstable_by_key(|c| c.0);
    Footprint { cells }
}

pub fn straight(from: Pose, len: f64) -> EdgeGeometry {
    EdgeGeometry::new(from, from.z, vec![Segment { curvature: 0.0, length: len }])
}

/// Tree of `n` nodes with uniformly random parents and footprints, scored
/// through the embedding.
pub fn random_tree(rng: &mut ChaCha8Rng, scene: &Scene, n: usize, max_footprint: usize) -> PlanTree {
    let ctx = scene.ctx();
    let n_cells = scene.map.len();
    let root_fp = random_footprint(rng, n_cells, max_footprint);
    let mut tree = PlanTree::with_root(
        Pose::new(0.0, 0.0, 50.0, 0.0),
        root_fp,
        &ctx,
        TreeParams::default(),
    );
    let mut ids = vec![tree.root()];
    for _ in 1..n {
        let parent = ids[rng.gen_range(0..ids.len())];
        let from = tree.node(parent).unwrap().pose;
        let len = rng.gen_range(5.0..100.0);
        let pose = Pose::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0), 50.0, 0.0);
        let fp = random_footprint(rng, n_cells, max_footprint);
        let cost = tree.node(parent).unwrap().cost + len;
        let (delta, gain) = tree.score_child(parent, &fp.cells, cost, &ctx).unwrap();
        let id = tree
            .attach(parent, pose, straight(from, len), fp, delta, gain, 1e12)
            .unwrap();
        ids.push(id);
    }
    tree
}

/// Result of replaying every observation from `root` down to a node.
pub struct Replay {
    pub info: f64,
    pub cost: f64,
    pub beliefs: HashMap<CellIndex, f64>,
}

/// Naive root-to-node Bayesian replay with optimistic measurements. Costs
/// are measured from `root` using stored edge lengths.
pub fn replay(tree: &PlanTree, root: NodeId, id: NodeId, scene: &Scene) -> Replay {
    let mut chain = vec![id];
    let mut cur = id;
    while cur != root {
        cur = tree.node(cur).unwrap().parent.expect("root is an ancestor");
        chain.push(cur);
    }
    chain.reverse();
    let mut beliefs: HashMap<CellIndex, f64> = HashMap::new();
    let (mut info, mut cost) = (0.0, 0.0);
    for (k, &n) in chain.iter().enumerate() {
        let node = tree.node(n).unwrap();
        if k > 0 {
            cost += node.edge.as_ref().unwrap().length;
        }
        let gamma = decay(&scene.decay, cost / SPEED);
        for &(cell, range) in &node.footprint.cells {
            let p = beliefs.get(&cell).copied().unwrap_or_else(|| scene.map.prob(cell));
            let (tpr, tnr) = rates(range);
            let post = bayes(p, p >= 0.5, tpr, tnr);
            info += scene.map.priority(cell) * gamma * (entropy(p) - entropy(post));
            beliefs.insert(cell, post);
        }
    }
    Replay { info, cost, beliefs }
}

pub fn descendants(tree: &PlanTree, id: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![id];
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(tree.node(n).unwrap().children.iter().copied());
    }
    out.sort_unstable();
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// First discrepancy between the embedded tree and a naive replay over
/// `scene`, if any.
pub fn replay_mismatch(tree: &PlanTree, scene: &Scene, tol: f64) -> Option<String> {
    let root = tree.root();
    for id in tree.ids() {
        let r = replay(tree, root, id, scene);
        let node = tree.node(id).unwrap();
        if (node.info - r.info).abs() > tol {
            return Some(format!("node {id}: info {} vs replay {}", node.info, r.info));
        }
        if (node.cost - r.cost).abs() > tol {
            return Some(format!("node {id}: cost {} vs replay {}", node.cost, r.cost));
        }
        for (&cell, &p) in &r.beliefs {
            let got = tree.belief_at(id, cell, &scene.map).unwrap();
            if got != p {
                return Some(format!("node {id} cell {cell}: belief {got} vs replay {p}"));
            }
        }
    }
    None
}

/// Re-roots a random tree at a random node, recycles it against a fresh map
/// and budget, and reports the first discrepancy with a from-scratch replay
/// or with the expected survivor set.
pub fn recycling_mismatch(rng: &mut ChaCha8Rng, max_side: usize, n: usize, max_footprint: usize) -> Option<String> {
    let scene = random_scene(rng, max_side);
    let mut tree = random_tree(rng, &scene, n, max_footprint);
    let ids: Vec<_> = tree.ids().collect();
    let pivot = ids[rng.gen_range(0..ids.len())];
    let offset = tree.node(pivot).unwrap().cost;
    let max_cost = ids.iter().map(|&i| tree.node(i).unwrap().cost).fold(0.0, f64::max);
    let budget = rng.gen_range(0.0..=(max_cost - offset).max(1.0));
    let old_costs: HashMap<NodeId, f64> = ids.iter().map(|&i| (i, tree.node(i).unwrap().cost)).collect();
    let new_scene = Scene {
        map: random_map(rng, scene.map.n_rows(), scene.map.n_cols()),
        sensor: scene.sensor.clone(),
        decay: scene.decay,
    };
    let expected: Vec<_> = descendants(&tree, pivot)
        .into_iter()
        .filter(|&i| tree.node(i).unwrap().cost - offset <= budget + 1e-6)
        .collect();

    tree.prune_before(pivot).unwrap();
    let stats = tree.update_subtree(pivot, budget, &new_scene.ctx()).unwrap();

    let survivors: Vec<_> = tree.ids().collect();
    if survivors != expected {
        return Some(format!("survivors {survivors:?}, expected {expected:?}"));
    }
    let visited: HashSet<_> = stats.visited.iter().copied().collect();
    if visited.len() != stats.visited.len() {
        return Some("a node was visited twice".into());
    }
    if visited != survivors.iter().copied().collect::<HashSet<_>>() {
        return Some("visited set differs from survivors".into());
    }
    for &id in &survivors {
        let node = tree.node(id).unwrap();
        if (node.cost - (old_costs[&id] - offset)).abs() > 1e-9 || node.cost > budget + 1e-6 {
            return Some(format!("node {id}: cost {} not shifted from {}", node.cost, old_costs[&id]));
        }
    }
    replay_mismatch(&tree, &new_scene, 1e-9)
}

fn m2pi(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Turning circle centre; `left` selects the counter-clockwise circle.
fn centre(c: (f64, f64, f64), r: f64, left: bool) -> (f64, f64) {
    let (s, k) = c.2.sin_cos();
    if left {
        (c.0 - r * s, c.1 + r * k)
    } else {
        (c.0 + r * s, c.1 - r * k)
    }
}

/// Angle swept from heading `a` to heading `b` turning left or right.
fn sweep(a: f64, b: f64, left: bool) -> f64 {
    if left {
        m2pi(b - a)
    } else {
        m2pi(a - b)
    }
}

/// Heading while circling `c` at point `q`.
fn heading_on(c: (f64, f64), q: (f64, f64), left: bool) -> f64 {
    let a = (q.1 - c.1).atan2(q.0 - c.0);
    if left {
        a + FRAC_PI_2
    } else {
        a - FRAC_PI_2
    }
}

/// Shortest Dubins length by enumerating tangent lines between turning
/// circles (CSC) and circle triples (CCC).
pub fn dubins_oracle(s: (f64, f64, f64), g: (f64, f64, f64), r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (l1, l2) in [(true, true), (false, false), (true, false), (false, true)] {
        let c1 = centre(s, r, l1);
        let c2 = centre(g, r, l2);
        let (vx, vy) = (c2.0 - c1.0, c2.1 - c1.1);
        let d = vx.hypot(vy);
        let phi = vy.atan2(vx);
        let (straight, alpha) = if l1 == l2 {
            (d, phi)
        } else {
            if d < 2.0 * r {
                continue;
            }
            let len = (d * d - 4.0 * r * r).sqrt();
            let tilt = (2.0 * r).atan2(len);
            (len, if l1 { phi + tilt } else { phi - tilt })
        };
        let total = r * (sweep(s.2, alpha, l1) + sweep(alpha, g.2, l2)) + straight;
        best = best.min(total);
    }
    for outer_left in [false, true] {
        let c1 = centre(s, r, outer_left);
        let c2 = centre(g, r, outer_left);
        let (vx, vy) = (c2.0 - c1.0, c2.1 - c1.1);
        let d = vx.hypot(vy);
        if d > 4.0 * r || d < 1e-12 {
            continue;
        }
        let phi = vy.atan2(vx);
        let off = (d / (4.0 * r)).acos();
        for side in [-1.0, 1.0] {
            let a = phi + side * off;
            let c3 = (c1.0 + 2.0 * r * a.cos(), c1.1 + 2.0 * r * a.sin());
            let q1 = ((c1.0 + c3.0) / 2.0, (c1.1 + c3.1) / 2.0);
            let q2 = ((c2.0 + c3.0) / 2.0, (c2.1 + c3.1) / 2.0);
            let h1 = heading_on(c1, q1, outer_left);
            let h2 = heading_on(c2, q2, outer_left);
            let total = r
                * (sweep(s.2, h1, outer_left) + sweep(h1, h2, !outer_left) + sweep(h2, g.2, outer_left));
            best = best.min(total);
        }
    }
    best
}
