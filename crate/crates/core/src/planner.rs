//! Incremental, adaptive sampling-based planner and the types shared by every
//! planner: requests, plans and the [`Planner`] trait.

use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    edge_footprint_level, edge_samples, ground_polygon, project_footprint, CameraModel, Footprint, Pose,
};
use crate::grid::{BeliefMap, Bounds, SensorModel};
use crate::path::{connect, EdgeGeometry};
use crate::rewards::{optimistic_cell_reward, DecayFunction, RewardContext};
use crate::tree::{NodeId, PlanTree, Trajectory, TreeParams};

/// Vehicle, camera and detector shared by every planner in a mission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionModel {
    pub camera: CameraModel,
    pub sensor: SensorModel,
    /// Constant airspeed (m/s).
    pub speed: f64,
    pub decay: DecayFunction,
    pub turn_radius: f64,
    /// Path curvature above which planners expect no observations; matches
    /// the simulator's banking rule. `None` scores every sample.
    pub blind_curvature: Option<f64>,
}

impl Default for MissionModel {
    fn default() -> Self {
        Self {
            camera: CameraModel::standard(),
            sensor: SensorModel::standard(),
            speed: 25.0,
            decay: DecayFunction::default(),
            turn_radius: 100.0,
            // 15 degrees of heading change per 50 m of track.
            blind_curvature: Some(15f64.to_radians() / 50.0),
        }
    }
}

impl MissionModel {
    pub fn reward_context<'a>(&'a self, map: &'a BeliefMap) -> RewardContext<'a> {
        RewardContext::new(map, &self.sensor, self.decay, self.speed)
    }

    /// Cells seen along `edge` at half-cell sample spacing.
    pub fn edge_footprint(&self, edge: &EdgeGeometry, map: &BeliefMap) -> Result<Footprint> {
        edge_footprint_level(
            edge,
            &self.camera,
            map,
            edge_samples(edge.length, map.cell_size()),
            self.blind_curvature.unwrap_or(f64::INFINITY),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub start: Pose,
    /// Remaining travel allowance from `start` (m).
    pub budget: f64,
    pub map: BeliefMap,
    pub bounds: Bounds,
    pub mission: MissionModel,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        if !self.bounds.contains(self.start.x, self.start.y) {
            return Err(Error::StartOutOfBounds {
                x: self.start.x,
                y: self.start.y,
            });
        }
        if !(self.budget >= 0.0) {
            return Err(Error::Config(format!("budget {} is negative", self.budget)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Pose,
    /// Cumulative cost from the plan start.
    pub cost: f64,
    /// Predicted cumulative information on arrival.
    pub info: f64,
    /// Marks poses that correspond to planner nodes (valid merge points).
    pub node: bool,
}

/// Planned path; the first waypoint is the request start.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub waypoints: Vec<Waypoint>,
    pub info: f64,
}

impl Plan {
    /// Plan that stays at `start`.
    pub fn stationary(start: Pose) -> Self {
        Self {
            waypoints: vec![Waypoint {
                pose: start,
                cost: 0.0,
                info: 0.0,
                node: true,
            }],
            info: 0.0,
        }
    }

    /// Densifies `legs` into waypoints at most `spacing` apart. Each leg
    /// carries the cumulative information predicted at its end.
    pub fn from_legs<'a>(
        start: Pose,
        start_info: f64,
        legs: impl IntoIterator<Item = (&'a EdgeGeometry, f64)>,
        spacing: f64,
    ) -> Self {
        let mut plan = Self::stationary(start);
        plan.waypoints[0].info = start_info;
        let (mut cost, mut info) = (0.0, start_info);
        for (edge, end_info) in legs {
            let wps = edge.waypoints(spacing);
            let n = wps.len();
            for (i, (s, pose)) in wps.into_iter().enumerate() {
                let last = i + 1 == n;
                plan.waypoints.push(Waypoint {
                    pose,
                    cost: cost + s,
                    info: if last { end_info } else { info },
                    node: last,
                });
            }
            cost += edge.length;
            info = end_info;
        }
        plan.info = info;
        plan
    }

    pub fn from_trajectory(t: &Trajectory, spacing: f64) -> Self {
        Self::from_legs(
            t.poses[0],
            t.infos[0],
            t.edges.iter().zip(t.infos[1..].iter().copied()),
            spacing,
        )
    }

    pub fn cost(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.cost)
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-cycle instrumentation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub iterations: usize,
    pub tree_size: usize,
    /// Time spent growing the tree after any recycling.
    pub build_secs: f64,
    /// Time spent in the recycling pass, when one ran.
    pub update_secs: Option<f64>,
    pub recycled: bool,
    /// Number of node information evaluations and their total time.
    pub info_evals: usize,
    pub info_secs: f64,
}

/// Common interface of the planner and the baselines.
pub trait Planner: Send {
    fn name(&self) -> &str;
    fn plan(&mut self, request: &PlanRequest) -> Result<Plan>;
    fn stats(&self) -> PlanStats {
        PlanStats::default()
    }
    /// Drops state carried between cycles.
    fn reset(&mut self) {}
}

/// How long a planning cycle runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WallClock(f64),
    Iterations(usize),
    /// Stops once this many information evaluations (or iterations, for
    /// trees that can no longer grow) have run; a deterministic stand-in
    /// for a time budget.
    Evaluations(usize),
}

pub(crate) struct Clock {
    start: Instant,
    limit: Termination,
    pub(crate) iterations: usize,
}

impl Clock {
    pub(crate) fn new(limit: Termination) -> Self {
        Self {
            start: Instant::now(),
            limit,
            iterations: 0,
        }
    }

    /// Whether the budget is used up, given the evaluations run so far.
    pub(crate) fn exhausted(&self, evals: usize) -> bool {
        match self.limit {
            Termination::WallClock(secs) => self.start.elapsed() >= Duration::from_secs_f64(secs),
            Termination::Iterations(n) => self.iterations >= n,
            Termination::Evaluations(n) => evals >= n || self.iterations >= n,
        }
    }

    /// Starts another iteration unless the budget is used up.
    pub(crate) fn tick(&mut self, evals: usize) -> bool {
        let go = !self.exhausted(evals);
        if go {
            self.iterations += 1;
        }
        go
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Extend distance (m).
    pub extend_distance: f64,
    pub near_radius: f64,
    pub prune_radius: f64,
    pub termination: Termination,
    /// Altitudes the sampler draws from.
    pub altitudes: Vec<f64>,
    /// Keep and update the tree between cycles.
    pub recycle: bool,
    /// Score nodes with per-node deltas instead of a root replay.
    pub embedding: bool,
    /// Optional cap on the planned path length (m).
    pub horizon: Option<f64>,
    pub budget_epsilon: f64,
    /// Spacing of emitted waypoints along edges (m).
    pub waypoint_spacing: f64,
    /// Merge-point tolerance on position (m) and heading (rad).
    pub match_position: f64,
    pub match_heading: f64,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            extend_distance: 300.0,
            near_radius: 300.0,
            prune_radius: 120.0,
            termination: Termination::WallClock(1.0),
            altitudes: vec![50.0],
            recycle: true,
            embedding: true,
            horizon: None,
            budget_epsilon: 25.0,
            waypoint_spacing: 50.0,
            match_position: 1.0,
            match_heading: 5f64.to_radians(),
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extend_distance", self.extend_distance),
            ("near_radius", self.near_radius),
            ("prune_radius", self.prune_radius),
            ("waypoint_spacing", self.waypoint_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.altitudes.is_empty() || self.altitudes.iter().any(|&z| !(z > 0.0)) {
            return Err(Error::Config("altitudes must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Curvature-bounded connection from `from` towards `to`, cut at `max_len`.
/// `None` when the poses coincide or the path leaves `bounds`.
pub fn steer(
    from: &Pose,
    to: &Pose,
    max_len: f64,
    bounds: &Bounds,
    turn_radius: f64,
) -> Option<(Pose, EdgeGeometry)> {
    let edge = connect(from, to, turn_radius)?;
    if edge.length <= 1e-9 || max_len <= 0.0 {
        return None;
    }
    let edge = edge.truncated(max_len);
    if !edge.within_bounds(bounds, 1.0) {
        return None;
    }
    Some((edge.end(), edge))
}

/// Draws poses that view cells in proportion to their single-view reward.
pub struct InformedSampler<'a> {
    map: &'a BeliefMap,
    camera: &'a CameraModel,
    altitudes: &'a [f64],
    bounds: Bounds,
    cells: Option<WeightedIndex<f64>>,
}

impl<'a> InformedSampler<'a> {
    pub fn new(
        map: &'a BeliefMap,
        camera: &'a CameraModel,
        sensor: &SensorModel,
        altitudes: &'a [f64],
        bounds: Bounds,
    ) -> Self {
        let z = altitudes.iter().sum::<f64>() / altitudes.len() as f64;
        let range = camera.nominal_range(z);
        let weights: Vec<f64> = (0..map.len() as u32)
            .map(|i| map.priority(i) * optimistic_cell_reward(map.prob(i), range, sensor).0)
            .map(|w| if w.is_finite() && w > 0.0 { w } else { 0.0 })
            .collect();
        Self {
            map,
            camera,
            altitudes,
            bounds,
            cells: WeightedIndex::new(&weights).ok(),
        }
    }

    /// Index of a reward-weighted cell, if any cell has positive reward.
    pub fn sample_cell<R: Rng>(&self, rng: &mut R) -> Option<u32> {
        self.cells.as_ref().map(|d| d.sample(rng) as u32)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Pose {
        if let Some(cell) = self.sample_cell(rng) {
            let (cx, cy) = self.map.cell_center(cell);
            for _ in 0..16 {
                if let Some(p) = self.viewing_pose(cx, cy, rng) {
                    return p;
                }
            }
        }
        self.uniform(rng)
    }

    fn altitude<R: Rng>(&self, rng: &mut R) -> f64 {
        self.altitudes[rng.gen_range(0..self.altitudes.len())]
    }

    pub fn uniform<R: Rng>(&self, rng: &mut R) -> Pose {
        let b = &self.bounds;
        Pose::new(
            rng.gen_range(b.x_min..=b.x_max),
            rng.gen_range(b.y_min..=b.y_max),
            self.altitude(rng),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    }

    /// In-bounds pose whose footprint contains `(cx, cy)`: the vehicle offset
    /// is uniform over the footprint polygon reflected through the target.
    fn viewing_pose<R: Rng>(&self, cx: f64, cy: f64, rng: &mut R) -> Option<Pose> {
        let z = self.altitude(rng);
        let psi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let poly = ground_polygon(&Pose::new(0.0, 0.0, z, psi), self.camera)?;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &poly.vertices {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        for _ in 0..64 {
            let (qx, qy) = (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1));
            if poly.contains(qx, qy) {
                let (x, y) = (cx - qx, cy - qy);
                return self.bounds.contains(x, y).then(|| Pose::new(x, y, z, psi));
            }
        }
        None
    }
}

/// The incremental tree planner.
pub struct IaTigris {
    config: PlannerConfig,
    rng: ChaCha8Rng,
    tree: Option<PlanTree>,
    last_path: Vec<NodeId>,
    stats: PlanStats,
}

impl IaTigris {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            tree: None,
            last_path: Vec::new(),
            stats: PlanStats::default(),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    /// Tree kept from the last cycle (only when recycling).
    pub fn tree(&self) -> Option<&PlanTree> {
        self.tree.as_ref()
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            budget_epsilon: self.config.budget_epsilon,
            bucket: self.config.near_radius.max(1.0),
        }
    }

    fn fresh_tree(&self, req: &PlanRequest, ctx: &RewardContext<'_>) -> Result<PlanTree> {
        let fp = project_footprint(&req.start, &req.mission.camera, &req.map)?;
        Ok(PlanTree::with_root(req.start, fp, ctx, self.tree_params()))
    }

    /// Reuses the previous tree when `start` matches a node of the last
    /// returned path; otherwise starts over. Returns whether it recycled.
    pub fn update_graph(
        &mut self,
        req: &PlanRequest,
        budget: f64,
        ctx: &RewardContext<'_>,
    ) -> Result<bool> {
        if let Some(mut tree) = self.tree.take() {
            let hit = self.last_path.iter().copied().find(|&id| {
                tree.node(id).is_some_and(|n| {
                    n.pose
                        .matches(&req.start, self.config.match_position, self.config.match_heading)
                })
            });
            if let Some(id) = hit {
                tree.prune_before(id)?;
                tree.update_subtree(id, budget, ctx)?;
                self.tree = Some(tree);
                return Ok(true);
            }
        }
        self.tree = Some(self.fresh_tree(req, ctx)?);
        Ok(false)
    }

    fn extend(
        &mut self,
        tree: &mut PlanTree,
        parent: NodeId,
        target: &Pose,
        req: &PlanRequest,
        ctx: &RewardContext<'_>,
        budget: f64,
    ) -> Result<(Option<Pose>, Option<NodeId>)> {
        let p = tree.node(parent).ok_or(Error::UnknownNode(parent))?;
        let remaining = budget - p.cost;
        if remaining < 1.0 {
            return Ok((None, None));
        }
        let (from, base_cost, base_info) = (p.pose, p.cost, p.info);
        let max_len = self.config.extend_distance.min(remaining);
        let Some((pose, edge)) = steer(&from, target, max_len, &req.bounds, req.mission.turn_radius)
        else {
            return Ok((None, None));
        };
        let fp = req.mission.edge_footprint(&edge, &req.map)?;
        let cost = base_cost + edge.length;
        let t0 = Instant::now();
        let (delta, gain) = if self.config.embedding {
            tree.score_child(parent, &fp.cells, cost, ctx)?
        } else {
            tree.score_child_replay(parent, &fp.cells, cost, ctx)?
        };
        self.stats.info_secs += t0.elapsed().as_secs_f64();
        self.stats.info_evals += 1;
        if !tree.prune_check(&pose, base_info + gain, cost, self.config.prune_radius) {
            return Ok((Some(pose), None));
        }
        Ok((Some(pose), tree.attach(parent, pose, edge, fp, delta, gain, budget).ok()))
    }

    fn grow(
        &mut self,
        tree: &mut PlanTree,
        sampler: &InformedSampler<'_>,
        req: &PlanRequest,
        ctx: &RewardContext<'_>,
        budget: f64,
        clock: &Clock,
    ) -> Result<()> {
        let sample = sampler.sample(&mut self.rng);
        let Some(nearest) = tree.nearest_open(&sample) else {
            return Ok(());
        };
        let (feasible, added) = self.extend(tree, nearest, &sample, req, ctx, budget)?;
        let Some(x_feas) = feasible else {
            return Ok(());
        };
        for n in tree.near_open(&x_feas, self.config.near_radius) {
            if clock.exhausted(self.stats.info_evals) {
                break;
            }
            if n == nearest || Some(n) == added {
                continue;
            }
            self.extend(tree, n, &x_feas, req, ctx, budget)?;
        }
        Ok(())
    }
}

impl Planner for IaTigris {
    fn name(&self) -> &str {
        "ia-tigris"
    }

    fn plan(&mut self, req: &PlanRequest) -> Result<Plan> {
        req.validate()?;
        let budget = self.config.horizon.map_or(req.budget, |h| req.budget.min(h));
        let ctx = req.mission.reward_context(&req.map);
        self.stats = PlanStats::default();

        let t0 = Instant::now();
        let mut tree = if self.config.recycle {
            self.stats.recycled = self.update_graph(req, budget, &ctx)?;
            if self.stats.recycled {
                self.stats.update_secs = Some(t0.elapsed().as_secs_f64());
            }
            self.tree.take().expect("update_graph leaves a tree")
        } else {
            self.fresh_tree(req, &ctx)?
        };

        let t1 = Instant::now();
        let altitudes = self.config.altitudes.clone();
        let sampler = InformedSampler::new(
            &req.map,
            &req.mission.camera,
            &req.mission.sensor,
            &altitudes,
            req.bounds,
        );
        let mut clock = Clock::new(self.config.termination);
        while clock.tick(self.stats.info_evals) {
            self.grow(&mut tree, &sampler, req, &ctx, budget, &clock)?;
        }
        self.stats.iterations = clock.iterations;
        self.stats.build_secs = t1.elapsed().as_secs_f64();
        self.stats.tree_size = tree.len();

        let best = tree.best_path();
        let plan = Plan::from_trajectory(&best, self.config.waypoint_spacing);
        self.last_path = best.nodes;
        if self.config.recycle {
            self.tree = Some(tree);
        }
        log::debug!(
            "ia-tigris: {} iterations, {} nodes, info {:.3}",
            self.stats.iterations,
            self.stats.tree_size,
            plan.info
        );
        Ok(plan)
    }

    fn stats(&self) -> PlanStats {
        self.stats.clone()
    }

    fn reset(&mut self) {
        self.tree = None;
        self.last_path.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.config.seed);
    }
}
