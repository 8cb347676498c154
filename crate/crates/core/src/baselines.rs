//! Comparison planners: Monte Carlo tree search over motion primitives,
//! greedy reward-per-distance, random viewpoints and lawnmower coverage.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_footprint, CameraModel, Pose};
use crate::grid::{BeliefMap, Bounds, CellIndex};
use crate::path::{connect, EdgeGeometry, Segment};
use crate::planner::{Clock, Plan, PlanRequest, PlanStats, Planner, Termination};
use crate::rewards::{node_information, optimistic_cell_reward, RewardContext};
use crate::tree::{NodeId, PlanTree, TreeParams};

/// Pose at `altitude` whose optical axis hits `target`, facing along the
/// bearing from `from` to the target.
pub fn viewpoint(from: &Pose, target: (f64, f64), altitude: f64, cam: &CameraModel) -> Pose {
    let yaw = (target.1 - from.y).atan2(target.0 - from.x);
    let back = cam.axis_ground_distance(altitude);
    let (s, c) = yaw.sin_cos();
    Pose::new(target.0 - back * c, target.1 - back * s, altitude, yaw)
}

/// Level run after a viewpoint that keeps the target in view until it
/// crosses the near edge of the footprint.
fn viewing_run(cam: &CameraModel, altitude: f64) -> f64 {
    let steepest = cam.pitch_down + cam.vfov / 2.0;
    let near = if steepest >= PI / 2.0 { 0.0 } else { altitude / steepest.tan() };
    (cam.axis_ground_distance(altitude) - near).max(0.0)
}

/// Shortest path to `vp` followed by the level viewing run.
fn view_leg(from: &Pose, vp: &Pose, req: &PlanRequest) -> Option<EdgeGeometry> {
    let e = connect(from, vp, req.mission.turn_radius)?;
    let mut segments = e.segments;
    segments.push(Segment {
        curvature: 0.0,
        length: viewing_run(&req.mission.camera, vp.z),
    });
    let e = EdgeGeometry::new(e.start, e.end_z, segments);
    (e.length > 1e-6 && e.within_bounds(&turn_room(req), 1.0)).then_some(e)
}

/// Region viewpoint legs may use: the bounds plus room for one full turn,
/// so a vehicle heading out near an edge can still come back.
fn turn_room(req: &PlanRequest) -> Bounds {
    req.bounds.expanded(2.0 * req.mission.turn_radius)
}

/// Appends `edge` to `legs`, cutting it so the total stays within `budget`.
/// Returns `false` once the budget is used up.
fn push_leg(legs: &mut Vec<EdgeGeometry>, used: &mut f64, edge: EdgeGeometry, budget: f64) -> bool {
    let room = budget - *used;
    if room <= 1e-9 {
        return false;
    }
    let edge = edge.truncated(room);
    *used += edge.length;
    legs.push(edge);
    budget - *used > 1e-9
}

fn plan_from_edges(start: Pose, legs: &[EdgeGeometry], infos: &[f64], spacing: f64) -> Plan {
    Plan::from_legs(start, 0.0, legs.iter().zip(infos.iter().copied()), spacing)
}

/// Scores `legs` in order on a scratch copy of the belief.
fn score_legs(legs: &[EdgeGeometry], req: &PlanRequest) -> Result<Vec<f64>> {
    let ctx = req.mission.reward_context(&req.map);
    let mut scratch: FxHashMap<CellIndex, f64> = FxHashMap::default();
    let (mut info, mut cost) = (0.0, 0.0);
    let mut out = Vec::with_capacity(legs.len());
    for e in legs {
        cost += e.length;
        let fp = req.mission.edge_footprint(e, &req.map)?;
        let (d, g) = node_information(
            |i| scratch.get(&i).copied().unwrap_or_else(|| req.map.prob(i)),
            &fp.cells,
            &ctx,
            ctx.time_at(cost),
        );
        scratch.extend(d);
        info += g;
        out.push(info);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Monte Carlo tree search

/// Constant-curvature arcs at fixed altitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitiveSet {
    pub primitives: Vec<Segment>,
}

impl MotionPrimitiveSet {
    /// `count` curvatures evenly spaced over [-1/r, 1/r], all of `length`.
    pub fn uniform(turn_radius: f64, length: f64, count: usize) -> Result<Self> {
        if count == 0 || !(length > 0.0) || !(turn_radius > 0.0) {
            return Err(Error::Config("invalid motion primitive set".into()));
        }
        let k = 1.0 / turn_radius;
        let primitives = (0..count)
            .map(|i| Segment {
                curvature: if count == 1 {
                    0.0
                } else {
                    -k + 2.0 * k * i as f64 / (count - 1) as f64
                },
                length,
            })
            .collect();
        Ok(Self { primitives })
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn apply(&self, from: &Pose, i: usize) -> EdgeGeometry {
        EdgeGeometry::new(*from, from.z, vec![self.primitives[i]])
    }
}

/// Upper confidence bound with the exploitation term normalised by `alpha`.
pub fn ucb_score(value: f64, n_node: u32, n_tree: u32, c: f64, alpha: f64) -> f64 {
    value / alpha + c * ((n_tree as f64).ln() / n_node as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub exploration: f64,
    pub primitive_length: f64,
    pub primitive_count: usize,
    pub termination: Termination,
    /// Rollout and tree depth cap in metres; full budget when `None`.
    pub horizon: Option<f64>,
    pub waypoint_spacing: f64,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            exploration: 2.0,
            primitive_length: 50.0,
            primitive_count: 7,
            termination: Termination::WallClock(1.0),
            horizon: None,
            waypoint_spacing: 50.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Visit {
    n: u32,
    total: f64,
    expanded: bool,
}

pub struct Mcts {
    config: MctsConfig,
    rng: ChaCha8Rng,
    stats: PlanStats,
    /// Visit statistics of the last search.
    visits: Vec<(NodeId, Option<NodeId>, u32)>,
    evals: usize,
}

impl Mcts {
    pub fn new(config: MctsConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            stats: PlanStats::default(),
            visits: Vec::new(),
            evals: 0,
        }
    }

    /// `(node, parent, visit count)` for every node of the last search.
    pub fn last_visits(&self) -> &[(NodeId, Option<NodeId>, u32)] {
        &self.visits
    }

    fn child(
        &self,
        tree: &PlanTree,
        node: NodeId,
        prim: &MotionPrimitiveSet,
        i: usize,
        req: &PlanRequest,
        ctx: &RewardContext<'_>,
        budget: f64,
    ) -> Result<Option<(Pose, EdgeGeometry, crate::geometry::Footprint, crate::rewards::Delta, f64)>> {
        let n = tree.node(node).ok_or(Error::UnknownNode(node))?;
        let edge = prim.apply(&n.pose, i);
        if n.cost + edge.length > budget + 1e-6 || !edge.within_bounds(&req.bounds, 1.0) {
            return Ok(None);
        }
        let fp = req.mission.edge_footprint(&edge, &req.map)?;
        let (delta, gain) = tree.score_child(node, &fp.cells, n.cost + edge.length, ctx)?;
        Ok(Some((edge.end(), edge, fp, delta, gain)))
    }

    fn rollout(
        &mut self,
        tree: &PlanTree,
        from: NodeId,
        prim: &MotionPrimitiveSet,
        req: &PlanRequest,
        ctx: &RewardContext<'_>,
        budget: f64,
    ) -> Result<f64> {
        let n = tree.node(from).ok_or(Error::UnknownNode(from))?;
        let (mut pose, mut cost, mut info) = (n.pose, n.cost, n.info);
        let mut scratch: FxHashMap<CellIndex, f64> = FxHashMap::default();
        let mut options = Vec::with_capacity(prim.len());
        loop {
            options.clear();
            for i in 0..prim.len() {
                let e = prim.apply(&pose, i);
                if cost + e.length <= budget + 1e-6 && e.within_bounds(&req.bounds, 1.0) {
                    options.push(e);
                }
            }
            if options.is_empty() {
                return Ok(info);
            }
            let e = options.swap_remove(self.rng.gen_range(0..options.len()));
            cost += e.length;
            let fp = req.mission.edge_footprint(&e, &req.map)?;
            let (d, g) = node_information(
                |i| match scratch.get(&i) {
                    Some(&p) => p,
                    None => tree.belief_at(from, i, ctx.base).unwrap_or_else(|_| ctx.base.prob(i)),
                },
                &fp.cells,
                ctx,
                ctx.time_at(cost),
            );
            scratch.extend(d);
            self.evals += 1;
            info += g;
            pose = e.end();
        }
    }
}

impl Planner for Mcts {
    fn name(&self) -> &str {
        "mcts"
    }

    fn plan(&mut self, req: &PlanRequest) -> Result<Plan> {
        req.validate()?;
        let budget = self.config.horizon.map_or(req.budget, |h| req.budget.min(h));
        let prim = MotionPrimitiveSet::uniform(
            req.mission.turn_radius,
            self.config.primitive_length,
            self.config.primitive_count,
        )?;
        let ctx = req.mission.reward_context(&req.map);
        let alpha = (req.budget / req.mission.speed).max(1e-9);
        let fp = project_footprint(&req.start, &req.mission.camera, &req.map)?;
        let params = TreeParams {
            budget_epsilon: 0.0,
            bucket: self.config.primitive_length * 4.0,
        };
        let mut tree = PlanTree::with_root(req.start, fp, &ctx, params);
        let mut visits = vec![Visit::default()];
        let t0 = std::time::Instant::now();
        let mut clock = Clock::new(self.config.termination);
        self.evals = 0;
        while clock.tick(self.evals) {
            // Selection.
            let mut node = tree.root();
            loop {
                let v = visits[node];
                if !v.expanded {
                    break;
                }
                let children = &tree.node(node).expect("live").children;
                if children.is_empty() {
                    break;
                }
                node = match children.iter().find(|&&c| visits[c].n == 0) {
                    Some(&c) => c,
                    None => {
                        let n_tree = v.n.max(1);
                        *children
                            .iter()
                            .max_by(|&&a, &&b| {
                                let sa = ucb_score(visits[a].total / visits[a].n as f64, visits[a].n, n_tree, self.config.exploration, alpha);
                                let sb = ucb_score(visits[b].total / visits[b].n as f64, visits[b].n, n_tree, self.config.exploration, alpha);
                                sa.total_cmp(&sb).then(b.cmp(&a))
                            })
                            .expect("non-empty")
                    }
                };
            }
            // Expansion on the second visit.
            if visits[node].n > 0 && !visits[node].expanded {
                visits[node].expanded = true;
                for i in 0..prim.len() {
                    if let Some((pose, edge, fp, delta, gain)) = self.child(&tree, node, &prim, i, req, &ctx, budget)? {
                        self.evals += 1;
                        let id = tree.attach(node, pose, edge, fp, delta, gain, budget)?;
                        if visits.len() <= id {
                            visits.resize(id + 1, Visit::default());
                        }
                    }
                }
                if let Some(&c) = tree.node(node).expect("live").children.first() {
                    node = c;
                }
            }
            // Rollout and backpropagation.
            let value = self.rollout(&tree, node, &prim, req, &ctx, budget)?;
            let mut cur = Some(node);
            while let Some(id) = cur {
                visits[id].n += 1;
                visits[id].total += value;
                cur = tree.node(id).and_then(|n| n.parent);
            }
        }
        self.visits = tree
            .ids()
            .map(|id| (id, tree.node(id).and_then(|n| n.parent), visits[id].n))
            .collect();
        self.stats = PlanStats {
            iterations: clock.iterations,
            tree_size: tree.len(),
            info_evals: self.evals,
            build_secs: t0.elapsed().as_secs_f64(),
            ..PlanStats::default()
        };
        Ok(Plan::from_trajectory(&tree.best_path(), self.config.waypoint_spacing))
    }

    fn stats(&self) -> PlanStats {
        self.stats.clone()
    }

    fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.config.seed);
    }
}

// ---------------------------------------------------------------------------
// Greedy

/// How the greedy planner measures the distance to a viewpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyDistance {
    /// Straight-line distance.
    #[default]
    Euclidean,
    /// Length of the curvature-bounded path with this turn radius.
    Path(f64),
}

/// Next viewpoint maximising single-view reward over distance, computed on
/// `map`. `None` when no in-bounds viewpoint has positive reward.
#[allow(clippy::too_many_arguments)]
pub fn greedy_plan_step(
    state: &Pose,
    map: &BeliefMap,
    bounds: &Bounds,
    cam: &CameraModel,
    ctx: &RewardContext<'_>,
    altitude: f64,
    t: f64,
    metric: GreedyDistance,
) -> Option<Pose> {
    let range = cam.nominal_range(altitude);
    let gamma = ctx.decay.value(t);
    let mut scored: Vec<(f64, Pose)> = Vec::new();
    for i in 0..map.len() as CellIndex {
        let r = map.priority(i) * gamma * optimistic_cell_reward(map.prob(i), range, ctx.model).0;
        if !(r > 0.0) {
            continue;
        }
        let vp = viewpoint(state, map.cell_center(i), altitude, cam);
        if !bounds.contains(vp.x, vp.y) {
            continue;
        }
        scored.push((r / state.distance(&vp).max(1.0), vp));
    }
    // Stable sort keeps lower cell indices first among ties.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    match metric {
        GreedyDistance::Euclidean => scored.first().map(|b| b.1),
        GreedyDistance::Path(radius) => {
            // Path length never undercuts the straight line, so the straight
            // line score bounds the path score from above.
            let mut best: Option<(f64, Pose)> = None;
            for (g, vp) in scored {
                if best.is_some_and(|(b, _)| g <= b) {
                    break;
                }
                let Some(e) = connect(state, &vp, radius) else {
                    continue;
                };
                let euclid = state.distance(&vp).max(1.0);
                let gp = g * euclid / e.length.max(1.0);
                if best.map_or(true, |(b, _)| gp > b) {
                    best = Some((gp, vp));
                }
            }
            best.map(|b| b.1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    pub altitude: f64,
    pub waypoint_spacing: f64,
    pub distance: GreedyDistance,
    /// Legs whose Dubins path leaves the bounds are skipped by masking the
    /// target; this caps the retries per step.
    pub max_retries: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            altitude: 50.0,
            waypoint_spacing: 50.0,
            distance: GreedyDistance::Euclidean,
            max_retries: 20,
        }
    }
}

pub struct Greedy {
    config: GreedyConfig,
}

impl Greedy {
    pub fn new(config: GreedyConfig) -> Self {
        Self { config }
    }
}

impl Planner for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn plan(&mut self, req: &PlanRequest) -> Result<Plan> {
        req.validate()?;
        let cam = &req.mission.camera;
        let mut map = req.map.clone();
        let model = req.mission.sensor.clone();
        let mut legs = Vec::new();
        let mut used = 0.0;
        let mut pose = req.start;
        let mut retries = 0;
        while used < req.budget {
            let ctx = RewardContext::new(&map, &model, req.mission.decay, req.mission.speed);
            let Some(vp) = greedy_plan_step(&pose, &map, &req.bounds, cam, &ctx, self.config.altitude, used / req.mission.speed, self.config.distance) else {
                break;
            };
            let edge = view_leg(&pose, &vp, req);
            let target_fp = project_footprint(&vp, cam, &map)?;
            let Some(edge) = edge else {
                // Unreachable target: mark what it would see as observed.
                for &(i, r) in &target_fp.cells {
                    let post = optimistic_cell_reward(map.prob(i), r, &model).1;
                    map.set_prob(i, post)?;
                }
                retries += 1;
                if retries > self.config.max_retries {
                    break;
                }
                continue;
            };
            retries = 0;
            let fp = req.mission.edge_footprint(&edge, &map)?;
            for &(i, r) in fp.cells.iter().chain(&target_fp.cells) {
                let post = optimistic_cell_reward(map.prob(i), r, &model).1;
                map.set_prob(i, post)?;
            }
            pose = edge.end();
            if !push_leg(&mut legs, &mut used, edge, req.budget) {
                break;
            }
        }
        let infos = score_legs(&legs, req)?;
        Ok(plan_from_edges(req.start, &legs, &infos, self.config.waypoint_spacing))
    }
}

// ---------------------------------------------------------------------------
// Random

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomConfig {
    pub altitude: f64,
    pub waypoint_spacing: f64,
    pub seed: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            altitude: 50.0,
            waypoint_spacing: 50.0,
            seed: 0,
        }
    }
}

pub struct RandomPlanner {
    config: RandomConfig,
    rng: ChaCha8Rng,
}

impl RandomPlanner {
    pub fn new(config: RandomConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        }
    }
}

/// Random viewpoint legs from `req.start` until the budget is spent.
pub fn random_plan<R: Rng>(req: &PlanRequest, altitude: f64, spacing: f64, rng: &mut R) -> Result<Plan> {
    req.validate()?;
    let b = req.bounds;
    let mut legs = Vec::new();
    let mut used = 0.0;
    let mut pose = req.start;
    let mut misses = 0;
    while used < req.budget && misses < 1000 {
        let target = (rng.gen_range(b.x_min..=b.x_max), rng.gen_range(b.y_min..=b.y_max));
        let vp = viewpoint(&pose, target, altitude, &req.mission.camera);
        let edge = b
            .contains(vp.x, vp.y)
            .then(|| view_leg(&pose, &vp, req))
            .flatten();
        let Some(edge) = edge else {
            misses += 1;
            continue;
        };
        misses = 0;
        pose = edge.end();
        if !push_leg(&mut legs, &mut used, edge, req.budget) {
            break;
        }
    }
    let infos = score_legs(&legs, req)?;
    Ok(plan_from_edges(req.start, &legs, &infos, spacing))
}

impl Planner for RandomPlanner {
    fn name(&self) -> &str {
        "random"
    }

    fn plan(&mut self, req: &PlanRequest) -> Result<Plan> {
        random_plan(req, self.config.altitude, self.config.waypoint_spacing, &mut self.rng)
    }

    fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.config.seed);
    }
}

// ---------------------------------------------------------------------------
// Coverage

/// Distance between lawnmower rows: footprint width 20% of the way from its
/// near edge to its far edge.
pub fn row_spacing(cam: &CameraModel, altitude: f64) -> Option<f64> {
    let poly = crate::geometry::ground_polygon(&Pose::new(0.0, 0.0, altitude, 0.0), cam)?;
    let (near, far) = poly.forward_extent(0.0);
    let w = poly.width_at(0.0, near + 0.2 * (far - near));
    (w > 0.0).then_some(w)
}

/// Boustrophedon pattern over `bounds`: `ceil(height / s)` full-width rows
/// along x, evenly spread in y and joined by Dubins turns. Each row starts
/// outside the bounds by the distance the footprint needs to span a full row
/// spacing, so no cell near an entry edge is left to a turn. When the row
/// spacing is below the turn diameter the turns bulge further past the bounds.
pub fn coverage_legs(bounds: &Bounds, cam: &CameraModel, altitude: f64, turn_radius: f64) -> Result<Vec<EdgeGeometry>> {
    let s = row_spacing(cam, altitude)
        .ok_or_else(|| Error::Config("camera footprint is empty at the coverage altitude".into()))?;
    let n = (bounds.height() / s).ceil().max(1.0) as usize;
    let pitch = bounds.height() / n as f64;
    let ys: Vec<f64> = (0..n).map(|k| bounds.y_min + pitch * (k as f64 + 0.5)).collect();
    let lead = crate::geometry::ground_polygon(&Pose::new(0.0, 0.0, altitude, 0.0), cam).map_or(0.0, |p| {
        let (near, far) = p.forward_extent(0.0);
        (near + 0.2 * (far - near)).max(0.0)
    });
    lawnmower(&ys, bounds.x_min, bounds.x_max, lead, altitude, turn_radius)
}

fn lawnmower(ys: &[f64], x_a: f64, x_b: f64, lead: f64, altitude: f64, turn_radius: f64) -> Result<Vec<EdgeGeometry>> {
    let no_path = || Error::Config("no curvature-feasible lawnmower connection".into());
    let mut legs = Vec::new();
    let mut pose = None;
    for (k, &y) in ys.iter().enumerate() {
        let forward = k % 2 == 0;
        let (from_x, to_x, psi) = if forward { (x_a - lead, x_b, 0.0) } else { (x_b + lead, x_a, PI) };
        let start = Pose::new(from_x, y, altitude, psi);
        if let Some(prev) = pose {
            legs.push(connect(&prev, &start, turn_radius).ok_or_else(no_path)?);
        }
        let end = Pose::new(to_x, y, altitude, psi);
        legs.push(connect(&start, &end, turn_radius).ok_or_else(no_path)?);
        pose = Some(end);
    }
    Ok(legs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub altitude: f64,
    pub waypoint_spacing: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            altitude: 50.0,
            waypoint_spacing: 50.0,
        }
    }
}

/// Follows a fixed lawnmower pattern; replans return the remaining suffix.
pub struct Coverage {
    config: CoverageConfig,
    pattern: Option<Plan>,
    progress: usize,
}

impl Coverage {
    pub fn new(config: CoverageConfig) -> Self {
        Self {
            config,
            pattern: None,
            progress: 0,
        }
    }
}

/// Full pattern flown from `start`: a lead-in leg to the first row, then the
/// rows, truncated at `budget`.
pub fn coverage_plan(req: &PlanRequest, altitude: f64, spacing: f64) -> Result<Plan> {
    req.validate()?;
    let rows = coverage_legs(&req.bounds, &req.mission.camera, altitude, req.mission.turn_radius)?;
    let mut legs = Vec::new();
    let mut used = 0.0;
    let first = rows[0].start;
    let mut ok = true;
    if !req.start.matches(&first, 1e-6, 1e-6) {
        let lead = connect(&req.start, &first, req.mission.turn_radius)
            .ok_or_else(|| Error::Config("no lead-in to the coverage pattern".into()))?;
        ok = push_leg(&mut legs, &mut used, lead, req.budget);
    }
    for e in rows {
        if !ok {
            break;
        }
        ok = push_leg(&mut legs, &mut used, e, req.budget);
    }
    let infos = score_legs(&legs, req)?;
    Ok(plan_from_edges(req.start, &legs, &infos, spacing))
}

impl Planner for Coverage {
    fn name(&self) -> &str {
        "coverage"
    }

    fn plan(&mut self, req: &PlanRequest) -> Result<Plan> {
        req.validate()?;
        let pattern = match &self.pattern {
            Some(p) => p,
            None => {
                self.progress = 0;
                self.pattern.insert(coverage_plan(req, self.config.altitude, self.config.waypoint_spacing)?)
            }
        };
        // Resume from the pattern waypoint closest to the start, never
        // moving backwards.
        let wps = &pattern.waypoints;
        let k = (self.progress..wps.len())
            .min_by(|&a, &b| {
                wps[a].pose.distance(&req.start).total_cmp(&wps[b].pose.distance(&req.start))
            })
            .unwrap_or(self.progress);
        self.progress = k;
        let base_cost = wps[k].cost;
        let base_info = wps[k].info;
        let mut plan = Plan::stationary(req.start);
        for w in &wps[k + 1..] {
            if w.cost - base_cost > req.budget + 1e-9 {
                break;
            }
            let mut w = *w;
            w.cost -= base_cost;
            w.info -= base_info;
            plan.waypoints.push(w);
        }
        plan.info = plan.waypoints.last().map_or(0.0, |w| w.info);
        Ok(plan)
    }

    fn reset(&mut self) {
        self.pattern = None;
        self.progress = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ground_polygon;
    use crate::planner::MissionModel;

    fn request(map: BeliefMap, budget: f64) -> PlanRequest {
        PlanRequest {
            start: Pose::new(100.0, 100.0, 50.0, 0.0),
            budget,
            bounds: map.bounds(),
            map,
            mission: MissionModel::default(),
        }
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb_score(0.0, 1, 1, 3.0, 10.0), 0.0);
        let alpha = 15_000.0 / 25.0;
        assert!((alpha - 600.0f64).abs() < 1e-12);
        assert!((ucb_score(300.0, 4, 4, 0.0, alpha) - 0.5).abs() < 1e-12);
        assert!(ucb_score(1.0, 1, 10, 1.0, 1.0) > ucb_score(1.0, 5, 10, 1.0, 1.0));
    }

    #[test]
    fn greedy_viewpoint_geometry() {
        let cam = CameraModel::standard();
        let vp = viewpoint(&Pose::new(0.0, 0.0, 50.0, 0.0), (500.0, 0.0), 50.0, &cam);
        assert!((500.0 - vp.x - 50.0 / 30f64.to_radians().tan()).abs() < 1e-9);
        assert!((500.0 - vp.x - 86.6).abs() < 0.01);
        assert!(vp.psi.abs() < 1e-12);
    }

    #[test]
    fn greedy_prefers_nearer_equal_reward() {
        let mut map = BeliefMap::new((0.0, 0.0), 10.0, 100, 100, 0.0).unwrap();
        let near = map.cell_at(305.0, 105.0).unwrap();
        let far = map.cell_at(505.0, 105.0).unwrap();
        map.set_prob(near, 0.5).unwrap();
        map.set_prob(far, 0.5).unwrap();
        let model = crate::grid::SensorModel::standard();
        let ctx = RewardContext::new(&map, &model, Default::default(), 25.0);
        let cam = CameraModel::standard();
        let vp = greedy_plan_step(&Pose::new(105.0, 105.0, 50.0, 0.0), &map, &map.bounds(), &cam, &ctx, 50.0, 0.0, GreedyDistance::Euclidean).unwrap();
        let poly = ground_polygon(&vp, &cam).unwrap();
        assert!(poly.contains(305.0, 105.0));

        let empty = BeliefMap::new((0.0, 0.0), 10.0, 10, 10, 0.0).unwrap();
        let ctx = RewardContext::new(&empty, &model, Default::default(), 25.0);
        assert!(greedy_plan_step(&Pose::new(5.0, 5.0, 50.0, 0.0), &empty, &empty.bounds(), &cam, &ctx, 50.0, 0.0, GreedyDistance::Euclidean).is_none());
    }

    #[test]
    fn random_plan_spends_budget() {
        let map = BeliefMap::new((0.0, 0.0), 15.0, 67, 67, 0.2).unwrap();
        let req = request(map, 1200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = random_plan(&req, 50.0, 50.0, &mut rng).unwrap();
        assert!((plan.cost() - 1200.0).abs() < 1e-6, "{}", plan.cost());
        let again = random_plan(&req, 50.0, 50.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(plan, again);

        let short = request(BeliefMap::new((0.0, 0.0), 15.0, 67, 67, 0.2).unwrap(), 30.0);
        let p = random_plan(&short, 50.0, 50.0, &mut rng).unwrap();
        assert!((p.cost() - 30.0).abs() < 1e-6);
        assert_eq!(p.waypoints.iter().filter(|w| w.node).count(), 2);
    }

    #[test]
    fn nadir_row_spacing_is_footprint_width() {
        let cam = CameraModel::new(PI / 2.0, 0.6, 0.6, 600.0).unwrap();
        let s = row_spacing(&cam, 50.0).unwrap();
        assert!((s - 2.0 * 50.0 * 0.3f64.tan()).abs() < 1e-9);
    }

    #[test]
    fn coverage_row_count() {
        let cam = CameraModel::standard();
        let s = row_spacing(&cam, 50.0).unwrap();
        let b = Bounds::new(0.0, 0.0, 5000.0, 5000.0);
        let legs = coverage_legs(&b, &cam, 50.0, 100.0).unwrap();
        let rows = (5000.0 / s).ceil() as usize;
        assert_eq!(legs.len(), 2 * rows - 1);
        // Rows start one lead-in outside their entry edge and end on the far edge.
        let lead = -legs[0].start.x;
        assert!(lead > 0.0 && lead < 200.0, "{lead}");
        for row in legs.iter().step_by(2) {
            assert!(row.within_bounds(&Bounds::new(-lead - 1e-6, 0.0, 5000.0 + lead + 1e-6, 5000.0), 1.0));
            let end = row.end();
            assert!(end.x.abs() < 1e-6 || (end.x - 5000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mcts_zero_reward_and_visit_counts() {
        let map = BeliefMap::new((0.0, 0.0), 15.0, 67, 67, 0.0).unwrap();
        let req = request(map, 600.0);
        let mut m = Mcts::new(MctsConfig {
            termination: Termination::Iterations(200),
            ..MctsConfig::default()
        });
        let plan = m.plan(&req).unwrap();
        assert_eq!(plan.info, 0.0);
        assert!(plan.cost() <= 600.0 + 1e-9);
        assert!(!m.last_visits().is_empty());
    }
}
