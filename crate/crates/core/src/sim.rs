//! Fixed-wing mission simulator: waypoint tracking with a proportional
//! controller, simulated detections, replanning and plan merging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_footprint, wrap_angle, CameraModel, Pose};
use crate::grid::{BeliefMap, Bounds, Measurement, SensorModel};
use crate::path::{EdgeGeometry, Segment};
use crate::planner::{MissionModel, Plan, PlanRequest, Planner, Waypoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Simulation step (s).
    pub dt: f64,
    pub acceptance_radius: f64,
    /// Heading change between consecutive waypoints above which the
    /// vehicle is considered banking and takes no observations (rad).
    pub banking_threshold: f64,
    pub heading_gain: f64,
    pub altitude_gain: f64,
    pub max_climb_rate: f64,
    /// Time between plan requests; also the look-ahead used to choose the
    /// next plan's start (s).
    pub replan_period: f64,
    pub replanning: bool,
    /// Position/heading tolerance for locating merge points.
    pub merge_tolerance: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            acceptance_radius: 20.0,
            banking_threshold: 15f64.to_radians(),
            heading_gain: 1.0,
            altitude_gain: 0.5,
            max_climb_rate: 5.0,
            replan_period: 10.0,
            replanning: true,
            merge_tolerance: (1.0, 5f64.to_radians()),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.acceptance_radius > 0.0) || !(self.replan_period > 0.0) {
            return Err(Error::Config("dt, acceptance radius and replan period must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose,
    pub speed: f64,
    pub distance_flown: f64,
}

/// One entropy trace sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub entropy_bits: f64,
    pub pct_reduction: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

#[derive(Clone, Debug)]
pub struct MissionState {
    pub truth: Vec<bool>,
    pub belief: BeliefMap,
    pub vehicle: VehicleState,
    /// Active plan; waypoint costs are absolute planned odometry.
    pub plan: Plan,
    /// Index of the commanded waypoint.
    pub target: usize,
    pub budget: f64,
    pub t: f64,
    pub complete: bool,
    pub initial_entropy: f64,
    pub trace: Vec<TraceRow>,
    pub executed: Vec<Pose>,
}

impl MissionState {
    /// Truth cells are drawn once from the prior.
    pub fn new<R: Rng>(prior: &BeliefMap, start: Pose, speed: f64, budget: f64, rng: &mut R) -> Self {
        let truth = prior.probabilities().iter().map(|&p| rng.gen_bool(p.clamp(0.0, 1.0))).collect();
        let initial_entropy = prior.total_entropy();
        let mut s = Self {
            truth,
            belief: prior.clone(),
            vehicle: VehicleState {
                pose: start,
                speed,
                distance_flown: 0.0,
            },
            plan: Plan::stationary(start),
            target: 0,
            budget,
            t: 0.0,
            complete: false,
            initial_entropy,
            trace: Vec::new(),
            executed: vec![start],
        };
        s.record();
        s
    }

    pub fn remaining_budget(&self) -> f64 {
        (self.budget - self.vehicle.distance_flown).max(0.0)
    }

    pub fn pct_reduction(&self) -> f64 {
        pct(self.initial_entropy, self.belief.total_entropy())
    }

    fn record(&mut self) {
        let h = self.belief.total_entropy();
        let p = self.vehicle.pose;
        self.trace.push(TraceRow {
            t: self.t,
            entropy_bits: h,
            pct_reduction: pct(self.initial_entropy, h),
            x: p.x,
            y: p.y,
            z: p.z,
            psi: p.psi,
        });
    }

    /// Heading change of the transition into the commanded waypoint.
    pub fn banking(&self, threshold: f64) -> bool {
        if self.target == 0 || self.target >= self.plan.waypoints.len() {
            return false;
        }
        let a = self.plan.waypoints[self.target - 1].pose.psi;
        let b = self.plan.waypoints[self.target].pose.psi;
        wrap_angle(b - a).abs() > threshold
    }

    /// Planned odometry at the vehicle's current position.
    fn planned_progress(&self) -> f64 {
        match self.plan.waypoints.get(self.target) {
            Some(w) => (w.cost - w.pose.distance(&self.vehicle.pose)).max(0.0),
            None => self.plan.cost(),
        }
    }
}

fn pct(h0: f64, h: f64) -> f64 {
    if h0 > 0.0 {
        100.0 * (h0 - h) / h0
    } else {
        0.0
    }
}

/// Advances the vehicle by `dt` towards the commanded waypoint.
pub fn step(state: &mut MissionState, cfg: &SimConfig, turn_radius: f64, dt: f64) {
    let Some(wp) = state.plan.waypoints.get(state.target).copied() else {
        state.complete = true;
        return;
    };
    let v = &mut state.vehicle;
    let p = v.pose;
    let bearing = (wp.pose.y - p.y).atan2(wp.pose.x - p.x);
    let max_rate = v.speed / turn_radius;
    let rate = (cfg.heading_gain * wrap_angle(bearing - p.psi)).clamp(-max_rate, max_rate);
    let climb = (cfg.altitude_gain * (wp.pose.z - p.z)).clamp(-cfg.max_climb_rate, cfg.max_climb_rate);
    let climb = climb.clamp(-v.speed, v.speed);
    let ground = (v.speed * v.speed - climb * climb).sqrt();
    let psi = p.psi + rate * dt;
    // Midpoint heading keeps the arc length exact for small steps.
    let mid = p.psi + 0.5 * rate * dt;
    v.pose = Pose::new(
        p.x + ground * dt * mid.cos(),
        p.y + ground * dt * mid.sin(),
        p.z + climb * dt,
        psi,
    );
    v.distance_flown += v.speed * dt;
    state.t += dt;
    state.executed.push(v.pose);

    let here = v.pose;
    let (s, c) = wp.pose.psi.sin_cos();
    let passed = (here.x - wp.pose.x) * c + (here.y - wp.pose.y) * s > 0.0;
    if here.planar_distance(&wp.pose) <= cfg.acceptance_radius || passed {
        state.target += 1;
        if state.target >= state.plan.waypoints.len() {
            state.complete = true;
        }
    }
}

/// Draws one detection per footprint cell from the truth and updates the
/// belief, unless the vehicle is banking. Appends a trace sample either way.
pub fn observe<R: Rng>(state: &mut MissionState, cfg: &SimConfig, cam: &CameraModel, model: &SensorModel, rng: &mut R) -> Result<()> {
    if !state.banking(cfg.banking_threshold) {
        let fp = project_footprint(&state.vehicle.pose, cam, &state.belief)?;
        for &(idx, range) in &fp.cells {
            let (tpr, tnr) = model.lookup_rates(range);
            let positive = if state.truth[idx as usize] {
                rng.gen_bool(tpr)
            } else {
                !rng.gen_bool(tnr)
            };
            state.belief.apply_measurement(idx, Measurement { positive, range }, model);
        }
    }
    state.record();
    Ok(())
}

/// Keeps `current` up to the waypoint matching `merge_pose` and appends
/// `fresh` after it, re-chaining costs. Falls back to the waypoint nearest
/// `merge_pose` when none matches; the flag reports whether one matched.
pub fn merge_plan(current: &Plan, fresh: &Plan, merge_pose: &Pose, tol: (f64, f64)) -> (Plan, bool) {
    let matched = current
        .waypoints
        .iter()
        .position(|w| w.pose.matches(merge_pose, tol.0, tol.1));
    let k = matched.unwrap_or_else(|| {
        (0..current.waypoints.len())
            .min_by(|&a, &b| {
                current.waypoints[a]
                    .pose
                    .distance(merge_pose)
                    .total_cmp(&current.waypoints[b].pose.distance(merge_pose))
            })
            .unwrap_or(0)
    });
    let mut out = Plan::default();
    out.waypoints.extend_from_slice(&current.waypoints[..k.min(current.waypoints.len())]);
    let (base_cost, base_info) = current
        .waypoints
        .get(k)
        .map_or((0.0, 0.0), |w| (w.cost, w.info));
    for w in &fresh.waypoints {
        out.waypoints.push(Waypoint {
            cost: base_cost + w.cost,
            info: base_info + w.info,
            ..*w
        });
    }
    out.info = out.waypoints.last().map_or(0.0, |w| w.info);
    (out, matched.is_some())
}

/// Everything fixed for one mission besides the prior and the planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionSetup {
    pub start: Pose,
    pub budget: f64,
    pub bounds: Bounds,
    pub mission: MissionModel,
    /// Seeds the truth draw and the detector noise.
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub t: f64,
    pub tree_size: usize,
    pub iterations: usize,
    pub recycled: bool,
    pub update_secs: Option<f64>,
    pub build_secs: f64,
    pub plan_cost: f64,
    pub plan_info: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub planner: String,
    pub final_pct_reduction: f64,
    pub path_length: f64,
    pub duration: f64,
    pub replans: usize,
    pub failures: usize,
    pub unmatched_merges: usize,
    /// Holding turns appended because the active plan ran short.
    pub loiters: usize,
    /// Simulated time spent banking, with observations suppressed (s).
    pub banking_secs: f64,
    /// Largest cost of any plan handed to the vehicle, relative to the
    /// budget remaining at its start.
    pub max_plan_overrun: f64,
    pub cycles: Vec<CycleRecord>,
}

#[derive(Clone, Debug)]
pub struct MissionReport {
    pub summary: MissionSummary,
    pub trace: Vec<TraceRow>,
    pub executed: Vec<Pose>,
    pub final_belief: BeliefMap,
}

fn cycle_record(t: f64, planner: &dyn Planner, plan: &Plan) -> CycleRecord {
    let s = planner.stats();
    CycleRecord {
        t,
        tree_size: s.tree_size,
        iterations: s.iterations,
        recycled: s.recycled,
        update_secs: s.update_secs,
        build_secs: s.build_secs,
        plan_cost: plan.cost(),
        plan_info: plan.info,
    }
}

/// Flies one mission. Planning for the next cycle runs on a snapshot of the
/// belief in a separate thread while the vehicle keeps executing the active
/// plan for one replan period; the fresh plan is merged at the anchor.
pub fn run_mission(
    prior: &BeliefMap,
    setup: &MissionSetup,
    planner: &mut dyn Planner,
    cfg: &SimConfig,
) -> Result<MissionReport> {
    cfg.validate()?;
    let m = &setup.mission;
    let mut truth_rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut state = MissionState::new(prior, setup.start, m.speed, setup.budget, &mut truth_rng);
    let mut summary = MissionSummary {
        planner: planner.name().to_string(),
        ..MissionSummary::default()
    };
    planner.reset();

    if setup.budget > 0.0 {
        let req = PlanRequest {
            start: setup.start,
            budget: setup.budget,
            map: state.belief.clone(),
            bounds: setup.bounds,
            mission: m.clone(),
        };
        match planner.plan(&req) {
            Ok(plan) => {
                summary.max_plan_overrun = summary.max_plan_overrun.max(plan.cost() - setup.budget);
                summary.cycles.push(cycle_record(0.0, planner, &plan));
                state.plan = plan;
                state.target = 1.min(state.plan.waypoints.len());
            }
            Err(e) => {
                log::warn!("initial plan failed: {e}");
                summary.failures += 1;
            }
        }
    }
    if state.plan.waypoints.len() <= 1 && !cfg.replanning {
        state.complete = true;
    }

    let mut banking = 0.0;
    let ticks_per_cycle = (cfg.replan_period / cfg.dt).round().max(1.0) as usize;
    while state.remaining_budget() > 0.0 && !state.complete {
        let pending = if cfg.replanning {
            let ahead = state.planned_progress() + cfg.replan_period * state.vehicle.speed;
            if extend_with_loiter(&mut state, setup, ahead) {
                summary.loiters += 1;
            }
            replan_request(&state, setup, ahead)
        } else {
            None
        };
        let fresh = std::thread::scope(|scope| -> Result<Option<Result<Plan>>> {
            let handle = pending.as_ref().map(|(req, _)| {
                let planner = &mut *planner;
                scope.spawn(move || planner.plan(req))
            });
            for _ in 0..ticks_per_cycle {
                if state.complete || state.remaining_budget() <= 0.0 {
                    break;
                }
                step(&mut state, cfg, m.turn_radius, cfg.dt);
                if state.banking(cfg.banking_threshold) {
                    banking += cfg.dt;
                }
                observe(&mut state, cfg, &m.camera, &m.sensor, &mut noise_rng)?;
            }
            Ok(handle.map(|h| h.join().expect("planner thread panicked")))
        })?;
        let (Some(fresh), Some((req, anchor_cost))) = (fresh, pending) else {
            continue;
        };
        summary.replans += 1;
        match fresh {
            Ok(plan) if plan.waypoints.len() > 1 => {
                summary.max_plan_overrun = summary.max_plan_overrun.max(plan.cost() - req.budget);
                summary.cycles.push(cycle_record(state.t, planner, &plan));
                let (merged, matched) = merge_plan(&state.plan, &plan, &req.start, cfg.merge_tolerance);
                if !matched {
                    summary.unmatched_merges += 1;
                    log::warn!("merge point not on the active plan at t={:.1}", state.t);
                }
                let keep = merged
                    .waypoints
                    .iter()
                    .position(|w| w.cost >= anchor_cost - 1e-9)
                    .unwrap_or(merged.waypoints.len());
                state.plan = merged;
                // Do not skip past the merge point if the vehicle is already
                // beyond it.
                state.target = state.target.min(keep + 1);
                state.complete = state.target >= state.plan.waypoints.len();
            }
            Ok(_) => {
                log::debug!("empty plan at t={:.1}", state.t);
            }
            Err(e) => {
                log::warn!("replan failed at t={:.1}: {e}", state.t);
                summary.failures += 1;
            }
        }
    }

    summary.final_pct_reduction = state.pct_reduction();
    summary.path_length = state.vehicle.distance_flown;
    summary.duration = state.t;
    summary.banking_secs = banking;
    Ok(MissionReport {
        summary,
        trace: state.trace,
        executed: state.executed,
        final_belief: state.belief,
    })
}

/// Spacing of the waypoints of holding turns (m).
const LOITER_SPACING: f64 = 50.0;

/// When the active plan ends before `ahead`, appends a minimum-radius turn
/// towards the middle of the area reaching past it. A fixed-wing vehicle
/// cannot stop, so running out of plan costs budget without observing.
fn extend_with_loiter(state: &mut MissionState, setup: &MissionSetup, ahead: f64) -> bool {
    let Some(last) = state.plan.waypoints.last().copied() else {
        return false;
    };
    if last.cost >= ahead {
        return false;
    }
    let b = &setup.bounds;
    let (cx, cy) = ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0);
    let p = last.pose;
    let (s, c) = p.psi.sin_cos();
    let left = c * (cy - p.y) - s * (cx - p.x) >= 0.0;
    let k = if left { 1.0 } else { -1.0 } / setup.mission.turn_radius;
    let edge = EdgeGeometry::new(
        p,
        p.z,
        vec![Segment {
            curvature: k,
            length: ahead - last.cost + LOITER_SPACING,
        }],
    );
    let ext = Plan::from_legs(p, 0.0, [(&edge, 0.0)], LOITER_SPACING);
    state.plan.waypoints.extend(ext.waypoints.into_iter().skip(1).map(|w| Waypoint {
        cost: last.cost + w.cost,
        info: last.info,
        ..w
    }));
    if state.target >= state.plan.waypoints.len() - 1 {
        state.complete = false;
    }
    true
}

/// Start pose at the first planner node at least `ahead` along the active
/// plan, and the budget left there.
fn replan_request(state: &MissionState, setup: &MissionSetup, ahead: f64) -> Option<(PlanRequest, f64)> {
    let now = state.planned_progress();
    let wps = &state.plan.waypoints;
    let idx = (state.target..wps.len())
        .find(|&i| wps[i].node && wps[i].cost >= ahead)
        .or_else(|| (state.target..wps.len()).rev().find(|&i| wps[i].node))?;
    let anchor = wps[idx];
    let budget = state.budget - state.vehicle.distance_flown - (anchor.cost - now).max(0.0);
    if budget <= 0.0 || !setup.bounds.contains(anchor.pose.x, anchor.pose.y) {
        return None;
    }
    Some((
        PlanRequest {
            start: anchor.pose,
            budget,
            map: state.belief.clone(),
            bounds: setup.bounds,
            mission: setup.mission.clone(),
        },
        anchor.cost,
    ))
}
