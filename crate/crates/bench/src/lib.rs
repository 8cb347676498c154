//! Shared fixtures for the benchmarks.

use ipp_core::{DeskScenario, IaTigris, MissionModel, PlanRequest, Planner, PlannerConfig, Termination};

/// Planning request on the desk scenario's environment `seed`.
pub fn desk_request(seed: u64) -> PlanRequest {
    let d = DeskScenario::default();
    PlanRequest {
        start: d.start,
        budget: d.budget,
        map: d.env(seed).expect("desk environment").belief_map().expect("desk map"),
        bounds: d.bounds,
        mission: MissionModel::default(),
    }
}

/// IA-TIGRIS limited to `evals` information evaluations.
pub fn tigris(evals: usize, embedding: bool, seed: u64) -> IaTigris {
    IaTigris::new(PlannerConfig {
        termination: Termination::Evaluations(evals),
        embedding,
        seed,
        ..PlannerConfig::default()
    })
    .expect("valid planner config")
}

/// Planner that has already grown a tree for `req`, and the request moved
/// to the second node of its best plan.
pub fn grown(req: &PlanRequest, evals: usize) -> (IaTigris, PlanRequest) {
    let mut p = tigris(evals, true, 1);
    let plan = p.plan(req).expect("plan");
    let next = plan.waypoints.iter().filter(|w| w.node).nth(1).expect("plan has two nodes");
    let moved = PlanRequest { start: next.pose, budget: req.budget - next.cost, ..req.clone() };
    (p, moved)
}
