//! Mission execution end to end.

use ipp_core::baselines::{CoverageConfig, GreedyConfig, MctsConfig, RandomConfig};
use ipp_core::grid::Measurement;
use ipp_core::{
    run_mission, BeliefMap, Bounds, CameraModel, Coverage, DeskScenario, Greedy, IaTigris, Mcts,
    MissionModel, MissionSetup, Planner, PlannerConfig, Pose, RandomPlanner, SensorModel, SimConfig,
    Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, budget: f64) -> (BeliefMap, MissionSetup) {
    let d = DeskScenario::default();
    let map = d.env(seed).unwrap().belief_map().unwrap();
    let s = MissionSetup {
        start: d.start,
        budget,
        bounds: d.bounds,
        mission: MissionModel::default(),
        seed,
    };
    (map, s)
}

fn planners(seed: u64) -> Vec<Box<dyn Planner>> {
    vec![
        Box::new(
            IaTigris::new(PlannerConfig {
                termination: Termination::Evaluations(300),
                seed,
                ..PlannerConfig::default()
            })
            .unwrap(),
        ),
        Box::new(Mcts::new(MctsConfig {
            termination: Termination::Evaluations(300),
            seed,
            ..MctsConfig::default()
        })),
        Box::new(Greedy::new(GreedyConfig::default())),
        Box::new(RandomPlanner::new(RandomConfig { seed, ..RandomConfig::default() })),
        Box::new(Coverage::new(CoverageConfig::default())),
    ]
}

#[test]
fn repeated_detections_converge() {
    let sensor = SensorModel::standard();
    let mut total = 0.0;
    let n = 200;
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = BeliefMap::new((0.0, 0.0), 10.0, 1, 1, 0.5).unwrap();
        let (tpr, _) = sensor.lookup_rates(100.0);
        for _ in 0..50 {
            let z = Measurement { positive: rng.gen_bool(tpr), range: 100.0 };
            map.apply_measurement(0, z, &sensor);
        }
        total += map.prob(0);
    }
    assert!(total / n as f64 > 0.99);
}

#[test]
fn flown_distance_stays_within_budget() {
    let cfg = SimConfig::default();
    for seed in 0..4 {
        let budget = 1000.0 + 500.0 * seed as f64;
        let (map, s) = setup(seed, budget);
        let step = s.mission.speed * cfg.dt;
        for mut p in planners(seed) {
            let r = run_mission(&map, &s, p.as_mut(), &cfg).unwrap();
            let sum = &r.summary;
            assert!(sum.path_length <= budget + step + 1e-9, "{}: {}", sum.planner, sum.path_length);
            assert!(sum.max_plan_overrun <= 1e-9, "{}: {}", sum.planner, sum.max_plan_overrun);
            assert_eq!(r.trace[0].pct_reduction, 0.0);
            assert!(r.trace.windows(2).all(|w| w[1].t > w[0].t));
        }
    }
}

#[test]
fn missions_are_reproducible() {
    let (map, s) = setup(3, 2000.0);
    let cfg = SimConfig::default();
    for (mut a, mut b) in planners(3).into_iter().zip(planners(3)) {
        let ra = run_mission(&map, &s, a.as_mut(), &cfg).unwrap();
        let rb = run_mission(&map, &s, b.as_mut(), &cfg).unwrap();
        assert_eq!(format!("{:?}", ra.trace), format!("{:?}", rb.trace), "{}", a.name());
        assert_eq!(ra.executed, rb.executed);
        assert_eq!(ra.final_belief, rb.final_belief);
    }
}

#[test]
fn zero_budget_reduces_nothing() {
    let (map, s) = setup(1, 0.0);
    let mut p = planners(1).remove(0);
    let r = run_mission(&map, &s, p.as_mut(), &SimConfig::default()).unwrap();
    assert_eq!(r.summary.final_pct_reduction, 0.0);
    assert_eq!(r.summary.path_length, 0.0);
}

#[test]
fn uninformative_detector_keeps_prior() {
    let (map, mut s) = setup(2, 1500.0);
    s.mission.sensor = SensorModel::constant(0.5, 0.5, 600.0).unwrap();
    let mut p = planners(2).remove(3);
    let r = run_mission(&map, &s, p.as_mut(), &SimConfig::default()).unwrap();
    assert_eq!(r.final_belief, map);
    assert_eq!(r.summary.final_pct_reduction, 0.0);
}

#[test]
fn without_replanning_the_first_plan_is_flown() {
    let (map, s) = setup(4, 2000.0);
    let cfg = SimConfig { replanning: false, ..SimConfig::default() };
    let mut p = planners(4).remove(0);
    let r = run_mission(&map, &s, p.as_mut(), &cfg).unwrap();
    assert_eq!(r.summary.replans, 0);
    assert_eq!(r.summary.cycles.len(), 1);
    assert!(r.summary.final_pct_reduction > 0.0);
}

#[test]
fn perfect_sensor_with_full_coverage_clears_the_map() {
    let bounds = Bounds::new(0.0, 0.0, 450.0, 450.0);
    let map = BeliefMap::new((0.0, 0.0), 15.0, 30, 30, 0.3).unwrap();
    let mission = MissionModel {
        sensor: SensorModel::constant(1.0, 1.0, 600.0).unwrap(),
        camera: CameraModel::standard(),
        ..MissionModel::default()
    };
    let s = MissionSetup {
        start: Pose::new(20.0, 20.0, 50.0, 0.0),
        budget: 20_000.0,
        bounds,
        mission,
        seed: 5,
    };
    // Observe through the turns so the pattern's footprint union is complete.
    let cfg = SimConfig {
        replanning: false,
        banking_threshold: std::f64::consts::PI,
        ..SimConfig::default()
    };
    let mut p = Coverage::new(CoverageConfig::default());
    let r = run_mission(&map, &s, &mut p, &cfg).unwrap();
    assert!(r.summary.final_pct_reduction > 99.9, "{}", r.summary.final_pct_reduction);
}
