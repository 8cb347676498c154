//! Budget-constrained informative path planning for a fixed-wing vehicle
//! carrying a forward-looking camera.

pub mod baselines;
pub mod env;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod path;
pub mod planner;
pub mod rewards;
pub mod sim;
pub mod spatial;
pub mod tree;

pub use baselines::{Coverage, Greedy, Mcts, RandomPlanner};
pub use env::{DeskScenario, EnvDistribution, EnvSpec};
pub use error::{Error, Result};
pub use geometry::{CameraModel, Footprint, Pose};
pub use grid::{BeliefMap, Bounds, CellIndex, SensorModel};
pub use path::EdgeGeometry;
pub use planner::{IaTigris, MissionModel, Plan, PlanRequest, Planner, PlannerConfig, Termination, Waypoint};
pub use rewards::{DecayFunction, Delta, RewardContext};
pub use sim::{run_mission, MissionReport, MissionSetup, MissionSummary, SimConfig, TraceRow};
pub use tree::{NodeId, PlanTree, TreeParams};
