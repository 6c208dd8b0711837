//! Stochastic MIP baselines: scenario trees, the deterministic equivalent, an
//! embedded simplex with branch and bound, LP text files and env replay.

pub mod bnb;
pub mod bridge;
pub mod lp_format;
pub mod model;
pub mod simplex;
pub mod tree;

pub use bnb::{solve, Solution, SolveOptions, SolveStatus};
pub use bridge::{plan_from_solution, replay_plan, ReplayResult};
pub use lp_format::{export_lp, parse_lp};
pub use model::{build_deterministic_equivalent, Anticipation, LpModel, Row, SmipModel, Var};
pub use simplex::{solve_lp, LpProblem, LpResult, LpStatus, Sense, SimplexOptions};
pub use tree::{build_scenario_tree, path_count, ScenarioTree, TreeNode, DEFAULT_PATH_CAP};
