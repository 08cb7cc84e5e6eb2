//! Game manager for repeated games in which players see private parts of a
//! random event and each has a stand-alone baseline strategy.
//!
//! The manager observes the full event and all baselines each round and
//! suggests a joint action. Virtual queues keep every player's long-run
//! average utility at least as large as under its baseline strategy while
//! pushing a global objective toward the best value achievable with
//! knowledge of the next `T` rounds.
//!
//! Modules:
//! * [`game`]: games, utility models, enumeration.
//! * [`location`]: the two-location reward game and its worked examples.
//! * [`phi`]: concave objectives and the proxy maximization.
//! * [`manager`]: the per-round decision rules and queue updates.
//! * [`lookahead`]: the brute-force `T`-slot comparison oracle.
//! * [`sim`]: generators, baseline policies, traces and bound checks.
//! * [`scenario`]: scenario files.

pub mod error;
pub mod game;
pub mod location;
pub mod lookahead;
pub mod manager;
pub mod phi;
pub mod scenario;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use game::{
    enumerate_joint_actions, evaluate_utilities, observe, validate_game, Action, ActionVector,
    EventVector, GameSpec, GameSpecDef, Observation, UtilityModel, UtilityRegistry, UtilityVector,
    DEFAULT_GUARD_LIMIT,
};
pub use lookahead::{frame_psis, psi_frame, Objective, OracleProblem};
pub use manager::{
    conservative_feasible_set, update_queue_q, update_queue_z, BoundConstants, Manager,
    ManagerConfig, ManagerState, StepOutput,
};
pub use phi::{Phi, PhiKind};
pub use scenario::{GameSource, Scenario};
pub use sim::checks::Verdict;
pub use sim::generator::EventGenerator;
pub use sim::policy::PlayerPolicy;
pub use sim::trace::{RoundRecord, TraceSummary};
pub use sim::{run_simulation, run_streaming, Simulation, Trace};
