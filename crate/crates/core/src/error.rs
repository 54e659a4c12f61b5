use thiserror::Error;

use crate::mpn::NodeId;
use crate::solver::EquilibriumSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {}", .0.join("; "))]
    InvalidGame(Vec<String>),

    #[error("invalid graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "information structure shape (N={info_agents}, T={info_horizon}) does not match game (N={game_agents}, T={game_horizon})"
    )]
    ShapeMismatch {
        info_agents: usize,
        info_horizon: usize,
        game_agents: usize,
        game_horizon: usize,
    },

    #[error("node {node} needs the policy of agent {agent} at time {time}, which has not been computed")]
    MissingPolicy {
        node: NodeId,
        agent: usize,
        time: usize,
    },

    #[error("degenerate node system at {node}")]
    DegenerateNode { node: NodeId },

    #[error("stage equilibrium system singular at t={time}")]
    SingularStage { time: usize },

    #[error("open-loop KKT system is singular: no unique open-loop equilibrium")]
    SingularOpenLoop,

    #[error("feedback stage system singular at t={time}")]
    SingularFeedbackStage { time: usize },

    #[error("residual check failed: max KKT residual {residual:e} exceeds {tolerance:e}")]
    ResidualCheckFailed {
        residual: f64,
        tolerance: f64,
        solution: Box<EquilibriumSolution>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
