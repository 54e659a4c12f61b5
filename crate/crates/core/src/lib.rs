//! Nash equilibria of linear-quadratic dynamic games under interleaved
//! information structures.
//!
//! A game ([`LqGame`]) and an observation relation ([`InformationStructure`])
//! are turned into a network of per-(agent, time) optimization problems
//! ([`MpnGraph`]). Each node's KKT system is reduced to a relation for that
//! agent's current control, and the relations of one stage are solved
//! jointly, backward in time, for affine policies. A forward rollout gives
//! the equilibrium trajectory, which is then certified by the KKT residual
//! of every node.
//!
//! ```
//! use mpngame::{make_cyclic_example, solve_equilibrium, CyclicParams};
//! use nalgebra::DVector;
//!
//! let (game, info) = make_cyclic_example(&CyclicParams::default()).unwrap();
//! let x1 = DVector::from_vec(vec![1.0, 0.0, -1.0]);
//! let sol = solve_equilibrium(&game, &info, &x1).unwrap();
//! assert!(sol.max_residual() <= sol.diagnostics.tolerance);
//! ```

// Tolerance checks are written `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod builder;
pub mod error;
pub mod game;
pub mod gen;
pub mod goal_offset;
pub mod info;
pub mod kkt;
pub mod linalg;
pub mod mpn;
pub mod policy;
pub mod serde_mat;
pub mod solver;
pub mod verify;

pub use baseline::{
    baseline_feedback_nash, baseline_open_loop_nash, best_response, FeedbackSolution, OpenLoopSolution,
};
pub use builder::{build_mpn, node_variables, policy_constraints, PolicyConstraint};
pub use error::{Error, Result};
pub use game::{rollout, total_cost, validate_game, AgentDims, LqGame, Trajectory, ValidationReport};
pub use goal_offset::{from_goal_offset, make_cyclic_example, CyclicParams, GoalOffsetSpec};
pub use info::{InformationStructure, PairRelation};
pub use kkt::{
    assemble_node_system, full_kkt_residual, recover_multipliers, reduce_to_stage_relation, MultiplierId,
    NodeKktSystem, NodeMultipliers, ResidualReport, StageRelation,
};
pub use mpn::{reachable_sets, validate_graph, Edge, EdgeKind, MpnGraph, NodeId, ReachableSet, VarId};
pub use policy::{StagePolicy, StagePolicySet};
pub use solver::{solve_equilibrium, solve_stage_policies, EquilibriumSolution};
pub use verify::{compare_structures, finite_difference_stationarity, verify_solution, Tolerances, VerificationReport};
