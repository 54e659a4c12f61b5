//! Verification of candidate equilibria: KKT residuals, multiplier
//! identities, rollout exactness and finite-difference stationarity.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builder::build_mpn;
use crate::error::Result;
use crate::game::{rollout, LqGame, Trajectory};
use crate::info::InformationStructure;
use crate::kkt::{
    assemble_node_system, full_kkt_residual, params_from_trajectory, recover_multipliers, MultiplierId,
    NodeMultipliers,
};
use crate::linalg;
use crate::mpn::{MpnGraph, NodeId};
use crate::policy::StagePolicySet;
use crate::solver::{agent_costs, kkt_tolerance, solve_equilibrium, solve_stage_policies, EquilibriumSolution};

pub const FD_STEP: f64 = 1e-5;
pub const DEFAULT_PROBES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute KKT tolerance; defaults to `1e-8 (1 + ||data||_inf)`.
    pub kkt: Option<f64>,
    pub lambda_self: f64,
    pub eta: f64,
    /// Relative finite-difference tolerance, scaled by `1 + |J|`.
    pub fd: f64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kkt: None,
            lambda_self: 1e-7,
            eta: 1e-7,
            fd: 1e-6,
            probes: DEFAULT_PROBES,
            seed: 0,
        }
    }
}

/// A self-policy multiplier `lambda^{(j,k)}_{(j,m)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelfEntry {
    pub node: NodeId,
    pub time: usize,
    pub max_abs: f64,
    /// Whether the node and the constrained stage reach the same nodes after
    /// the constrained stage, in which case the multiplier must vanish.
    pub predicted_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub node: NodeId,
    pub max_derivative: f64,
    pub objective: f64,
    pub null_dim: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub kkt_max_residual: f64,
    pub kkt_tolerance: f64,
    /// Max over the self-policy multipliers that are predicted to vanish.
    pub lambda_self_max: f64,
    /// Max over all self-policy multipliers, for information.
    pub lambda_self_max_all: f64,
    pub lambda_self: Vec<LambdaSelfEntry>,
    pub eta_consistency_max: f64,
    pub rollout_exact: bool,
    pub policy_deviation: f64,
    pub fd_max: f64,
    pub fd: Vec<FdReport>,
    pub per_agent_costs: Vec<f64>,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Nodes reachable from `node` at times `>= from_time`.
fn reach_from(graph: &MpnGraph, node: NodeId, from_time: usize) -> BTreeSet<NodeId> {
    graph
        .reachable
        .descendants(node)
        .iter()
        .copied()
        .filter(|d| d.time >= from_time)
        .collect()
}

/// Self-policy multipliers of every node with their structural prediction.
pub fn lambda_self_entries(graph: &MpnGraph, multipliers: &[NodeMultipliers]) -> Vec<LambdaSelfEntry> {
    let mut out = Vec::new();
    for nm in multipliers {
        for (id, v) in nm.ids.iter().zip(&nm.values) {
            if let MultiplierId::PolicySelf { node, time } = *id {
                let later = NodeId::new(node.agent, time);
                let predicted_zero = reach_from(graph, node, time + 1) == reach_from(graph, later, time + 1);
                out.push(LambdaSelfEntry {
                    node,
                    time,
                    max_abs: linalg::vamax(v),
                    predicted_zero,
                });
            }
        }
    }
    out
}

/// Largest disagreement of the dynamics multipliers `eta_s` between nodes of
/// one agent that reach the same nodes at times `>= s`.
pub fn eta_consistency(graph: &MpnGraph, multipliers: &[NodeMultipliers], num_agents: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..num_agents {
        for s in 1..=graph.horizon {
            let nodes: Vec<NodeId> = (0..s.min(graph.horizon)).map(|k| NodeId::new(j, k)).collect();
            for (x, &a) in nodes.iter().enumerate() {
                for &b in &nodes[x + 1..] {
                    if reach_from(graph, a, s) != reach_from(graph, b, s) {
                        continue;
                    }
                    let (ea, eb) = (eta_at(multipliers, a, s, num_agents), eta_at(multipliers, b, s, num_agents));
                    if let (Some(ea), Some(eb)) = (ea, eb) {
                        worst = worst.max(linalg::vamax(&(ea - eb)));
                    }
                }
            }
        }
    }
    worst
}

/// Stacked dynamics multiplier of `node` for state time `s`, all agent blocks.
pub fn eta_at(multipliers: &[NodeMultipliers], node: NodeId, s: usize, num_agents: usize) -> Option<DVector<f64>> {
    let nm = multipliers.iter().find(|m| m.node == node)?;
    let parts: Option<Vec<&DVector<f64>>> = (0..num_agents)
        .map(|agent| {
            nm.get(&MultiplierId::Dyn {
                node,
                agent,
                state_time: s,
            })
        })
        .collect();
    let data: Vec<f64> = parts?.into_iter().flat_map(|v| v.iter().copied()).collect();
    Some(DVector::from_vec(data))
}

/// Central-difference directional derivatives of the node objective along
/// random directions in the null space of the node's constraints.
pub fn finite_difference_stationarity(
    game: &LqGame,
    graph: &MpnGraph,
    node: NodeId,
    traj: &Trajectory,
    policies: &StagePolicySet,
    num_probes: usize,
    seed: u64,
) -> Result<FdReport> {
    let sys = assemble_node_system(game, graph, node, policies)?;
    let z = sys.pack_variables(traj);
    let params = params_from_trajectory(traj, node.time);
    let ctx = sys.context.from_trajectory(traj);
    let objective = sys.objective(game, &z, &params, &ctx);
    let basis = linalg::null_space(&sys.constraints);
    if basis.ncols() == 0 {
        return Ok(FdReport {
            node,
            max_derivative: 0.0,
            objective,
            null_dim: 0,
            note: Some("fully constrained node".into()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((node.agent as u64) << 32 | node.time as u64));
    let mut worst = 0.0f64;
    for _ in 0..num_probes {
        let w = DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        let mut d = &basis * w;
        let norm = d.norm();
        if norm == 0.0 {
            continue;
        }
        d /= norm;
        let plus = sys.objective(game, &(&z + &d * FD_STEP), &params, &ctx);
        let minus = sys.objective(game, &(&z - &d * FD_STEP), &params, &ctx);
        worst = worst.max(((plus - minus) / (2.0 * FD_STEP)).abs());
    }
    Ok(FdReport {
        node,
        max_derivative: worst,
        objective,
        null_dim: basis.ncols(),
        note: None,
    })
}

/// Re-derives policies and multipliers for `solution` and checks every
/// equilibrium condition.
pub fn verify_solution(
    game: &LqGame,
    info: &InformationStructure,
    solution: &EquilibriumSolution,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let traj = &solution.trajectory;
    traj.check_dims(game)?;
    let graph = build_mpn(game, info)?;
    let policies = solve_stage_policies(game, &graph)?;
    let multipliers = recover_multipliers(game, &graph, traj, &policies)?;
    let residuals = full_kkt_residual(game, &graph, traj, &multipliers, &policies)?;
    let kkt_tol = tol.kkt.unwrap_or_else(|| kkt_tolerance(game));

    let lambda = lambda_self_entries(&graph, &multipliers);
    let lambda_max = lambda
        .iter()
        .filter(|e| e.predicted_zero)
        .fold(0.0f64, |m, e| m.max(e.max_abs));
    let lambda_all = lambda.iter().fold(0.0f64, |m, e| m.max(e.max_abs));
    let eta_max = eta_consistency(&graph, &multipliers, game.num_agents());

    let rollout_exact = rollout(game, &traj.states[0], &traj.controls)
        .map(|r| r.states == traj.states)
        .unwrap_or(false);
    let policy_deviation = (0..game.horizon)
        .flat_map(|t| {
            let u = policies.controls(t, &traj.states[t]);
            u.into_iter()
                .zip(traj.controls[t].iter())
                .map(|(a, b)| linalg::vamax(&(a - b)))
                .collect::<Vec<_>>()
        })
        .fold(0.0f64, f64::max);

    let mut fd = Vec::new();
    let mut fd_fail = Vec::new();
    for node in graph.nodes() {
        let r = finite_difference_stationarity(game, &graph, node, traj, &policies, tol.probes, tol.seed)?;
        if !(r.max_derivative <= tol.fd * (1.0 + r.objective.abs())) {
            fd_fail.push(node);
        }
        fd.push(r);
    }
    let fd_max = fd.iter().fold(0.0f64, |m, r| m.max(r.max_derivative));

    let mut failures = Vec::new();
    if !(residuals.max_residual <= kkt_tol) {
        failures.push(format!(
            "kkt residual {:.3e} exceeds {:.3e}",
            residuals.max_residual, kkt_tol
        ));
    }
    if !(lambda_max <= tol.lambda_self) {
        failures.push(format!("self-policy multiplier {lambda_max:.3e} should vanish"));
    }
    if !(eta_max <= tol.eta) {
        failures.push(format!("dynamics multipliers disagree by {eta_max:.3e}"));
    }
    if !rollout_exact {
        failures.push("trajectory is not a rollout of its controls".into());
    }
    if !(policy_deviation <= kkt_tol) {
        failures.push(format!("controls deviate from the policies by {policy_deviation:.3e}"));
    }
    if !fd_fail.is_empty() {
        let names: Vec<String> = fd_fail.iter().map(ToString::to_string).collect();
        failures.push(format!("finite-difference stationarity fails at {}", names.join(", ")));
    }

    let per_agent_costs = agent_costs(game, traj)?;
    Ok(VerificationReport {
        kkt_max_residual: residuals.max_residual,
        kkt_tolerance: kkt_tol,
        lambda_self_max: lambda_max,
        lambda_self_max_all: lambda_all,
        lambda_self: lambda,
        eta_consistency_max: eta_max,
        rollout_exact,
        policy_deviation,
        fd_max,
        fd,
        per_agent_costs,
        passed: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub trajectory: Option<Trajectory>,
    pub costs: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub a: String,
    pub b: String,
    /// Max absolute difference of the concatenated state trajectories.
    pub max_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub differences: Vec<PairDifference>,
}

impl ComparisonTable {
    pub fn max_difference(&self) -> Option<f64> {
        self.differences
            .iter()
            .filter_map(|d| d.max_difference)
            .reduce(f64::max)
    }
}

/// Solves the game under each structure and tabulates the outcomes.
pub fn compare_structures(
    game: &LqGame,
    x1: &DVector<f64>,
    structures: &[(String, InformationStructure)],
) -> ComparisonTable {
    let rows: Vec<ComparisonRow> = structures
        .iter()
        .map(|(name, info)| match solve_equilibrium(game, info, x1) {
            Ok(sol) => ComparisonRow {
                name: name.clone(),
                trajectory: Some(sol.trajectory),
                costs: Some(sol.costs),
                error: None,
            },
            Err(e) => ComparisonRow {
                name: name.clone(),
                trajectory: None,
                costs: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut differences = Vec::new();
    for (k, a) in rows.iter().enumerate() {
        for b in &rows[k + 1..] {
            let max_difference = match (&a.trajectory, &b.trajectory) {
                (Some(x), Some(y)) => Some(linalg::vamax(&(x.flat_states() - y.flat_states()))),
                _ => None,
            };
            differences.push(PairDifference {
                a: a.name.clone(),
                b: b.name.clone(),
                max_difference,
            });
        }
    }
    ComparisonTable { rows, differences }
}
