//! Equilibrium computation: backward stage-gain recursion over the node KKT
//! systems, then a forward rollout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::builder::build_mpn;
use crate::error::{Error, Result};
use crate::game::{rollout, total_cost, validate_game, LqGame, Trajectory};
use crate::info::InformationStructure;
use crate::kkt::{
    assemble_node_system, full_kkt_residual, joint_b, recover_multipliers, reduce_to_stage_relation,
    ContextLayout, NodeMultipliers, ResidualReport,
};
use crate::linalg;
use crate::mpn::{validate_graph, MpnGraph, NodeId};
use crate::policy::{StagePolicy, StagePolicySet};

/// Condition estimates above this add a warning to the diagnostics.
pub const CONDITION_WARNING: f64 = 1e12;

/// KKT residual tolerance `1e-8 (1 + ||data||_inf)` for `game`.
pub fn kkt_tolerance(game: &LqGame) -> f64 {
    1e-8 * (1.0 + game.data_norm())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kkt: Option<ResidualReport>,
    pub tolerance: f64,
    /// Largest condition estimate over node and stage systems.
    pub max_condition: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn note_condition(&mut self, what: impl FnOnce() -> String, cond: f64) {
        self.max_condition = self.max_condition.max(cond);
        if cond > CONDITION_WARNING {
            let msg = format!("{} is ill-conditioned (estimate {cond:.3e})", what());
            log::warn!("{msg}");
            self.warnings.push(msg);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub trajectory: Trajectory,
    pub policies: StagePolicySet,
    pub costs: Vec<f64>,
    pub multipliers: Vec<NodeMultipliers>,
    pub diagnostics: Diagnostics,
}

impl EquilibriumSolution {
    pub fn max_residual(&self) -> f64 {
        self.diagnostics
            .kkt
            .as_ref()
            .map_or(f64::INFINITY, |r| r.max_residual)
    }
}

/// Stage A: policies for every (agent, time), computed backward in time.
pub fn solve_stage_policies(game: &LqGame, graph: &MpnGraph) -> Result<StagePolicySet> {
    solve_stage_policies_with_diagnostics(game, graph).map(|(p, _)| p)
}

pub fn solve_stage_policies_with_diagnostics(
    game: &LqGame,
    graph: &MpnGraph,
) -> Result<(StagePolicySet, Diagnostics)> {
    let na = game.num_agents();
    let horizon = game.horizon;
    let n = game.state_dim();
    let mtot = game.total_control_dim();
    let mut policies = StagePolicySet::empty(na, horizon);
    let mut diag = Diagnostics::default();

    for t in (0..horizon).rev() {
        let layout = ContextLayout::new(game, t);
        let (pi_mat, pi_vec) = layout.path_map(game, &policies)?;
        let a = &game.a[t];
        let b = joint_b(game, t);

        let mut m = DMatrix::<f64>::identity(mtot, mtot);
        let mut rhs = DMatrix::<f64>::zeros(mtot, n + 1);
        for i in 0..na {
            let node = NodeId::new(i, t);
            let sys = assemble_node_system(game, graph, node, &policies)?;
            let rel = reduce_to_stage_relation(&sys)?;
            diag.note_condition(|| format!("node system {node}"), rel.condition_estimate);

            let s_next = &rel.context_coeff * &pi_mat;
            let s0 = &rel.offset + &rel.context_coeff * &pi_vec;
            let (off, mi) = (game.control_offset(i), game.control_dim(i));
            let block = &rel.control_coeff + &s_next * &b;
            let mut rows = m.rows_mut(off, mi);
            rows -= block;
            rhs.view_mut((off, 0), (mi, n))
                .copy_from(&(&rel.state_coeff + &s_next * a));
            rhs.view_mut((off, n), (mi, 1)).copy_from(&s0);
        }

        let sol = linalg::lu_solve(&m, &rhs).ok_or(Error::SingularStage { time: t })?;
        diag.note_condition(|| format!("stage system at t={t}"), linalg::pivot_condition(&m));
        for i in 0..na {
            let (off, mi) = (game.control_offset(i), game.control_dim(i));
            let gain = sol.view((off, 0), (mi, n)).into_owned();
            let ff: DVector<f64> = sol.view((off, n), (mi, 1)).column(0).into_owned();
            let mask = graph
                .observed
                .get(graph.index(NodeId::new(i, t)))
                .cloned()
                .unwrap_or_default();
            policies.insert(i, t, StagePolicy::new(game, gain, ff, mask));
        }
    }
    Ok((policies, diag))
}

/// Stage B: forward simulation under `u_t = G_t x_t + g_t`.
pub fn rollout_policies(game: &LqGame, policies: &StagePolicySet, x1: &DVector<f64>) -> Result<Trajectory> {
    if x1.len() != game.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            x1.len(),
            game.state_dim()
        )));
    }
    let mut x = x1.clone();
    let mut controls = Vec::with_capacity(game.horizon);
    for t in 0..game.horizon {
        let u = policies.controls(t, &x);
        x = game.step(t, &x, &u);
        controls.push(u);
    }
    rollout(game, x1, &controls)
}

pub fn agent_costs(game: &LqGame, traj: &Trajectory) -> Result<Vec<f64>> {
    (0..game.num_agents()).map(|i| total_cost(game, i, traj)).collect()
}

/// Builds the MPN, computes policies, rolls out from `x1`, recovers
/// multipliers and certifies the result by its KKT residual.
pub fn solve_equilibrium(game: &LqGame, info: &InformationStructure, x1: &DVector<f64>) -> Result<EquilibriumSolution> {
    validate_game(game).into_result()?;
    let graph = build_mpn(game, info)?;
    let gv = validate_graph(&graph);
    if !gv.is_valid() {
        return Err(Error::InvalidGraph(gv.violations));
    }
    let (policies, mut diagnostics) = solve_stage_policies_with_diagnostics(game, &graph)?;
    let trajectory = rollout_policies(game, &policies, x1)?;
    let costs = agent_costs(game, &trajectory)?;
    let multipliers = recover_multipliers(game, &graph, &trajectory, &policies)?;
    for m in multipliers.iter().filter(|m| m.rank_deficient) {
        diagnostics
            .warnings
            .push(format!("multipliers at node {} are not unique", m.node));
    }
    let report = full_kkt_residual(game, &graph, &trajectory, &multipliers, &policies)?;
    diagnostics.tolerance = kkt_tolerance(game);
    let residual = report.max_residual;
    diagnostics.kkt = Some(report);
    let solution = EquilibriumSolution {
        trajectory,
        policies,
        costs,
        multipliers,
        diagnostics,
    };
    if !(residual <= solution.diagnostics.tolerance) {
        return Err(Error::ResidualCheckFailed {
            residual,
            tolerance: solution.diagnostics.tolerance,
            solution: Box::new(solution),
        });
    }
    Ok(solution)
}
