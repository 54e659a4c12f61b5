//! Per-node KKT systems of the game MPN.
//!
//! For node `(i,t)` the Lagrangian is
//! `J^i_t + sum eta'(x_{k+1} - A x_k - sum_l B^l u^l_k) + sum lambda'(v - gamma(x_s))`
//! over the dynamics for times `t..T` and one policy constraint per reachable
//! descendant. Stationarity rows are `H z + h + C' mu = 0` and primal rows are
//! `C z = d + E_p p + E_c c`, where
//!
//! * `p = [x_t; u_t]` holds the node-time state and the stacked same-time
//!   controls (the node's own block is unused), and
//! * `c` is the *context*: equilibrium-path states `xbar_s` and controls
//!   `ubar_s` for `s in t+1..T`. Non-reachable controls enter the dynamics
//!   through `ubar`, and the unobserved part of each descendant policy
//!   contributes `(G - J) xbar_s`.
//!
//! Gradients follow the `2Q`, `2R` scaling of the stage costs.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::builder::{node_variables, policy_constraints};
use crate::error::{Error, Result};
use crate::game::{LqGame, Trajectory};
use crate::linalg;
use crate::mpn::{MpnGraph, NodeId, VarId};
use crate::policy::StagePolicySet;
use crate::serde_mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MultiplierId {
    /// Dynamics of `agent`'s block defining the state at `state_time`.
    Dyn {
        node: NodeId,
        agent: usize,
        state_time: usize,
    },
    /// Consistency of the node agent's own control at a later `time`.
    PolicySelf { node: NodeId, time: usize },
    /// Consistency of an anticipated control of another agent.
    PolicyCross {
        node: NodeId,
        agent: usize,
        time: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowBlock {
    Dynamics,
    Policy,
}

/// Layout of the context vector for nodes at decision time `node_time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextLayout {
    pub node_time: usize,
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
}

impl ContextLayout {
    pub fn new(game: &LqGame, node_time: usize) -> Self {
        Self {
            node_time,
            horizon: game.horizon,
            state_dim: game.state_dim(),
            control_dim: game.total_control_dim(),
        }
    }

    fn steps(&self) -> usize {
        self.horizon.saturating_sub(self.node_time + 1)
    }

    pub fn len(&self) -> usize {
        self.steps() * (self.state_dim + self.control_dim)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of `xbar_s`, `s in node_time+1..horizon`.
    pub fn state(&self, s: usize) -> usize {
        (s - self.node_time - 1) * self.state_dim
    }

    /// Offset of the stacked `ubar_s`.
    pub fn controls(&self, s: usize) -> usize {
        self.steps() * self.state_dim + (s - self.node_time - 1) * self.control_dim
    }

    /// Context read off a trajectory.
    pub fn from_trajectory(&self, traj: &Trajectory) -> DVector<f64> {
        let mut c = DVector::zeros(self.len());
        for s in self.node_time + 1..self.horizon {
            c.rows_mut(self.state(s), self.state_dim).copy_from(&traj.states[s]);
            let u = stack(&traj.controls[s]);
            c.rows_mut(self.controls(s), self.control_dim).copy_from(&u);
        }
        c
    }

    /// Context as an affine function `Pi xbar_{t+1} + pi` of the next
    /// equilibrium state, propagated with the (already computed) policies
    /// for times after `node_time`.
    pub fn path_map(&self, game: &LqGame, policies: &StagePolicySet) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.state_dim;
        let mut pi_mat = DMatrix::zeros(self.len(), n);
        let mut pi_vec = DVector::zeros(self.len());
        let mut phi = DMatrix::identity(n, n);
        let mut phi0 = DVector::zeros(n);
        for s in self.node_time + 1..self.horizon {
            for i in 0..game.num_agents() {
                if policies.get(i, s).is_none() {
                    return Err(Error::MissingPolicy {
                        node: NodeId::new(i, self.node_time),
                        agent: i,
                        time: s,
                    });
                }
            }
            let (g, g0) = policies.joint(game, s);
            pi_mat.rows_mut(self.state(s), n).copy_from(&phi);
            pi_vec.rows_mut(self.state(s), n).copy_from(&phi0);
            let u_mat = &g * &phi;
            let u_vec = &g * &phi0 + &g0;
            pi_mat
                .rows_mut(self.controls(s), self.control_dim)
                .copy_from(&u_mat);
            pi_vec
                .rows_mut(self.controls(s), self.control_dim)
                .copy_from(&u_vec);
            let b = joint_b(game, s);
            phi = &game.a[s] * &phi + &b * u_mat;
            phi0 = &game.a[s] * &phi0 + &b * u_vec;
        }
        Ok((pi_mat, pi_vec))
    }
}

pub(crate) fn stack(vs: &[DVector<f64>]) -> DVector<f64> {
    let data: Vec<f64> = vs.iter().flat_map(|v| v.iter().copied()).collect();
    DVector::from_vec(data)
}

pub(crate) fn joint_b(game: &LqGame, t: usize) -> DMatrix<f64> {
    let n = game.state_dim();
    let mut b = DMatrix::zeros(n, game.total_control_dim());
    for (j, bj) in game.b[t].iter().enumerate() {
        b.columns_mut(game.control_offset(j), bj.ncols()).copy_from(bj);
    }
    b
}

/// Node parameters `[x_t; u_t]` read off a trajectory.
pub fn params_from_trajectory(traj: &Trajectory, time: usize) -> DVector<f64> {
    let x = &traj.states[time];
    let u = stack(&traj.controls[time]);
    let mut p = DVector::zeros(x.len() + u.len());
    p.rows_mut(0, x.len()).copy_from(x);
    p.rows_mut(x.len(), u.len()).copy_from(&u);
    p
}

#[derive(Debug, Clone)]
pub struct NodeKktSystem {
    pub node: NodeId,
    pub variables: Vec<VarId>,
    var_index: HashMap<VarId, (usize, usize)>,
    pub multipliers: Vec<MultiplierId>,
    mult_index: HashMap<MultiplierId, (usize, usize)>,
    pub row_blocks: Vec<RowBlock>,
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub rhs_const: DVector<f64>,
    pub rhs_params: DMatrix<f64>,
    pub rhs_context: DMatrix<f64>,
    pub context: ContextLayout,
    /// Offset of the node agent's control inside the parameter vector.
    pub own_param_offset: usize,
}

fn var_dim(game: &LqGame, v: &VarId) -> usize {
    match v {
        VarId::State { .. } => game.state_dim(),
        VarId::Control { agent, .. } | VarId::Anticipated { agent, .. } => game.control_dim(*agent),
    }
}

impl NodeKktSystem {
    pub fn num_variables(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn var_range(&self, v: &VarId) -> Option<Range<usize>> {
        self.var_index.get(v).map(|&(o, d)| o..o + d)
    }

    pub fn mult_range(&self, m: &MultiplierId) -> Option<Range<usize>> {
        self.mult_index.get(m).map(|&(o, d)| o..o + d)
    }

    /// Range of the node's own current control inside `z`.
    pub fn own_control(&self) -> Range<usize> {
        self.var_range(&VarId::Control {
            agent: self.node.agent,
            time: self.node.time,
        })
        .expect("own control is always a variable")
    }

    /// `[[H, C'], [C, 0]]`.
    pub fn kkt_matrix(&self) -> DMatrix<f64> {
        let (nz, nc) = (self.num_variables(), self.num_constraints());
        let mut k = DMatrix::zeros(nz + nc, nz + nc);
        k.view_mut((0, 0), (nz, nz)).copy_from(&self.hessian);
        k.view_mut((0, nz), (nz, nc)).copy_from(&self.constraints.transpose());
        k.view_mut((nz, 0), (nc, nz)).copy_from(&self.constraints);
        k
    }

    /// Right-hand side of the primal rows.
    pub fn primal_rhs(&self, params: &DVector<f64>, context: &DVector<f64>) -> DVector<f64> {
        &self.rhs_const + &self.rhs_params * params + &self.rhs_context * context
    }

    /// Solves the KKT system directly for `(z, mu)`.
    pub fn solve(&self, params: &DVector<f64>, context: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let (nz, nc) = (self.num_variables(), self.num_constraints());
        let mut rhs = DMatrix::zeros(nz + nc, 1);
        rhs.view_mut((0, 0), (nz, 1)).copy_from(&(-&self.linear));
        rhs.view_mut((nz, 0), (nc, 1))
            .copy_from(&self.primal_rhs(params, context));
        let sol = linalg::lu_solve(&self.kkt_matrix(), &rhs).ok_or(Error::DegenerateNode { node: self.node })?;
        let w = sol.column(0);
        Ok((w.rows(0, nz).into_owned(), w.rows(nz, nc).into_owned()))
    }

    /// Stationarity residual `H z + h + C' mu` and primal residual
    /// `C z - rhs`.
    pub fn residuals(
        &self,
        z: &DVector<f64>,
        mu: &DVector<f64>,
        params: &DVector<f64>,
        context: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let stat = &self.hessian * z + &self.linear + self.constraints.transpose() * mu;
        let primal = &self.constraints * z - self.primal_rhs(params, context);
        (stat, primal)
    }

    /// Node variables read off a trajectory; anticipated copies take the
    /// realized controls.
    pub fn pack_variables(&self, traj: &Trajectory) -> DVector<f64> {
        let mut z = DVector::zeros(self.num_variables());
        for v in &self.variables {
            let r = self.var_range(v).expect("known variable");
            let val = match v {
                VarId::State { time } => &traj.states[*time],
                VarId::Control { agent, time } | VarId::Anticipated { agent, time, .. } => {
                    &traj.controls[*time][*agent]
                }
            };
            z.rows_mut(r.start, r.len()).copy_from(val);
        }
        z
    }

    /// Cost-to-go `J^i_t` evaluated directly from the game costs, with
    /// non-variable quantities taken from `params` and `context`.
    pub fn objective(&self, game: &LqGame, z: &DVector<f64>, params: &DVector<f64>, context: &DVector<f64>) -> f64 {
        let (i, t) = (self.node.agent, self.node.time);
        let n = game.state_dim();
        let horizon = game.horizon;
        let slice = |r: Range<usize>| z.rows(r.start, r.len()).into_owned();
        let mut cost = 0.0;
        for s in t..=horizon {
            let x = if s == t {
                params.rows(0, n).into_owned()
            } else {
                slice(self.var_range(&VarId::State { time: s }).unwrap())
            };
            if s == horizon {
                cost += game.stage_cost(i, s, &x, &[]);
                break;
            }
            let controls: Vec<DVector<f64>> = (0..game.num_agents())
                .map(|l| {
                    let dim = game.control_dim(l);
                    if l == i {
                        slice(self.var_range(&VarId::Control { agent: i, time: s }).unwrap())
                    } else if s == t {
                        params.rows(n + game.control_offset(l), dim).into_owned()
                    } else if let Some(r) = self.var_range(&VarId::Anticipated {
                        owner: self.node,
                        agent: l,
                        time: s,
                    }) {
                        slice(r)
                    } else {
                        context
                            .rows(self.context.controls(s) + game.control_offset(l), dim)
                            .into_owned()
                    }
                })
                .collect();
            cost += game.stage_cost(i, s, &x, &controls);
        }
        cost
    }
}

/// Assembles the KKT system of `node` given the policies of every stage
/// after the node's time.
pub fn assemble_node_system(
    game: &LqGame,
    graph: &MpnGraph,
    node: NodeId,
    policies: &StagePolicySet,
) -> Result<NodeKktSystem> {
    let (i, t) = (node.agent, node.time);
    let n = game.state_dim();
    let horizon = game.horizon;
    let mtot = game.total_control_dim();

    let variables = node_variables(graph, node);
    let mut var_index = HashMap::new();
    let mut nz = 0;
    for v in &variables {
        let d = var_dim(game, v);
        var_index.insert(*v, (nz, d));
        nz += d;
    }

    let mut hessian = DMatrix::zeros(nz, nz);
    let mut linear = DVector::zeros(nz);
    for v in &variables {
        let (o, d) = var_index[v];
        let (h, l) = match *v {
            VarId::State { time } => (&game.q_mat[i][time], &game.q_vec[i][time]),
            VarId::Control { agent, time } | VarId::Anticipated { agent, time, .. } => {
                (&game.r_mat[i][agent][time], &game.r_vec[i][agent][time])
            }
        };
        hessian.view_mut((o, o), (d, d)).copy_from(&(h * 2.0));
        linear.rows_mut(o, d).copy_from(&(l * 2.0));
    }

    let descendants = graph.reachable.descendants(node);
    let pcs = policy_constraints(graph, node);

    let mut multipliers = Vec::new();
    let mut mult_index = HashMap::new();
    let mut row_blocks = Vec::new();
    let mut nc = 0;
    for k in t + 1..=horizon {
        for j in 0..game.num_agents() {
            let id = MultiplierId::Dyn {
                node,
                agent: j,
                state_time: k,
            };
            let d = game.dims[j].state_dim;
            multipliers.push(id);
            mult_index.insert(id, (nc, d));
            row_blocks.extend(std::iter::repeat_n(RowBlock::Dynamics, d));
            nc += d;
        }
    }
    for pc in &pcs {
        let id = if pc.owner.agent == i {
            MultiplierId::PolicySelf { node, time: pc.owner.time }
        } else {
            MultiplierId::PolicyCross {
                node,
                agent: pc.owner.agent,
                time: pc.owner.time,
            }
        };
        let d = game.control_dim(pc.owner.agent);
        multipliers.push(id);
        mult_index.insert(id, (nc, d));
        row_blocks.extend(std::iter::repeat_n(RowBlock::Policy, d));
        nc += d;
    }

    let context = ContextLayout::new(game, t);
    let np = n + mtot;
    let mut constraints = DMatrix::zeros(nc, nz);
    let mut rhs_const = DVector::zeros(nc);
    let mut rhs_params = DMatrix::zeros(nc, np);
    let mut rhs_context = DMatrix::zeros(nc, context.len());

    for k in t + 1..=horizon {
        let row = mult_index[&MultiplierId::Dyn {
            node,
            agent: 0,
            state_time: k,
        }]
            .0;
        let s = k - 1;
        let (xo, _) = var_index[&VarId::State { time: k }];
        constraints
            .view_mut((row, xo), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        if s == t {
            rhs_params.view_mut((row, 0), (n, n)).copy_from(&game.a[s]);
        } else {
            let (po, _) = var_index[&VarId::State { time: s }];
            constraints.view_mut((row, po), (n, n)).copy_from(&(-&game.a[s]));
        }
        for l in 0..game.num_agents() {
            let b = &game.b[s][l];
            let ml = b.ncols();
            if l == i {
                let (uo, _) = var_index[&VarId::Control { agent: i, time: s }];
                constraints.view_mut((row, uo), (n, ml)).copy_from(&(-b));
            } else if s == t {
                rhs_params
                    .view_mut((row, n + game.control_offset(l)), (n, ml))
                    .copy_from(b);
            } else if descendants.contains(&NodeId::new(l, s)) {
                let (uo, _) = var_index[&VarId::Anticipated {
                    owner: node,
                    agent: l,
                    time: s,
                }];
                constraints.view_mut((row, uo), (n, ml)).copy_from(&(-b));
            } else {
                rhs_context
                    .view_mut((row, context.controls(s) + game.control_offset(l)), (n, ml))
                    .copy_from(b);
            }
        }
    }

    for (pc, id) in pcs.iter().zip(multipliers.iter().skip(horizon.saturating_sub(t) * game.num_agents())) {
        let (row, d) = mult_index[id];
        let owner = pc.owner;
        let policy = policies.get(owner.agent, owner.time).ok_or(Error::MissingPolicy {
            node,
            agent: owner.agent,
            time: owner.time,
        })?;
        let (vo, _) = var_index[&pc.var];
        constraints
            .view_mut((row, vo), (d, d))
            .copy_from(&DMatrix::identity(d, d));
        let (xo, _) = var_index[&VarId::State { time: owner.time }];
        constraints
            .view_mut((row, xo), (d, n))
            .copy_from(&(-&policy.masked_jacobian));
        rhs_context
            .view_mut((row, context.state(owner.time)), (d, n))
            .copy_from(&(&policy.gain - &policy.masked_jacobian));
        rhs_const.rows_mut(row, d).copy_from(&policy.feedforward);
    }

    Ok(NodeKktSystem {
        node,
        variables,
        var_index,
        multipliers,
        mult_index,
        row_blocks,
        hessian,
        linear,
        constraints,
        rhs_const,
        rhs_params,
        rhs_context,
        context,
        own_param_offset: n + game.control_offset(i),
    })
}

/// The node's own current control as an affine function of its parameters
/// and context: `u^i_t = S_x x_t + S_u u_t + S_c c + s0`, with the own block
/// of `S_u` zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRelation {
    pub node: NodeId,
    #[serde(with = "serde_mat::matrix")]
    pub state_coeff: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub control_coeff: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub context_coeff: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub offset: DVector<f64>,
    /// LU pivot-ratio estimate of the node KKT matrix conditioning.
    pub condition_estimate: f64,
}

impl StageRelation {
    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>, context: &DVector<f64>) -> DVector<f64> {
        &self.state_coeff * x + &self.control_coeff * u + &self.context_coeff * context + &self.offset
    }
}

/// Eliminates every node unknown except the own current control.
pub fn reduce_to_stage_relation(system: &NodeKktSystem) -> Result<StageRelation> {
    let (nz, nc) = (system.num_variables(), system.num_constraints());
    let np = system.rhs_params.ncols();
    let nctx = system.rhs_context.ncols();
    let mut rhs = DMatrix::zeros(nz + nc, 1 + np + nctx);
    rhs.view_mut((0, 0), (nz, 1)).copy_from(&(-&system.linear));
    rhs.view_mut((nz, 0), (nc, 1)).copy_from(&system.rhs_const);
    rhs.view_mut((nz, 1), (nc, np)).copy_from(&system.rhs_params);
    rhs.view_mut((nz, 1 + np), (nc, nctx))
        .copy_from(&system.rhs_context);

    let kkt = system.kkt_matrix();
    let sol = linalg::lu_solve(&kkt, &rhs).ok_or(Error::DegenerateNode { node: system.node })?;
    let own = system.own_control();
    let rows = sol.rows(own.start, own.len());
    let state_dim = system.context.state_dim;
    let mut control_coeff = rows.columns(1 + state_dim, np - state_dim).into_owned();
    // The own block of the parameter vector never enters the system.
    control_coeff
        .columns_mut(system.own_param_offset - state_dim, own.len())
        .fill(0.0);
    Ok(StageRelation {
        node: system.node,
        state_coeff: rows.columns(1, state_dim).into_owned(),
        control_coeff,
        context_coeff: rows.columns(1 + np, nctx).into_owned(),
        offset: rows.column(0).into_owned(),
        condition_estimate: linalg::pivot_condition(&kkt),
    })
}

/// Multipliers of one node, in the node system's multiplier order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMultipliers {
    pub node: NodeId,
    pub ids: Vec<MultiplierId>,
    #[serde(with = "serde_mat::vectors")]
    pub values: Vec<DVector<f64>>,
    /// Max-abs residual of the least-squares stationarity solve.
    pub ls_residual: f64,
    /// Multipliers are not unique; `values` is the minimum-norm solution.
    pub rank_deficient: bool,
}

impl NodeMultipliers {
    pub fn get(&self, id: &MultiplierId) -> Option<&DVector<f64>> {
        self.ids.iter().position(|x| x == id).map(|k| &self.values[k])
    }

    /// Flat multiplier vector matching `system`'s layout; missing ids are zero.
    pub fn flatten_for(&self, system: &NodeKktSystem) -> DVector<f64> {
        let mut mu = DVector::zeros(system.num_constraints());
        for (id, v) in self.ids.iter().zip(&self.values) {
            if let Some(r) = system.mult_range(id) {
                if r.len() == v.len() {
                    mu.rows_mut(r.start, r.len()).copy_from(v);
                }
            }
        }
        mu
    }
}

/// Least-squares multiplier recovery from the stationarity rows of `system`
/// at the variable values `z`.
pub fn recover_node_multipliers(system: &NodeKktSystem, z: &DVector<f64>) -> NodeMultipliers {
    let ct = system.constraints.transpose();
    let rhs = -(&system.hessian * z + &system.linear);
    let (mu, rank) = linalg::lstsq(&ct, &rhs);
    let ls_residual = linalg::vamax(&(&ct * &mu - &rhs));
    let values = system
        .multipliers
        .iter()
        .map(|id| {
            let r = system.mult_range(id).unwrap();
            mu.rows(r.start, r.len()).into_owned()
        })
        .collect();
    NodeMultipliers {
        node: system.node,
        ids: system.multipliers.clone(),
        values,
        ls_residual,
        rank_deficient: rank < system.num_constraints(),
    }
}

/// Recovers multipliers of every node along a candidate equilibrium.
pub fn recover_multipliers(
    game: &LqGame,
    graph: &MpnGraph,
    traj: &Trajectory,
    policies: &StagePolicySet,
) -> Result<Vec<NodeMultipliers>> {
    graph
        .nodes()
        .into_iter()
        .map(|node| {
            let sys = assemble_node_system(game, graph, node, policies)?;
            let z = sys.pack_variables(traj);
            let m = recover_node_multipliers(&sys, &z);
            if m.rank_deficient {
                log::warn!("multipliers at node {node} are not unique; using minimum-norm values");
            }
            Ok(m)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResidual {
    pub node: NodeId,
    pub stationarity: f64,
    pub dynamics: f64,
    pub policy: f64,
}

impl NodeResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.dynamics).max(self.policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub nodes: Vec<NodeResidual>,
    pub max_residual: f64,
}

/// Evaluates every node's stationarity and primal rows at the shared values
/// of `traj` (anticipated copies equal the realized controls).
pub fn full_kkt_residual(
    game: &LqGame,
    graph: &MpnGraph,
    traj: &Trajectory,
    multipliers: &[NodeMultipliers],
    policies: &StagePolicySet,
) -> Result<ResidualReport> {
    let mut nodes = Vec::new();
    for node in graph.nodes() {
        let sys = assemble_node_system(game, graph, node, policies)?;
        let z = sys.pack_variables(traj);
        let mu = multipliers
            .iter()
            .find(|m| m.node == node)
            .map(|m| m.flatten_for(&sys))
            .unwrap_or_else(|| DVector::zeros(sys.num_constraints()));
        let params = params_from_trajectory(traj, node.time);
        let ctx = sys.context.from_trajectory(traj);
        let (stat, primal) = sys.residuals(&z, &mu, &params, &ctx);
        let block_max = |kind: RowBlock| {
            primal
                .iter()
                .zip(&sys.row_blocks)
                .filter(|(_, b)| **b == kind)
                .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
        };
        nodes.push(NodeResidual {
            node,
            stationarity: linalg::vamax(&stat),
            dynamics: block_max(RowBlock::Dynamics),
            policy: block_max(RowBlock::Policy),
        });
    }
    let max_residual = nodes.iter().map(NodeResidual::max).fold(0.0, f64::max);
    Ok(ResidualReport { nodes, max_residual })
}
