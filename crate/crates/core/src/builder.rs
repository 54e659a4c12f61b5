//! Construction of the game MPN from a game and an information structure.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::LqGame;
use crate::info::InformationStructure;
use crate::mpn::{DynamicsTag, Edge, EdgeKind, MpnGraph, NodeId, VarId};

/// Builds nodes, temporal edges `(i,t)->(i,t+1)`, observation edges
/// `(j,t)->(i,t+1)` whenever `i` observes `j` at `t`, the dynamics tags of
/// each node, and each node's decision set.
pub fn build_mpn(game: &LqGame, info: &InformationStructure) -> Result<MpnGraph> {
    info.check_shape(game.num_agents(), game.horizon)?;
    Ok(build_from_info(info))
}

pub(crate) fn build_from_info(info: &InformationStructure) -> MpnGraph {
    let (na, horizon) = (info.num_agents, info.horizon);
    let mut edges = Vec::new();
    for t in 0..horizon.saturating_sub(1) {
        for i in 0..na {
            edges.push(Edge {
                from: NodeId::new(i, t),
                to: NodeId::new(i, t + 1),
                kind: EdgeKind::Temporal,
            });
        }
        for i in 0..na {
            for j in (0..na).filter(|&j| j != i && info.observes(t, i, j)) {
                edges.push(Edge {
                    from: NodeId::new(j, t),
                    to: NodeId::new(i, t + 1),
                    kind: EdgeKind::Observation,
                });
            }
        }
    }

    let mut graph = MpnGraph::with_edges(na, horizon, edges);
    // Per-node tables are stored in `MpnGraph::index` order (agent-major).
    let mut slots: Vec<NodeId> = graph.nodes();
    slots.sort_by_key(|n| graph.index(*n));
    graph.constraint_tags = slots
        .iter()
        .map(|n| {
            (n.time + 1..=horizon)
                .flat_map(|s| (0..na).map(move |j| DynamicsTag { agent: j, state_time: s }))
                .collect()
        })
        .collect();
    graph.observed = slots
        .iter()
        .map(|n| info.observed_state_index(n.agent, n.time))
        .collect();
    graph.decision_sets = slots.iter().map(|n| node_variables(&graph, *n)).collect();
    graph
}

/// Decision variables of `node`: states `x_{t+1..=T}`, own controls
/// `u^i_{t..T}`, then anticipated copies of every reachable other-agent
/// decision, ordered by (time, agent).
pub fn node_variables(graph: &MpnGraph, node: NodeId) -> Vec<VarId> {
    let horizon = graph.horizon;
    let mut vars: Vec<VarId> = (node.time + 1..=horizon)
        .map(|time| VarId::State { time })
        .collect();
    vars.extend((node.time..horizon).map(|time| VarId::Control {
        agent: node.agent,
        time,
    }));
    vars.extend(
        graph
            .strict_descendants(node)
            .filter(|d| d.agent != node.agent)
            .map(|d| VarId::Anticipated {
                owner: node,
                agent: d.agent,
                time: d.time,
            }),
    );
    vars
}

/// One policy-consistency constraint at a node: `var = gamma_owner(observed states)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConstraint {
    pub var: VarId,
    pub owner: NodeId,
    pub observed: Vec<usize>,
}

/// One constraint per strict descendant of `node`, ordered by (time, agent).
pub fn policy_constraints(graph: &MpnGraph, node: NodeId) -> Vec<PolicyConstraint> {
    graph
        .strict_descendants(node)
        .map(|d| {
            let var = if d.agent == node.agent {
                VarId::Control {
                    agent: d.agent,
                    time: d.time,
                }
            } else {
                VarId::Anticipated {
                    owner: node,
                    agent: d.agent,
                    time: d.time,
                }
            };
            let observed = graph
                .observed
                .get(graph.index(d))
                .cloned()
                .unwrap_or_default();
            PolicyConstraint {
                var,
                owner: d,
                observed,
            }
        })
        .collect()
}
