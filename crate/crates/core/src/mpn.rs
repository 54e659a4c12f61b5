//! Mathematical program networks specialized to dynamic games: one node per
//! (agent, decision time), edges only from time `t` to `t + 1`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::game::ValidationReport;

/// Node `(agent, time)`, both 0-based. `Display` prints 1-based indices.
///
/// Ordered by time first, then agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub agent: usize,
    pub time: usize,
}

impl NodeId {
    pub fn new(agent: usize, time: usize) -> Self {
        Self { agent, time }
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.agent).cmp(&(other.time, other.agent))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.agent + 1, self.time + 1)
    }
}

/// A decision variable of some node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarId {
    /// Joint state at state index `time` (`1..=T`).
    State { time: usize },
    /// A node's own control.
    Control { agent: usize, time: usize },
    /// `owner`'s private copy of another agent's future control.
    Anticipated {
        owner: NodeId,
        agent: usize,
        time: usize,
    },
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::State { time } => write!(f, "x_{}", time + 1),
            VarId::Control { agent, time } => write!(f, "u^{}_{}", agent + 1, time + 1),
            VarId::Anticipated { agent, time, .. } => write!(f, "û^{}_{}", agent + 1, time + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Temporal,
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
}

/// Dynamics constraint of one agent block, defining the state at `state_time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicsTag {
    pub agent: usize,
    pub state_time: usize,
}

/// Reachable sets `D` of every node (each set contains the node itself).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachableSet {
    num_agents: usize,
    horizon: usize,
    sets: Vec<BTreeSet<NodeId>>,
}

impl ReachableSet {
    pub fn descendants(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.sets[node_index(self.horizon, node)]
    }

    pub fn contains(&self, from: NodeId, to: NodeId) -> bool {
        self.descendants(from).contains(&to)
    }

    /// Nodes not reachable from `node`.
    pub fn complement(&self, node: NodeId) -> BTreeSet<NodeId> {
        let d = self.descendants(node);
        all_nodes(self.num_agents, self.horizon)
            .filter(|n| !d.contains(n))
            .collect()
    }
}

fn node_index(horizon: usize, node: NodeId) -> usize {
    node.agent * horizon + node.time
}

fn all_nodes(num_agents: usize, horizon: usize) -> impl Iterator<Item = NodeId> {
    (0..horizon).flat_map(move |t| (0..num_agents).map(move |i| NodeId::new(i, t)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpnGraph {
    pub num_agents: usize,
    pub horizon: usize,
    pub edges: Vec<Edge>,
    /// Indexed like [`MpnGraph::nodes`]; empty for graphs not made by the builder.
    pub decision_sets: Vec<Vec<VarId>>,
    pub constraint_tags: Vec<Vec<DynamicsTag>>,
    /// Observed agent blocks of each node's decision, ascending.
    pub observed: Vec<Vec<usize>>,
    pub reachable: ReachableSet,
}

impl MpnGraph {
    /// Graph with the given edges and no decision sets.
    pub fn with_edges(num_agents: usize, horizon: usize, edges: Vec<Edge>) -> Self {
        let reachable = closure(num_agents, horizon, &edges);
        Self {
            num_agents,
            horizon,
            edges,
            decision_sets: Vec::new(),
            constraint_tags: Vec::new(),
            observed: Vec::new(),
            reachable,
        }
    }

    /// All nodes, ordered by time then agent.
    pub fn nodes(&self) -> Vec<NodeId> {
        all_nodes(self.num_agents, self.horizon).collect()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.agent < self.num_agents && node.time < self.horizon
    }

    pub(crate) fn index(&self, node: NodeId) -> usize {
        node_index(self.horizon, node)
    }

    pub fn children(&self, node: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == node)
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Reachable descendants of `node`, excluding the node itself.
    pub fn strict_descendants(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.reachable
            .descendants(node)
            .iter()
            .copied()
            .filter(move |n| *n != node)
    }
}

/// Transitive closure plus self, by depth-first search from every node.
fn closure(num_agents: usize, horizon: usize, edges: &[Edge]) -> ReachableSet {
    let k = num_agents * horizon;
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    for e in edges {
        if e.from.agent < num_agents && e.from.time < horizon && e.to.agent < num_agents && e.to.time < horizon {
            adj[node_index(horizon, e.from)].push(e.to);
        }
    }
    let mut sets = vec![BTreeSet::new(); k];
    for start in all_nodes(num_agents, horizon) {
        let set = &mut sets[node_index(horizon, start)];
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if set.insert(n) {
                stack.extend(adj[node_index(horizon, n)].iter().copied());
            }
        }
    }
    ReachableSet {
        num_agents,
        horizon,
        sets,
    }
}

/// Recomputes reachable sets from the graph's edges.
pub fn reachable_sets(graph: &MpnGraph) -> ReachableSet {
    closure(graph.num_agents, graph.horizon, &graph.edges)
}

pub fn validate_graph(graph: &MpnGraph) -> ValidationReport {
    let mut v = Vec::new();
    for e in &graph.edges {
        for end in [e.from, e.to] {
            if !graph.contains(end) {
                v.push(format!("edge {}->{}: node {end} does not exist", e.from, e.to));
            }
        }
        if e.to.time <= e.from.time {
            v.push(format!("edge {}->{}: edge not forward in time", e.from, e.to));
        } else if e.to.time > e.from.time + 1 {
            v.push(format!("edge {}->{}: edge spans more than one step", e.from, e.to));
        }
        match e.kind {
            EdgeKind::Temporal if e.from.agent != e.to.agent => {
                v.push(format!("edge {}->{}: temporal edge between different agents", e.from, e.to))
            }
            EdgeKind::Observation if e.from.agent == e.to.agent => {
                v.push(format!("edge {}->{}: observation edge within one agent", e.from, e.to))
            }
            _ => {}
        }
    }
    if !graph.decision_sets.is_empty() && graph.decision_sets.len() != graph.num_agents * graph.horizon {
        v.push("decision sets do not cover every node".into());
    }
    ValidationReport { violations: v }
}
