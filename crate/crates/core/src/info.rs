//! Per-timestep observation relations between agents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `obs[t][i][j]` is true iff agent `i` observes agent `j`'s state block at
/// decision time `t`. Self-observation is an explicit flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationStructure {
    pub num_agents: usize,
    pub horizon: usize,
    pub obs: Vec<Vec<Vec<bool>>>,
}

/// How a pair of agents relate at one decision time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairRelation {
    MutualFeedback,
    MutualOpenLoop,
    /// The first agent observes the second, not vice versa.
    OneSided { observer: usize, observed: usize },
}

impl InformationStructure {
    fn filled(num_agents: usize, horizon: usize, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let obs = (0..horizon)
            .map(|t| {
                (0..num_agents)
                    .map(|i| (0..num_agents).map(|j| f(t, i, j)).collect())
                    .collect()
            })
            .collect();
        Self {
            num_agents,
            horizon,
            obs,
        }
    }

    /// Nobody observes anything after the initial state.
    pub fn open_loop(num_agents: usize, horizon: usize) -> Self {
        Self::filled(num_agents, horizon, |_, _, _| false)
    }

    /// Everyone observes the full state at every time.
    pub fn feedback(num_agents: usize, horizon: usize) -> Self {
        Self::filled(num_agents, horizon, |_, _, _| true)
    }

    /// Agent `i` observes itself and agent `(i + 1) mod N` at every time.
    pub fn cyclic(num_agents: usize, horizon: usize) -> Self {
        Self::filled(num_agents, horizon, |_, i, j| {
            i == j || j == (i + 1) % num_agents
        })
    }

    /// Builds a structure from an explicit `[t][i][j]` array, checking its shape.
    pub fn from_array(obs: Vec<Vec<Vec<bool>>>) -> Result<Self> {
        let horizon = obs.len();
        let num_agents = obs.first().map_or(0, Vec::len);
        for (t, m) in obs.iter().enumerate() {
            if m.len() != num_agents || m.iter().any(|row| row.len() != num_agents) {
                return Err(Error::DimensionMismatch(format!(
                    "observation array at t={t} is not {num_agents}x{num_agents}"
                )));
            }
        }
        Ok(Self {
            num_agents,
            horizon,
            obs,
        })
    }

    pub fn observes(&self, t: usize, i: usize, j: usize) -> bool {
        self.obs[t][i][j]
    }

    pub fn set(&mut self, t: usize, i: usize, j: usize, value: bool) {
        self.obs[t][i][j] = value;
    }

    /// Agents whose state blocks agent `i` sees at time `t`, ascending.
    pub fn observed_state_index(&self, i: usize, t: usize) -> Vec<usize> {
        (0..self.num_agents).filter(|&j| self.obs[t][i][j]).collect()
    }

    pub fn classify_pair(&self, i: usize, j: usize, t: usize) -> PairRelation {
        debug_assert_ne!(i, j);
        match (self.obs[t][i][j], self.obs[t][j][i]) {
            (true, true) => PairRelation::MutualFeedback,
            (false, false) => PairRelation::MutualOpenLoop,
            (true, false) => PairRelation::OneSided {
                observer: i,
                observed: j,
            },
            (false, true) => PairRelation::OneSided {
                observer: j,
                observed: i,
            },
        }
    }

    /// Number of true off-diagonal entries at time `t`.
    pub fn off_diagonal_count(&self, t: usize) -> usize {
        (0..self.num_agents)
            .flat_map(|i| (0..self.num_agents).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.obs[t][i][j])
            .count()
    }

    pub fn check_shape(&self, num_agents: usize, horizon: usize) -> Result<()> {
        let ok = self.num_agents == num_agents
            && self.horizon == horizon
            && self.obs.len() == horizon
            && self
                .obs
                .iter()
                .all(|m| m.len() == num_agents && m.iter().all(|r| r.len() == num_agents));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                info_agents: self.num_agents,
                info_horizon: self.horizon,
                game_agents: num_agents,
                game_horizon: horizon,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_loop_is_all_false() {
        let info = InformationStructure::open_loop(2, 2);
        assert_eq!(info.obs.iter().flatten().flatten().filter(|b| !**b).count(), 8);
        for t in 0..2 {
            for i in 0..2 {
                assert!(info.observed_state_index(i, t).is_empty());
            }
        }
    }

    #[test]
    fn feedback_is_all_true() {
        let info = InformationStructure::feedback(2, 2);
        assert!(info.obs.iter().flatten().flatten().all(|b| *b));
    }

    #[test]
    fn cyclic_observed_indices() {
        let info = InformationStructure::cyclic(3, 3);
        for t in 0..3 {
            assert_eq!(info.observed_state_index(0, t), vec![0, 1]);
            assert_eq!(info.observed_state_index(1, t), vec![1, 2]);
            assert_eq!(info.observed_state_index(2, t), vec![0, 2]);
            assert_eq!(info.off_diagonal_count(t), 3);
        }
    }

    #[test]
    fn pair_classification() {
        let mut info = InformationStructure::open_loop(2, 1);
        assert_eq!(info.classify_pair(0, 1, 0), PairRelation::MutualOpenLoop);
        info.set(0, 0, 1, true);
        assert_eq!(
            info.classify_pair(0, 1, 0),
            PairRelation::OneSided { observer: 0, observed: 1 }
        );
        assert_eq!(
            info.classify_pair(1, 0, 0),
            PairRelation::OneSided { observer: 0, observed: 1 }
        );
        info.set(0, 1, 0, true);
        assert_eq!(info.classify_pair(0, 1, 0), PairRelation::MutualFeedback);
    }

    #[test]
    fn from_array_rejects_ragged() {
        assert!(InformationStructure::from_array(vec![vec![vec![true, false], vec![true]]]).is_err());
    }
}
