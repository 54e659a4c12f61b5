//! Affine stage policies `u^i_t = G x_t + g` and their observation-masked
//! Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::game::LqGame;
use crate::serde_mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePolicy {
    /// Full-state gain, m_i x n.
    #[serde(with = "serde_mat::matrix")]
    pub gain: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub feedforward: DVector<f64>,
    /// Observed agent blocks.
    pub mask: Vec<usize>,
    /// `gain` with the columns of unobserved blocks zeroed.
    #[serde(with = "serde_mat::matrix")]
    pub masked_jacobian: DMatrix<f64>,
}

impl StagePolicy {
    pub fn new(game: &LqGame, gain: DMatrix<f64>, feedforward: DVector<f64>, mask: Vec<usize>) -> Self {
        let mut masked_jacobian = DMatrix::zeros(gain.nrows(), gain.ncols());
        for &j in &mask {
            let (off, dim) = (game.state_offset(j), game.dims[j].state_dim);
            masked_jacobian
                .columns_mut(off, dim)
                .copy_from(&gain.columns(off, dim));
        }
        Self {
            gain,
            feedforward,
            mask,
            masked_jacobian,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gain * x + &self.feedforward
    }
}

/// Policies for every (agent, time), filled backward in time by the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePolicySet {
    pub num_agents: usize,
    pub horizon: usize,
    /// `entries[t][i]`.
    pub entries: Vec<Vec<Option<StagePolicy>>>,
}

impl StagePolicySet {
    pub fn empty(num_agents: usize, horizon: usize) -> Self {
        Self {
            num_agents,
            horizon,
            entries: vec![vec![None; num_agents]; horizon],
        }
    }

    pub fn get(&self, agent: usize, time: usize) -> Option<&StagePolicy> {
        self.entries.get(time)?.get(agent)?.as_ref()
    }

    pub fn insert(&mut self, agent: usize, time: usize, policy: StagePolicy) {
        self.entries[time][agent] = Some(policy);
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().flatten().all(Option::is_some)
    }

    /// Stacked joint gain and feedforward at time `t`. Panics if a policy is missing.
    pub fn joint(&self, game: &LqGame, t: usize) -> (DMatrix<f64>, DVector<f64>) {
        let n = game.state_dim();
        let m = game.total_control_dim();
        let mut gain = DMatrix::zeros(m, n);
        let mut ff = DVector::zeros(m);
        for i in 0..self.num_agents {
            let p = self.get(i, t).expect("policy computed");
            let off = game.control_offset(i);
            gain.rows_mut(off, p.gain.nrows()).copy_from(&p.gain);
            ff.rows_mut(off, p.feedforward.len()).copy_from(&p.feedforward);
        }
        (gain, ff)
    }

    /// Controls of every agent at `t` for state `x`.
    pub fn controls(&self, t: usize, x: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.num_agents)
            .map(|i| self.get(i, t).expect("policy computed").apply(x))
            .collect()
    }

    /// Largest absolute gain or feedforward difference to `other`.
    pub fn max_difference(&self, other: &StagePolicySet) -> f64 {
        let mut d = 0.0f64;
        for (a, b) in self.entries.iter().flatten().zip(other.entries.iter().flatten()) {
            match (a, b) {
                (Some(a), Some(b)) if a.gain.shape() == b.gain.shape() => {
                    d = d.max((&a.gain - &b.gain).amax());
                    d = d.max((&a.feedforward - &b.feedforward).amax());
                }
                _ => return f64::INFINITY,
            }
        }
        d
    }
}
