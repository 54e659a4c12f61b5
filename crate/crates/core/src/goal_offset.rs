//! The goal/offset cost family: each agent tracks a goal and keeps desired
//! offsets to the other agents, under decoupled per-agent dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AgentDims, LqGame};
use crate::info::InformationStructure;

/// Cost of agent `i` at time `t`:
/// `||x^i - g^i||^2 + u^i'R^ii u^i + sum_{j!=i} ||x^i - x^j - p^ij_t||^2_{W^ij_t}`,
/// with the terminal stage (`t = T`) carrying the state terms only.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalOffsetSpec {
    pub dims: Vec<AgentDims>,
    pub horizon: usize,
    pub goals: Vec<DVector<f64>>,
    /// `offsets[t][i][j]`, `t in 0..=T`; the diagonal is ignored.
    pub offsets: Vec<Vec<Vec<DVector<f64>>>>,
    /// `pair_weights[t][i][j]`, `t in 0..=T`; the diagonal is ignored.
    pub pair_weights: Vec<Vec<Vec<DMatrix<f64>>>>,
    /// `control_weights[t][i]`.
    pub control_weights: Vec<Vec<DMatrix<f64>>>,
    /// `a[t][i]`, `b[t][i]`: agent `i`'s own dynamics blocks.
    pub a: Vec<Vec<DMatrix<f64>>>,
    pub b: Vec<Vec<DMatrix<f64>>>,
}

impl GoalOffsetSpec {
    pub fn num_agents(&self) -> usize {
        self.dims.len()
    }

    fn coupled(&self, t: usize, i: usize, j: usize) -> bool {
        i != j && self.pair_weights[t][i][j].iter().any(|w| *w != 0.0)
    }

    /// Cost of `agent` at time `t` evaluated in sum-of-norms form.
    pub fn direct_stage_cost(&self, agent: usize, t: usize, x: &DVector<f64>, u: Option<&DVector<f64>>) -> f64 {
        let block = |j: usize| {
            let off: usize = self.dims[..j].iter().map(|d| d.state_dim).sum();
            x.rows(off, self.dims[j].state_dim).into_owned()
        };
        let xi = block(agent);
        let mut c = (&xi - &self.goals[agent]).norm_squared();
        if let Some(u) = u {
            c += u.dot(&(&self.control_weights[t][agent] * u));
        }
        for j in (0..self.num_agents()).filter(|&j| self.coupled(t, agent, j)) {
            let e = &xi - block(j) - &self.offsets[t][agent][j];
            c += e.dot(&(&self.pair_weights[t][agent][j] * &e));
        }
        c
    }

    /// The constant dropped from agent `agent`'s cost at time `t`.
    pub fn dropped_constant(&self, agent: usize, t: usize) -> f64 {
        let mut c = self.goals[agent].norm_squared();
        for j in (0..self.num_agents()).filter(|&j| self.coupled(t, agent, j)) {
            let p = &self.offsets[t][agent][j];
            c += p.dot(&(&self.pair_weights[t][agent][j] * p));
        }
        c
    }

    fn check(&self) -> Result<()> {
        let na = self.num_agents();
        let h = self.horizon;
        let mut bad = Vec::new();
        if self.goals.len() != na
            || self.offsets.len() != h + 1
            || self.pair_weights.len() != h + 1
            || self.control_weights.len() != h
            || self.a.len() != h
            || self.b.len() != h
        {
            return Err(Error::DimensionMismatch(
                "goal/offset data does not match the number of agents and horizon".into(),
            ));
        }
        for (i, d) in self.dims.iter().enumerate() {
            if self.goals[i].len() != d.state_dim {
                bad.push(format!("goal of agent {i} has wrong length"));
            }
        }
        for t in 0..=h {
            if self.offsets[t].len() != na || self.pair_weights[t].len() != na {
                bad.push(format!("pair data at t={t} is not {na}x{na}"));
                continue;
            }
            for i in 0..na {
                if self.offsets[t][i].len() != na || self.pair_weights[t][i].len() != na {
                    bad.push(format!("pair data at t={t} is not {na}x{na}"));
                    continue;
                }
                for j in (0..na).filter(|&j| j != i) {
                    let w = &self.pair_weights[t][i][j];
                    let ni = self.dims[i].state_dim;
                    if w.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    if self.dims[j].state_dim != ni {
                        bad.push(format!(
                            "agents {i} and {j} are coupled but have state dimensions {ni} and {}",
                            self.dims[j].state_dim
                        ));
                    } else if w.shape() != (ni, ni) || self.offsets[t][i][j].len() != ni {
                        bad.push(format!("pair ({i},{j}) at t={t} has wrong shape"));
                    }
                }
            }
        }
        for t in 0..h {
            for (i, d) in self.dims.iter().enumerate() {
                if self.control_weights[t][i].shape() != (d.control_dim, d.control_dim)
                    || self.a[t][i].shape() != (d.state_dim, d.state_dim)
                    || self.b[t][i].shape() != (d.state_dim, d.control_dim)
                {
                    bad.push(format!("blocks of agent {i} at t={t} have wrong shape"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(bad.join("; ")))
        }
    }
}

/// Expands a goal/offset specification into quadratic form with
/// block-diagonal dynamics. Constants are dropped.
pub fn from_goal_offset(spec: &GoalOffsetSpec) -> Result<LqGame> {
    spec.check()?;
    let na = spec.num_agents();
    let mut game = LqGame::zeros(spec.dims.clone(), spec.horizon);
    let n = game.state_dim();
    let selector = |i: usize| {
        let mut e = DMatrix::zeros(spec.dims[i].state_dim, n);
        let off = game.state_offset(i);
        for k in 0..spec.dims[i].state_dim {
            e[(k, off + k)] = 1.0;
        }
        e
    };
    let sel: Vec<DMatrix<f64>> = (0..na).map(selector).collect();

    for t in 0..=spec.horizon {
        for i in 0..na {
            let ei = &sel[i];
            let mut q = ei.transpose() * ei;
            let mut qv = -(ei.transpose() * &spec.goals[i]);
            for j in (0..na).filter(|&j| spec.coupled(t, i, j)) {
                let d = ei - &sel[j];
                let w = &spec.pair_weights[t][i][j];
                q += d.transpose() * w * &d;
                qv -= d.transpose() * (w * &spec.offsets[t][i][j]);
            }
            game.q_mat[i][t] = (&q + q.transpose()) * 0.5;
            game.q_vec[i][t] = qv;
        }
    }
    for t in 0..spec.horizon {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..na {
            let (off, ni) = (game.state_offset(i), spec.dims[i].state_dim);
            a.view_mut((off, off), (ni, ni)).copy_from(&spec.a[t][i]);
            let mut b = DMatrix::zeros(n, spec.dims[i].control_dim);
            b.rows_mut(off, ni).copy_from(&spec.b[t][i]);
            game.b[t][i] = b;
            game.r_mat[i][i][t] = spec.control_weights[t][i].clone();
        }
        game.a[t] = a;
    }
    Ok(game)
}

/// Parameters of the cyclic example: agent `i` observes itself and agent
/// `i + 1` (mod N). Matrices are scalar multiples of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicParams {
    pub num_agents: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub horizon: usize,
    /// Goal of each agent, broadcast over its state components.
    pub goals: Vec<f64>,
    /// Offset `p^{i,i+1}`; the reverse pair uses its negative.
    pub offset: f64,
    pub pair_weight: f64,
    pub control_weight: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for CyclicParams {
    fn default() -> Self {
        Self {
            num_agents: 3,
            state_dim: 1,
            control_dim: 1,
            horizon: 3,
            goals: vec![1.0, 0.0, -1.0],
            offset: 0.5,
            pair_weight: 0.5,
            control_weight: 1.0,
            a: 1.0,
            b: 1.0,
        }
    }
}

impl CyclicParams {
    pub fn to_spec(&self) -> Result<GoalOffsetSpec> {
        let na = self.num_agents;
        if self.goals.len() != na {
            return Err(Error::DimensionMismatch(format!(
                "{} goals given for {na} agents",
                self.goals.len()
            )));
        }
        let (n, m) = (self.state_dim, self.control_dim);
        let ones = DVector::from_element(n, 1.0);
        let eye = DMatrix::<f64>::identity(n, n);
        let offsets: Vec<Vec<DVector<f64>>> = (0..na)
            .map(|i| {
                (0..na)
                    .map(|j| {
                        if na > 1 && j == (i + 1) % na {
                            &ones * self.offset
                        } else if na > 1 && i == (j + 1) % na {
                            &ones * -self.offset
                        } else {
                            DVector::zeros(n)
                        }
                    })
                    .collect()
            })
            .collect();
        let weights: Vec<Vec<DMatrix<f64>>> = (0..na)
            .map(|i| {
                (0..na)
                    .map(|j| if i == j { DMatrix::zeros(n, n) } else { &eye * self.pair_weight })
                    .collect()
            })
            .collect();
        Ok(GoalOffsetSpec {
            dims: vec![AgentDims::new(n, m); na],
            horizon: self.horizon,
            goals: self.goals.iter().map(|g| &ones * *g).collect(),
            offsets: vec![offsets; self.horizon + 1],
            pair_weights: vec![weights; self.horizon + 1],
            control_weights: vec![vec![DMatrix::identity(m, m) * self.control_weight; na]; self.horizon],
            a: vec![vec![&eye * self.a; na]; self.horizon],
            b: vec![vec![DMatrix::identity(n, m) * self.b; na]; self.horizon],
        })
    }
}

/// The cyclic example game and its information structure.
pub fn make_cyclic_example(params: &CyclicParams) -> Result<(LqGame, InformationStructure)> {
    let game = from_goal_offset(&params.to_spec()?)?;
    Ok((game, InformationStructure::cyclic(params.num_agents, params.horizon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_agent_spec(pair: f64, offset: f64) -> GoalOffsetSpec {
        let d = AgentDims::new(1, 1);
        let one = DMatrix::from_element(1, 1, 1.0);
        let h = 1;
        let mut offsets = vec![vec![vec![DVector::zeros(1); 2]; 2]; h + 1];
        let mut weights = vec![vec![vec![DMatrix::zeros(1, 1); 2]; 2]; h + 1];
        for t in 0..=h {
            offsets[t][0][1] = DVector::from_element(1, offset);
            weights[t][0][1] = &one * pair;
        }
        GoalOffsetSpec {
            dims: vec![d, d],
            horizon: h,
            goals: vec![DVector::from_element(1, 1.0), DVector::zeros(1)],
            offsets,
            pair_weights: weights,
            control_weights: vec![vec![one.clone(); 2]; h],
            a: vec![vec![one.clone(); 2]; h],
            b: vec![vec![one.clone(); 2]; h],
        }
    }

    #[test]
    fn goal_only_expansion() {
        let g = from_goal_offset(&two_agent_spec(0.0, 0.0)).unwrap();
        assert_eq!(g.q_mat[0][0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(g.q_vec[0][0], DVector::from_vec(vec![-1.0, 0.0]));
    }

    #[test]
    fn pair_expansion() {
        let g = from_goal_offset(&two_agent_spec(1.0, 0.5)).unwrap();
        assert_eq!(g.q_mat[0][0], DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]));
        // -g - p (x1 - x2) coefficients
        assert_eq!(g.q_vec[0][0], DVector::from_vec(vec![-1.5, 0.5]));
    }

    #[test]
    fn single_agent_unit_weight() {
        let p = CyclicParams {
            num_agents: 1,
            goals: vec![0.0],
            ..CyclicParams::default()
        };
        let (g, _) = make_cyclic_example(&p).unwrap();
        assert_eq!(g.q_mat[0][0], DMatrix::identity(1, 1));
        assert_eq!(g.q_vec[0][0], DVector::zeros(1));
    }

    #[test]
    fn unequal_coupled_dims_rejected() {
        let mut s = two_agent_spec(1.0, 0.5);
        s.dims[1] = AgentDims::new(2, 1);
        s.goals[1] = DVector::zeros(2);
        s.a[0][1] = DMatrix::identity(2, 2);
        s.b[0][1] = DMatrix::zeros(2, 1);
        assert!(matches!(from_goal_offset(&s), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn default_cyclic_structure() {
        let (g, info) = make_cyclic_example(&CyclicParams::default()).unwrap();
        assert_eq!(g.num_agents(), 3);
        for t in 0..3 {
            assert_eq!(info.off_diagonal_count(t), 3);
        }
        assert_eq!(info.observed_state_index(0, 0), vec![0, 1]);
        assert_eq!(info.observed_state_index(2, 0), vec![0, 2]);
    }
}
