//! Reference solvers for the canonical information structures, independent
//! of the MPN pipeline: stacked open-loop KKT, coupled feedback Riccati
//! recursion, and time-varying affine LQR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{rollout, LqGame, Trajectory};
use crate::linalg;
use crate::policy::{StagePolicy, StagePolicySet};
use crate::serde_mat;
use crate::solver::agent_costs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopSolution {
    pub trajectory: Trajectory,
    pub costs: Vec<f64>,
    /// `costates[i][s]` for state times `s in 1..=T` (index `s - 1`).
    #[serde(with = "serde_mat::vectors2")]
    pub costates: Vec<Vec<DVector<f64>>>,
}

/// Open-loop Nash equilibrium from the first-order conditions of all agents'
/// trajectory problems, solved as one linear system over states, controls
/// and per-agent costates.
///
/// With `L^i = J^i + sum_t p^i_{t+1}'(x_{t+1} - A x_t - sum_j B^j u^j_t)`:
/// `2R^ii u^i_t + 2r^ii_t - B^i' p^i_{t+1} = 0`,
/// `2Q^i_s x_s + 2q^i_s + p^i_s - A_s' p^i_{s+1} = 0` (no `A'p` term at `s = T`).
pub fn baseline_open_loop_nash(game: &LqGame, x1: &DVector<f64>) -> Result<OpenLoopSolution> {
    let n = game.state_dim();
    let na = game.num_agents();
    let horizon = game.horizon;
    let mtot = game.total_control_dim();
    if x1.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {n}",
            x1.len()
        )));
    }

    // Unknown layout: x_1..x_T, then u_0..u_{T-1} (stacked), then p^i_1..p^i_T per agent.
    let xo = |s: usize| (s - 1) * n;
    let uo = |t: usize, j: usize| horizon * n + t * mtot + game.control_offset(j);
    let po = |i: usize, s: usize| horizon * (n + mtot) + (i * horizon + s - 1) * n;
    let size = horizon * (n + mtot) + na * horizon * n;
    let mut k = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    let eye = DMatrix::<f64>::identity(n, n);

    let mut row = 0;
    for t in 0..horizon {
        k.view_mut((row, xo(t + 1)), (n, n)).copy_from(&eye);
        if t == 0 {
            rhs.rows_mut(row, n).copy_from(&(&game.a[0] * x1));
        } else {
            k.view_mut((row, xo(t)), (n, n)).copy_from(&(-&game.a[t]));
        }
        for j in 0..na {
            let b = &game.b[t][j];
            k.view_mut((row, uo(t, j)), (n, b.ncols())).copy_from(&(-b));
        }
        row += n;
    }
    for t in 0..horizon {
        for i in 0..na {
            let mi = game.control_dim(i);
            k.view_mut((row, uo(t, i)), (mi, mi))
                .copy_from(&(&game.r_mat[i][i][t] * 2.0));
            k.view_mut((row, po(i, t + 1)), (mi, n))
                .copy_from(&(-game.b[t][i].transpose()));
            rhs.rows_mut(row, mi)
                .copy_from(&(&game.r_vec[i][i][t] * -2.0));
            row += mi;
        }
    }
    for i in 0..na {
        for s in 1..=horizon {
            k.view_mut((row, xo(s)), (n, n))
                .copy_from(&(&game.q_mat[i][s] * 2.0));
            k.view_mut((row, po(i, s)), (n, n)).copy_from(&eye);
            if s < horizon {
                k.view_mut((row, po(i, s + 1)), (n, n))
                    .copy_from(&(-game.a[s].transpose()));
            }
            rhs.rows_mut(row, n).copy_from(&(&game.q_vec[i][s] * -2.0));
            row += n;
        }
    }
    debug_assert_eq!(row, size);

    let sol = linalg::lu_solve(&k, &DMatrix::from_column_slice(size, 1, rhs.as_slice())).ok_or(Error::SingularOpenLoop)?;
    let w = sol.column(0);
    let controls: Vec<Vec<DVector<f64>>> = (0..horizon)
        .map(|t| {
            (0..na)
                .map(|j| w.rows(uo(t, j), game.control_dim(j)).into_owned())
                .collect()
        })
        .collect();
    let trajectory = rollout(game, x1, &controls)?;
    let costates = (0..na)
        .map(|i| (1..=horizon).map(|s| w.rows(po(i, s), n).into_owned()).collect())
        .collect();
    let costs = agent_costs(game, &trajectory)?;
    Ok(OpenLoopSolution {
        trajectory,
        costs,
        costates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSolution {
    pub policies: StagePolicySet,
    /// `value_mat[i][t]` for `t in 0..=T`: `V^i_t(x) = x'P x + 2 p'x + const`.
    #[serde(with = "serde_mat::matrices2")]
    pub value_mat: Vec<Vec<DMatrix<f64>>>,
    #[serde(with = "serde_mat::vectors2")]
    pub value_vec: Vec<Vec<DVector<f64>>>,
}

/// Feedback Nash equilibrium by the coupled value recursion.
///
/// At each stage every agent's first-order condition
/// `(R^ii + B^i'P^i B^i) u^i + B^i'P^i sum_{j!=i} B^j u^j + B^i'(P^i A x + p^i) + r^ii = 0`
/// is solved jointly for `u = F x + f`, and with `Acl = A + B F`:
/// `P_t = Q + sum_j F_j'R^ij F_j + Acl'P Acl`,
/// `p_t = q + sum_j F_j'(R^ij f_j + r^ij) + Acl'(P B f + p)`.
pub fn baseline_feedback_nash(game: &LqGame) -> Result<FeedbackSolution> {
    let n = game.state_dim();
    let na = game.num_agents();
    let horizon = game.horizon;
    let mtot = game.total_control_dim();
    let mut value_mat: Vec<Vec<DMatrix<f64>>> = (0..na).map(|i| game.q_mat[i].clone()).collect();
    let mut value_vec: Vec<Vec<DVector<f64>>> = (0..na).map(|i| game.q_vec[i].clone()).collect();
    let mut policies = StagePolicySet::empty(na, horizon);

    for t in (0..horizon).rev() {
        let a = &game.a[t];
        let mut m = DMatrix::<f64>::zeros(mtot, mtot);
        let mut rhs = DMatrix::<f64>::zeros(mtot, n + 1);
        for i in 0..na {
            let (p, pv) = (&value_mat[i][t + 1], &value_vec[i][t + 1]);
            let bi_p = game.b[t][i].transpose() * p;
            let (oi, mi) = (game.control_offset(i), game.control_dim(i));
            for j in 0..na {
                let mut blk = &bi_p * &game.b[t][j];
                if j == i {
                    blk += &game.r_mat[i][i][t];
                }
                m.view_mut((oi, game.control_offset(j)), (mi, game.control_dim(j)))
                    .copy_from(&blk);
            }
            rhs.view_mut((oi, 0), (mi, n)).copy_from(&(-(&bi_p * a)));
            let c = -(game.b[t][i].transpose() * pv + &game.r_vec[i][i][t]);
            rhs.view_mut((oi, n), (mi, 1)).copy_from(&c);
        }
        let sol = linalg::lu_solve(&m, &rhs).ok_or(Error::SingularFeedbackStage { time: t })?;
        let f_mat = sol.columns(0, n).into_owned();
        let f_vec: DVector<f64> = sol.column(n).into_owned();

        let mut b = DMatrix::<f64>::zeros(n, mtot);
        for j in 0..na {
            b.columns_mut(game.control_offset(j), game.control_dim(j))
                .copy_from(&game.b[t][j]);
        }
        let acl = a + &b * &f_mat;
        let bf = &b * &f_vec;
        for i in 0..na {
            let (p, pv) = (value_mat[i][t + 1].clone(), value_vec[i][t + 1].clone());
            let mut pn = game.q_mat[i][t].clone() + acl.transpose() * &p * &acl;
            let mut pvn = &game.q_vec[i][t] + acl.transpose() * (&p * &bf + &pv);
            for j in 0..na {
                let (oj, mj) = (game.control_offset(j), game.control_dim(j));
                let fj = f_mat.rows(oj, mj);
                let fvj = f_vec.rows(oj, mj);
                let r = &game.r_mat[i][j][t];
                pn += fj.transpose() * r * fj;
                pvn += fj.transpose() * (r * fvj + &game.r_vec[i][j][t]);
            }
            value_mat[i][t] = (&pn + pn.transpose()) * 0.5;
            value_vec[i][t] = pvn;
        }
        for i in 0..na {
            let (oi, mi) = (game.control_offset(i), game.control_dim(i));
            policies.insert(
                i,
                t,
                StagePolicy::new(
                    game,
                    f_mat.rows(oi, mi).into_owned(),
                    f_vec.rows(oi, mi).into_owned(),
                    (0..na).collect(),
                ),
            );
        }
    }
    Ok(FeedbackSolution {
        policies,
        value_mat,
        value_vec,
    })
}

/// Time-varying affine LQR problem:
/// minimize `sum_t (x'Q x + 2q'x + u'R u + 2r'u) + x_T'Q_T x_T + 2q_T'x_T`
/// subject to `x_{t+1} = A x + B u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLqr {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub c: Vec<DVector<f64>>,
    /// `0..=T`.
    pub q_mat: Vec<DMatrix<f64>>,
    pub q_vec: Vec<DVector<f64>>,
    pub r_mat: Vec<DMatrix<f64>>,
    pub r_vec: Vec<DVector<f64>>,
}

impl AffineLqr {
    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    /// Optimal affine gains `u_t = K_t x + k_t` by the backward Riccati
    /// recursion.
    pub fn solve(&self) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
        let horizon = self.horizon();
        let mut p = self.q_mat[horizon].clone();
        let mut pv = self.q_vec[horizon].clone();
        let mut out = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); horizon];
        for t in (0..horizon).rev() {
            let (a, b, c) = (&self.a[t], &self.b[t], &self.c[t]);
            let r = &self.r_mat[t];
            let h = r + b.transpose() * &p * b;
            let mut rhs = DMatrix::zeros(b.ncols(), a.ncols() + 1);
            rhs.columns_mut(0, a.ncols())
                .copy_from(&(-(b.transpose() * &p * a)));
            rhs.column_mut(a.ncols())
                .copy_from(&(-(b.transpose() * (&p * c + &pv) + &self.r_vec[t])));
            let sol = linalg::lu_solve(&h, &rhs).ok_or(Error::SingularFeedbackStage { time: t })?;
            let k = sol.columns(0, a.ncols()).into_owned();
            let kv: DVector<f64> = sol.column(a.ncols()).into_owned();
            let acl = a + b * &k;
            let drift = b * &kv + c;
            let pn = &self.q_mat[t] + k.transpose() * r * &k + acl.transpose() * &p * &acl;
            let pvn = &self.q_vec[t] + k.transpose() * (r * &kv + &self.r_vec[t]) + acl.transpose() * (&p * drift + &pv);
            p = (&pn + pn.transpose()) * 0.5;
            pv = pvn;
            out[t] = (k, kv);
        }
        Ok(out)
    }
}

/// Agent `agent`'s LQR problem when every other agent plays its policy in
/// `policies` (full-state affine gains).
pub fn best_response_problem(game: &LqGame, agent: usize, policies: &StagePolicySet) -> AffineLqr {
    let horizon = game.horizon;
    let mut lqr = AffineLqr {
        a: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        q_mat: Vec::new(),
        q_vec: Vec::new(),
        r_mat: Vec::new(),
        r_vec: Vec::new(),
    };
    for t in 0..horizon {
        let mut a = game.a[t].clone();
        let mut c = DVector::zeros(game.state_dim());
        let mut q = game.q_mat[agent][t].clone();
        let mut qv = game.q_vec[agent][t].clone();
        for j in (0..game.num_agents()).filter(|&j| j != agent) {
            let p = policies.get(j, t).expect("opponent policy");
            let (f, fv) = (&p.gain, &p.feedforward);
            let r = &game.r_mat[agent][j][t];
            a += &game.b[t][j] * f;
            c += &game.b[t][j] * fv;
            q += f.transpose() * r * f;
            qv += f.transpose() * (r * fv + &game.r_vec[agent][j][t]);
        }
        lqr.a.push(a);
        lqr.b.push(game.b[t][agent].clone());
        lqr.c.push(c);
        lqr.q_mat.push(q);
        lqr.q_vec.push(qv);
        lqr.r_mat.push(game.r_mat[agent][agent][t].clone());
        lqr.r_vec.push(game.r_vec[agent][agent][t].clone());
    }
    lqr.q_mat.push(game.q_mat[agent][horizon].clone());
    lqr.q_vec.push(game.q_vec[agent][horizon].clone());
    lqr
}

/// Best-response trajectory of `agent` from `x1` against the other agents'
/// policies, returned with the agent's resulting cost.
pub fn best_response(
    game: &LqGame,
    agent: usize,
    policies: &StagePolicySet,
    x1: &DVector<f64>,
) -> Result<(Trajectory, f64)> {
    let gains = best_response_problem(game, agent, policies).solve()?;
    let mut x = x1.clone();
    let mut controls = Vec::with_capacity(game.horizon);
    for (t, (k, kv)) in gains.iter().enumerate() {
        let u: Vec<DVector<f64>> = (0..game.num_agents())
            .map(|j| {
                if j == agent {
                    k * &x + kv
                } else {
                    policies.get(j, t).expect("opponent policy").apply(&x)
                }
            })
            .collect();
        x = game.step(t, &x, &u);
        controls.push(u);
    }
    let traj = rollout(game, x1, &controls)?;
    let cost = crate::game::total_cost(game, agent, &traj)?;
    Ok((traj, cost))
}

/// The single-agent game formed by `agent`'s own state block, control and
/// cost blocks. Meaningful when the game is decoupled.
pub fn agent_subgame(game: &LqGame, agent: usize) -> LqGame {
    let d = game.dims[agent];
    let so = game.state_offset(agent);
    let mut sub = LqGame::zeros(vec![d], game.horizon);
    for t in 0..game.horizon {
        sub.a[t] = game.a[t].view((so, so), (d.state_dim, d.state_dim)).into_owned();
        sub.b[t][0] = game.b[t][agent].rows(so, d.state_dim).into_owned();
        sub.r_mat[0][0][t] = game.r_mat[agent][agent][t].clone();
        sub.r_vec[0][0][t] = game.r_vec[agent][agent][t].clone();
    }
    for t in 0..=game.horizon {
        sub.q_mat[0][t] = game.q_mat[agent][t]
            .view((so, so), (d.state_dim, d.state_dim))
            .into_owned();
        sub.q_vec[0][t] = game.q_vec[agent][t].rows(so, d.state_dim).into_owned();
    }
    sub
}

/// LQR trajectory of a single-agent game from `x1`.
pub fn lqr_trajectory(game: &LqGame, x1: &DVector<f64>) -> Result<Trajectory> {
    assert_eq!(game.num_agents(), 1, "lqr_trajectory needs a single-agent game");
    let empty = StagePolicySet::empty(1, game.horizon);
    best_response(game, 0, &empty, x1).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::AgentDims;

    fn scalar_lqr(horizon: usize) -> LqGame {
        let mut g = LqGame::zeros(vec![AgentDims::new(1, 1)], horizon);
        for t in 0..=horizon {
            g.q_mat[0][t] = DMatrix::from_element(1, 1, 1.0);
        }
        for t in 0..horizon {
            g.b[t][0] = DMatrix::from_element(1, 1, 1.0);
        }
        g
    }

    #[test]
    fn one_step_lqr_by_hand() {
        // min u^2 + (x + u)^2 with x = 2: u = -1.
        let g = scalar_lqr(1);
        let traj = lqr_trajectory(&g, &DVector::from_element(1, 2.0)).unwrap();
        assert!((traj.controls[0][0][0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_agent_baselines_agree() {
        let g = scalar_lqr(4);
        let x1 = DVector::from_element(1, 1.5);
        let ol = baseline_open_loop_nash(&g, &x1).unwrap();
        let fb = baseline_feedback_nash(&g).unwrap();
        let lqr = lqr_trajectory(&g, &x1).unwrap();
        let fb_traj = crate::solver::rollout_policies(&g, &fb.policies, &x1).unwrap();
        assert!((ol.trajectory.flat_states() - lqr.flat_states()).amax() < 1e-12);
        assert!((fb_traj.flat_states() - lqr.flat_states()).amax() < 1e-12);
    }

    #[test]
    fn singular_open_loop_is_reported() {
        // R = 0 with no state cost leaves the control undetermined.
        let mut g = LqGame::zeros(vec![AgentDims::new(1, 1)], 1);
        g.r_mat[0][0][0] = DMatrix::zeros(1, 1);
        let r = baseline_open_loop_nash(&g, &DVector::from_element(1, 1.0));
        assert!(matches!(r, Err(Error::SingularOpenLoop)));
    }
}
