//! Linear-quadratic dynamic games: data, validation, rollout and cost.
//!
//! Agents are indexed `0..N` and decision times `0..T`. States are indexed
//! `0..=T`, with `states[0]` the given initial state and `states[T]` the
//! terminal state. The joint state stacks the agents' blocks in agent order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::serde_mat;

/// Tolerance used by the PSD / PD / symmetry checks in [`validate_game`].
pub const VALIDATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDims {
    pub state_dim: usize,
    pub control_dim: usize,
}

impl AgentDims {
    pub fn new(state_dim: usize, control_dim: usize) -> Self {
        Self {
            state_dim,
            control_dim,
        }
    }
}

/// An N-agent, finite-horizon LQ game.
///
/// Stage cost of agent `i` at time `t`:
/// `x'Q x + 2 q'x + sum_j (u_j' R_ij u_j + 2 r_ij' u_j)`, terminal cost
/// `x'Q x + 2 q'x` at index `T`. Dynamics `x+ = A x + sum_j B_j u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqGame {
    pub dims: Vec<AgentDims>,
    pub horizon: usize,
    /// `a[t]`, n x n.
    pub a: Vec<DMatrix<f64>>,
    /// `b[t][j]`, n x m_j.
    pub b: Vec<Vec<DMatrix<f64>>>,
    /// `q_mat[i][t]` for `t in 0..=T`, n x n.
    pub q_mat: Vec<Vec<DMatrix<f64>>>,
    /// `q_vec[i][t]` for `t in 0..=T`.
    pub q_vec: Vec<Vec<DVector<f64>>>,
    /// `r_mat[i][j][t]`, m_j x m_j.
    pub r_mat: Vec<Vec<Vec<DMatrix<f64>>>>,
    /// `r_vec[i][j][t]`.
    pub r_vec: Vec<Vec<Vec<DVector<f64>>>>,
}

impl LqGame {
    /// A game with the given shape and every matrix zero, except `R_ii = I`
    /// and `A = I`.
    pub fn zeros(dims: Vec<AgentDims>, horizon: usize) -> Self {
        let n: usize = dims.iter().map(|d| d.state_dim).sum();
        let na = dims.len();
        let a = vec![DMatrix::identity(n, n); horizon];
        let b = (0..horizon)
            .map(|_| dims.iter().map(|d| DMatrix::zeros(n, d.control_dim)).collect())
            .collect();
        let q_mat = vec![vec![DMatrix::zeros(n, n); horizon + 1]; na];
        let q_vec = vec![vec![DVector::zeros(n); horizon + 1]; na];
        let r_mat = (0..na)
            .map(|i| {
                dims.iter()
                    .enumerate()
                    .map(|(j, d)| {
                        let m = d.control_dim;
                        let block = if i == j {
                            DMatrix::identity(m, m)
                        } else {
                            DMatrix::zeros(m, m)
                        };
                        vec![block; horizon]
                    })
                    .collect()
            })
            .collect();
        let r_vec = (0..na)
            .map(|_| {
                dims.iter()
                    .map(|d| vec![DVector::zeros(d.control_dim); horizon])
                    .collect()
            })
            .collect();
        Self {
            dims,
            horizon,
            a,
            b,
            q_mat,
            q_vec,
            r_mat,
            r_vec,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.dims.len()
    }

    pub fn state_dim(&self) -> usize {
        self.dims.iter().map(|d| d.state_dim).sum()
    }

    pub fn control_dim(&self, agent: usize) -> usize {
        self.dims[agent].control_dim
    }

    pub fn total_control_dim(&self) -> usize {
        self.dims.iter().map(|d| d.control_dim).sum()
    }

    /// Row offset of `agent`'s block in the joint state.
    pub fn state_offset(&self, agent: usize) -> usize {
        self.dims[..agent].iter().map(|d| d.state_dim).sum()
    }

    /// Offset of `agent`'s control in the stacked control vector.
    pub fn control_offset(&self, agent: usize) -> usize {
        self.dims[..agent].iter().map(|d| d.control_dim).sum()
    }

    /// Largest absolute entry over all game data.
    pub fn data_norm(&self) -> f64 {
        let mut m = 0.0f64;
        let mut upd = |x: f64| m = m.max(x);
        self.a.iter().for_each(|a| upd(linalg::amax(a)));
        self.b.iter().flatten().for_each(|b| upd(linalg::amax(b)));
        self.q_mat.iter().flatten().for_each(|q| upd(linalg::amax(q)));
        self.q_vec.iter().flatten().for_each(|q| upd(linalg::vamax(q)));
        self.r_mat.iter().flatten().flatten().for_each(|r| upd(linalg::amax(r)));
        self.r_vec.iter().flatten().flatten().for_each(|r| upd(linalg::vamax(r)));
        m
    }

    /// Stage cost of `agent` at decision time `t` (or the terminal cost when
    /// `t == T`, in which case `controls` is ignored).
    pub fn stage_cost(
        &self,
        agent: usize,
        t: usize,
        x: &DVector<f64>,
        controls: &[DVector<f64>],
    ) -> f64 {
        let q = &self.q_mat[agent][t];
        let mut c = x.dot(&(q * x)) + 2.0 * self.q_vec[agent][t].dot(x);
        if t < self.horizon {
            for (j, u) in controls.iter().enumerate() {
                let r = &self.r_mat[agent][j][t];
                c += u.dot(&(r * u)) + 2.0 * self.r_vec[agent][j][t].dot(u);
            }
        }
        c
    }

    /// `A_t x + sum_j B_t^j u_j`.
    pub fn step(&self, t: usize, x: &DVector<f64>, controls: &[DVector<f64>]) -> DVector<f64> {
        let mut next = &self.a[t] * x;
        for (bj, u) in self.b[t].iter().zip(controls) {
            next += bj * u;
        }
        next
    }
}

/// Violations found by [`validate_game`]; empty iff the game is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGame(self.violations))
        }
    }
}

pub fn validate_game(game: &LqGame) -> ValidationReport {
    let mut v = Vec::new();
    let na = game.num_agents();
    let horizon = game.horizon;
    let n = game.state_dim();

    if na == 0 {
        v.push("game has no agents".into());
    }
    if horizon == 0 {
        v.push("horizon must be at least 1".into());
    }
    for (i, d) in game.dims.iter().enumerate() {
        if d.state_dim == 0 {
            v.push(format!("agent {i}: state_dim must be >= 1"));
        }
        if d.control_dim == 0 {
            v.push(format!("agent {i}: control_dim must be >= 1"));
        }
    }

    let shape = |m: &DMatrix<f64>, r: usize, c: usize| m.nrows() == r && m.ncols() == c;

    // Shapes first; the definiteness checks below assume them.
    let mut se: Vec<String> = Vec::new();
    if game.a.len() != horizon {
        se.push(format!("expected {horizon} A matrices, got {}", game.a.len()));
    }
    for (t, a) in game.a.iter().enumerate() {
        if !shape(a, n, n) {
            se.push(format!("A[{t}] is {}x{}, expected {n}x{n}", a.nrows(), a.ncols()));
        }
    }
    if game.b.len() != horizon {
        se.push(format!("expected {horizon} B stages, got {}", game.b.len()));
    }
    for (t, bt) in game.b.iter().enumerate() {
        if bt.len() != na {
            se.push(format!("B[{t}] has {} agent blocks, expected {na}", bt.len()));
            continue;
        }
        for (j, b) in bt.iter().enumerate() {
            let m = game.dims[j].control_dim;
            if !shape(b, n, m) {
                se.push(format!("B[{t}][{j}] is {}x{}, expected {n}x{m}", b.nrows(), b.ncols()));
            }
        }
    }
    if game.q_mat.len() != na || game.q_vec.len() != na {
        se.push(format!("state costs must be given for {na} agents"));
    }
    if game.r_mat.len() != na || game.r_vec.len() != na {
        se.push(format!("control costs must be given for {na} agents"));
    }
    if !se.is_empty() {
        v.extend(se);
        return ValidationReport { violations: v };
    }
    for i in 0..na {
        if game.q_mat[i].len() != horizon + 1 || game.q_vec[i].len() != horizon + 1 {
            se.push(format!("agent {i}: expected {} state cost stages", horizon + 1));
            continue;
        }
        for t in 0..=horizon {
            let q = &game.q_mat[i][t];
            if !shape(q, n, n) {
                se.push(format!("Q[{i}][{t}] is {}x{}, expected {n}x{n}", q.nrows(), q.ncols()));
            }
            if game.q_vec[i][t].len() != n {
                se.push(format!("q[{i}][{t}] has length {}, expected {n}", game.q_vec[i][t].len()));
            }
        }
        if game.r_mat[i].len() != na || game.r_vec[i].len() != na {
            se.push(format!("agent {i}: control costs must cover {na} agents"));
            continue;
        }
        for j in 0..na {
            let m = game.dims[j].control_dim;
            if game.r_mat[i][j].len() != horizon || game.r_vec[i][j].len() != horizon {
                se.push(format!("R[{i}][{j}] must have {horizon} stages"));
                continue;
            }
            for t in 0..horizon {
                let r = &game.r_mat[i][j][t];
                if !shape(r, m, m) {
                    se.push(format!("R[{i}][{j}][{t}] is {}x{}, expected {m}x{m}", r.nrows(), r.ncols()));
                }
                if game.r_vec[i][j][t].len() != m {
                    se.push(format!("r[{i}][{j}][{t}] has length {}, expected {m}", game.r_vec[i][j][t].len()));
                }
            }
        }
    }
    if !se.is_empty() {
        v.extend(se);
        return ValidationReport { violations: v };
    }

    for i in 0..na {
        for t in 0..=horizon {
            let q = &game.q_mat[i][t];
            if linalg::asymmetry(q) > VALIDATION_TOL {
                v.push(format!("Q[{i}][{t}] not symmetric"));
            }
            if linalg::min_eigenvalue(q) < -VALIDATION_TOL {
                v.push(format!("Q[{i}][{t}]: Q not PSD"));
            }
        }
        for j in 0..na {
            for t in 0..horizon {
                let r = &game.r_mat[i][j][t];
                if linalg::asymmetry(r) > VALIDATION_TOL {
                    v.push(format!("R[{i}][{j}][{t}] not symmetric"));
                }
                let lmin = linalg::min_eigenvalue(r);
                if i == j && lmin <= VALIDATION_TOL {
                    v.push(format!("R[{i}][{i}][{t}]: R^{{ii}} not positive definite"));
                } else if i != j && lmin < -VALIDATION_TOL {
                    v.push(format!("R[{i}][{j}][{t}]: R^{{ij}} not PSD"));
                }
            }
        }
    }
    for (k, x) in game
        .a
        .iter()
        .chain(game.b.iter().flatten())
        .chain(game.q_mat.iter().flatten())
        .chain(game.r_mat.iter().flatten().flatten())
        .enumerate()
    {
        if x.iter().any(|e| !e.is_finite()) {
            v.push(format!("matrix #{k} has non-finite entries"));
            break;
        }
    }
    ValidationReport { violations: v }
}

/// A realized state/control trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `states[t]` for `t in 0..=T`.
    #[serde(with = "serde_mat::vectors")]
    pub states: Vec<DVector<f64>>,
    /// `controls[t][i]` for `t in 0..T`.
    #[serde(with = "serde_mat::vectors2")]
    pub controls: Vec<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn check_dims(&self, game: &LqGame) -> Result<()> {
        let n = game.state_dim();
        if self.states.len() != game.horizon + 1 {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} states, expected {}",
                self.states.len(),
                game.horizon + 1
            )));
        }
        if let Some((t, _)) = self.states.iter().enumerate().find(|(_, x)| x.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "state {t} has wrong length, expected {n}"
            )));
        }
        check_controls(game, &self.controls)
    }

    /// Concatenation of all states, used for trajectory comparisons.
    pub fn flat_states(&self) -> DVector<f64> {
        let data: Vec<f64> = self.states.iter().flat_map(|x| x.iter().copied()).collect();
        DVector::from_vec(data)
    }

    pub fn flat_controls(&self) -> DVector<f64> {
        let data: Vec<f64> = self
            .controls
            .iter()
            .flatten()
            .flat_map(|u| u.iter().copied())
            .collect();
        DVector::from_vec(data)
    }
}

fn check_controls(game: &LqGame, controls: &[Vec<DVector<f64>>]) -> Result<()> {
    if controls.len() != game.horizon {
        return Err(Error::DimensionMismatch(format!(
            "{} control stages given, expected {}",
            controls.len(),
            game.horizon
        )));
    }
    for (t, ut) in controls.iter().enumerate() {
        if ut.len() != game.num_agents() {
            return Err(Error::DimensionMismatch(format!(
                "stage {t} has {} controls, expected {}",
                ut.len(),
                game.num_agents()
            )));
        }
        for (i, u) in ut.iter().enumerate() {
            if u.len() != game.control_dim(i) {
                return Err(Error::DimensionMismatch(format!(
                    "control of agent {i} at t={t} has length {}, expected {}",
                    u.len(),
                    game.control_dim(i)
                )));
            }
        }
    }
    Ok(())
}

/// Forward-simulates the dynamics from `x1` under `controls[t][i]`.
pub fn rollout(game: &LqGame, x1: &DVector<f64>, controls: &[Vec<DVector<f64>>]) -> Result<Trajectory> {
    if x1.len() != game.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            x1.len(),
            game.state_dim()
        )));
    }
    check_controls(game, controls)?;
    let mut states = Vec::with_capacity(game.horizon + 1);
    states.push(x1.clone());
    for (t, ut) in controls.iter().enumerate() {
        let next = game.step(t, &states[t], ut);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        controls: controls.to_vec(),
    })
}

/// Total cost `J^i` of `agent` along `traj`.
pub fn total_cost(game: &LqGame, agent: usize, traj: &Trajectory) -> Result<f64> {
    traj.check_dims(game)?;
    if agent >= game.num_agents() {
        return Err(Error::DimensionMismatch(format!("no agent {agent}")));
    }
    let running: f64 = (0..game.horizon)
        .map(|t| game.stage_cost(agent, t, &traj.states[t], &traj.controls[t]))
        .sum();
    Ok(running + game.stage_cost(agent, game.horizon, &traj.states[game.horizon], &[]))
}
