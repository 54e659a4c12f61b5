//! The game-spec file format.
//!
//! Matrices are row-major nested arrays. Agent and time indices are 0-based.
//! Time-varying data is either `{"constant": value}` or
//! `{"per_time": [value, ...]}`.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mpngame::{from_goal_offset, AgentDims, CyclicParams, GoalOffsetSpec, InformationStructure, LqGame};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub type Matrix = Vec<Vec<f64>>;
pub type Vector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub num_agents: usize,
    pub horizon: usize,
    pub agents: Vec<AgentDims>,
    pub dynamics: DynamicsSpec,
    pub costs: CostSpec,
    pub information: InfoSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series<T> {
    Constant(T),
    PerTime(Vec<T>),
}

impl<T: PartialEq> Series<T> {
    /// Collapses to `Constant` when every entry is equal.
    pub fn from_values(mut values: Vec<T>) -> Self {
        if !values.is_empty() && values.iter().all(|v| *v == values[0]) {
            Series::Constant(values.swap_remove(0))
        } else {
            Series::PerTime(values)
        }
    }

    fn check_len(&self, len: usize, field: &str) -> Result<()> {
        match self {
            Series::PerTime(v) if v.len() != len => {
                bail!("{field}: expected {len} per-time entries, got {}", v.len())
            }
            _ => Ok(()),
        }
    }

    fn at(&self, t: usize) -> &T {
        match self {
            Series::Constant(v) => v,
            Series::PerTime(v) => &v[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsSpec {
    /// Joint `A` and per-agent `B_j`, the same at every step.
    TimeInvariant(JointDynamics),
    /// Joint blocks for every step.
    PerTime(Vec<JointDynamics>),
    /// Each agent's own blocks, assembled block-diagonally.
    Decoupled(DecoupledDynamics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDynamics {
    pub a: Matrix,
    pub b: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoupledDynamics {
    pub a: Vec<Series<Matrix>>,
    pub b: Vec<Series<Matrix>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    /// Quadratic form per agent.
    Expanded(Vec<AgentCost>),
    GoalOffset(GoalOffsetCosts),
}

/// Cost `x'Q x + 2 q'x + sum_j (u_j' R_j u_j + 2 r_j' u_j)` of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCost {
    /// `T + 1` entries when given per time; the last is the terminal cost.
    pub q: Series<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_lin: Option<Series<Vector>>,
    /// One entry per agent `j`; `null` means zero.
    pub r: Vec<Option<Series<Matrix>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_lin: Option<Vec<Option<Series<Vector>>>>,
}

/// Goal tracking plus weighted offsets between agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalOffsetCosts {
    pub goals: Vec<Vector>,
    pub control_weights: Vec<Series<Matrix>>,
    #[serde(default)]
    pub pairs: Vec<PairCost>,
}

/// Term `||x^agent - x^other - offset||^2_weight` in `agent`'s cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCost {
    pub agent: usize,
    pub other: usize,
    pub weight: Series<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Series<Vector>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfoSpec {
    Named(NamedStructure),
    /// `obs[t][i][j]`: agent `i` observes agent `j` at time `t`.
    Explicit(Vec<Vec<Vec<bool>>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedStructure {
    Openloop,
    Feedback,
    Cyclic,
}

impl NamedStructure {
    pub fn build(self, num_agents: usize, horizon: usize) -> InformationStructure {
        match self {
            NamedStructure::Openloop => InformationStructure::open_loop(num_agents, horizon),
            NamedStructure::Feedback => InformationStructure::feedback(num_agents, horizon),
            NamedStructure::Cyclic => InformationStructure::cyclic(num_agents, horizon),
        }
    }
}

impl fmt::Display for NamedStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamedStructure::Openloop => "openloop",
            NamedStructure::Feedback => "feedback",
            NamedStructure::Cyclic => "cyclic",
        })
    }
}

/// Parses JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("field `{path}`: {}", e.into_inner())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_json(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn shape_of(m: &Matrix) -> String {
    match m.first() {
        Some(r) if m.iter().all(|x| x.len() == r.len()) => format!("{}x{}", m.len(), r.len()),
        Some(_) => "ragged".into(),
        None => "empty".into(),
    }
}

fn matrix(m: &Matrix, rows: usize, cols: usize, field: &str) -> Result<DMatrix<f64>> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        bail!("{field}: expected a {rows}x{cols} matrix, got {}", shape_of(m));
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| m[r][c]))
}

fn vector(v: &Vector, len: usize, field: &str) -> Result<DVector<f64>> {
    if v.len() != len {
        bail!("{field}: expected length {len}, got {}", v.len());
    }
    Ok(DVector::from_column_slice(v))
}

fn rows_of(m: &DMatrix<f64>) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn series_matrix(s: &Series<Matrix>, len: usize, rows: usize, cols: usize, field: &str) -> Result<Vec<DMatrix<f64>>> {
    s.check_len(len, field)?;
    (0..len)
        .map(|t| matrix(s.at(t), rows, cols, &format!("{field}[t={t}]")))
        .collect()
}

fn series_vector(s: &Series<Vector>, len: usize, dim: usize, field: &str) -> Result<Vec<DVector<f64>>> {
    s.check_len(len, field)?;
    (0..len)
        .map(|t| vector(s.at(t), dim, &format!("{field}[t={t}]")))
        .collect()
}

impl GameSpec {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    fn check_shape(&self) -> Result<()> {
        if self.agents.len() != self.num_agents {
            bail!(
                "agents: {} entries given for num_agents = {}",
                self.agents.len(),
                self.num_agents
            );
        }
        if self.num_agents == 0 {
            bail!("num_agents: must be at least 1");
        }
        if self.horizon == 0 {
            bail!("horizon: must be at least 1");
        }
        for (i, d) in self.agents.iter().enumerate() {
            if d.state_dim == 0 || d.control_dim == 0 {
                bail!("agents[{i}]: state_dim and control_dim must be at least 1");
            }
        }
        Ok(())
    }

    /// The quadratic game described by the file. Not validated.
    pub fn to_game(&self) -> Result<LqGame> {
        self.check_shape()?;
        let mut game = LqGame::zeros(self.agents.clone(), self.horizon);
        self.fill_dynamics(&mut game)?;
        match &self.costs {
            CostSpec::Expanded(costs) => self.fill_expanded(&mut game, costs)?,
            CostSpec::GoalOffset(costs) => self.fill_goal_offset(&mut game, costs)?,
        }
        Ok(game)
    }

    fn fill_dynamics(&self, game: &mut LqGame) -> Result<()> {
        let (na, h, n) = (self.num_agents, self.horizon, game.state_dim());
        let joint = |game: &mut LqGame, t: usize, d: &JointDynamics, field: &str| -> Result<()> {
            game.a[t] = matrix(&d.a, n, n, &format!("{field}.a"))?;
            if d.b.len() != na {
                bail!("{field}.b: expected {na} agent blocks, got {}", d.b.len());
            }
            for (j, b) in d.b.iter().enumerate() {
                game.b[t][j] = matrix(b, n, self.agents[j].control_dim, &format!("{field}.b[{j}]"))?;
            }
            Ok(())
        };
        match &self.dynamics {
            DynamicsSpec::TimeInvariant(d) => {
                for t in 0..h {
                    joint(game, t, d, "dynamics.time_invariant")?;
                }
            }
            DynamicsSpec::PerTime(ds) => {
                if ds.len() != h {
                    bail!("dynamics.per_time: expected {h} entries, got {}", ds.len());
                }
                for (t, d) in ds.iter().enumerate() {
                    joint(game, t, d, &format!("dynamics.per_time[{t}]"))?;
                }
            }
            DynamicsSpec::Decoupled(d) => {
                if d.a.len() != na || d.b.len() != na {
                    bail!("dynamics.decoupled: expected {na} entries in both a and b");
                }
                for i in 0..na {
                    let AgentDims { state_dim: ni, control_dim: mi } = self.agents[i];
                    let off = game.state_offset(i);
                    let a = series_matrix(&d.a[i], h, ni, ni, &format!("dynamics.decoupled.a[{i}]"))?;
                    let b = series_matrix(&d.b[i], h, ni, mi, &format!("dynamics.decoupled.b[{i}]"))?;
                    for t in 0..h {
                        if i == 0 {
                            game.a[t] = DMatrix::zeros(n, n);
                        }
                        game.a[t].view_mut((off, off), (ni, ni)).copy_from(&a[t]);
                        game.b[t][i] = DMatrix::zeros(n, mi);
                        game.b[t][i].rows_mut(off, ni).copy_from(&b[t]);
                    }
                }
            }
        }
        Ok(())
    }

    fn fill_expanded(&self, game: &mut LqGame, costs: &[AgentCost]) -> Result<()> {
        let (na, h, n) = (self.num_agents, self.horizon, game.state_dim());
        if costs.len() != na {
            bail!("costs.expanded: expected {na} agents, got {}", costs.len());
        }
        for (i, c) in costs.iter().enumerate() {
            let field = format!("costs.expanded[{i}]");
            game.q_mat[i] = series_matrix(&c.q, h + 1, n, n, &format!("{field}.q"))?;
            game.q_vec[i] = match &c.q_lin {
                Some(q) => series_vector(q, h + 1, n, &format!("{field}.q_lin"))?,
                None => vec![DVector::zeros(n); h + 1],
            };
            if c.r.len() != na {
                bail!("{field}.r: expected {na} entries, got {}", c.r.len());
            }
            if let Some(r_lin) = &c.r_lin {
                if r_lin.len() != na {
                    bail!("{field}.r_lin: expected {na} entries, got {}", r_lin.len());
                }
            }
            for j in 0..na {
                let m = self.agents[j].control_dim;
                game.r_mat[i][j] = match &c.r[j] {
                    Some(r) => series_matrix(r, h, m, m, &format!("{field}.r[{j}]"))?,
                    None => vec![DMatrix::zeros(m, m); h],
                };
                game.r_vec[i][j] = match c.r_lin.as_ref().and_then(|r| r[j].as_ref()) {
                    Some(r) => series_vector(r, h, m, &format!("{field}.r_lin[{j}]"))?,
                    None => vec![DVector::zeros(m); h],
                };
            }
        }
        Ok(())
    }

    fn fill_goal_offset(&self, game: &mut LqGame, costs: &GoalOffsetCosts) -> Result<()> {
        let (na, h) = (self.num_agents, self.horizon);
        let dims = &self.agents;
        if costs.goals.len() != na {
            bail!("costs.goal_offset.goals: expected {na} entries, got {}", costs.goals.len());
        }
        if costs.control_weights.len() != na {
            bail!(
                "costs.goal_offset.control_weights: expected {na} entries, got {}",
                costs.control_weights.len()
            );
        }
        let goals = (0..na)
            .map(|i| vector(&costs.goals[i], dims[i].state_dim, &format!("costs.goal_offset.goals[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut control_weights = vec![Vec::with_capacity(na); h];
        for (i, w) in costs.control_weights.iter().enumerate() {
            let m = dims[i].control_dim;
            let w = series_matrix(w, h, m, m, &format!("costs.goal_offset.control_weights[{i}]"))?;
            for (t, w) in w.into_iter().enumerate() {
                control_weights[t].push(w);
            }
        }
        let zero_offsets: Vec<Vec<DVector<f64>>> =
            dims.iter().map(|d| vec![DVector::zeros(d.state_dim); na]).collect();
        let zero_weights: Vec<Vec<DMatrix<f64>>> = dims
            .iter()
            .map(|d| vec![DMatrix::zeros(d.state_dim, d.state_dim); na])
            .collect();
        let mut offsets = vec![zero_offsets; h + 1];
        let mut weights = vec![zero_weights; h + 1];
        let mut seen = std::collections::BTreeSet::new();
        for (k, p) in costs.pairs.iter().enumerate() {
            let field = format!("costs.goal_offset.pairs[{k}]");
            if p.agent >= na || p.other >= na || p.agent == p.other {
                bail!("{field}: agent and other must be distinct indices below {na}");
            }
            if !seen.insert((p.agent, p.other)) {
                bail!("{field}: duplicate pair ({}, {})", p.agent, p.other);
            }
            let ni = dims[p.agent].state_dim;
            if dims[p.other].state_dim != ni {
                bail!("{field}: coupled agents must have equal state dimensions");
            }
            let w = series_matrix(&p.weight, h + 1, ni, ni, &format!("{field}.weight"))?;
            let o = match &p.offset {
                Some(o) => series_vector(o, h + 1, ni, &format!("{field}.offset"))?,
                None => vec![DVector::zeros(ni); h + 1],
            };
            for t in 0..=h {
                weights[t][p.agent][p.other] = w[t].clone();
                offsets[t][p.agent][p.other] = o[t].clone();
            }
        }
        // Dynamics are taken from the `dynamics` field; these are placeholders.
        let a = vec![dims.iter().map(|d| DMatrix::zeros(d.state_dim, d.state_dim)).collect(); h];
        let b = vec![dims.iter().map(|d| DMatrix::zeros(d.state_dim, d.control_dim)).collect(); h];
        let expanded = from_goal_offset(&GoalOffsetSpec {
            dims: dims.clone(),
            horizon: h,
            goals,
            offsets,
            pair_weights: weights,
            control_weights,
            a,
            b,
        })
        .context("costs.goal_offset")?;
        game.q_mat = expanded.q_mat;
        game.q_vec = expanded.q_vec;
        game.r_mat = expanded.r_mat;
        game.r_vec = expanded.r_vec;
        Ok(())
    }

    pub fn to_info(&self) -> Result<InformationStructure> {
        let info = match &self.information {
            InfoSpec::Named(s) => s.build(self.num_agents, self.horizon),
            InfoSpec::Explicit(obs) => InformationStructure::from_array(obs.clone()).context("information")?,
        };
        info.check_shape(self.num_agents, self.horizon)
            .context("information")?;
        Ok(info)
    }

    /// Initial state from `x1` if given, else from the file.
    pub fn initial_state(&self, x1: Option<&[f64]>) -> Result<DVector<f64>> {
        let n: usize = self.agents.iter().map(|d| d.state_dim).sum();
        match (x1, &self.x1) {
            (Some(x), _) => vector(&x.to_vec(), n, "--x1"),
            (None, Some(x)) => vector(x, n, "x1"),
            (None, None) => bail!("no initial state: pass --x1 or set `x1` in the spec"),
        }
    }

    /// The cyclic example in goal/offset form with decoupled dynamics.
    pub fn from_cyclic(params: &CyclicParams, x1: Option<Vector>) -> Result<Self> {
        let spec = params.to_spec()?;
        let (na, h) = (params.num_agents, params.horizon);
        let per_agent = |blocks: &[Vec<DMatrix<f64>>], i: usize| {
            Series::from_values(blocks.iter().map(|b| rows_of(&b[i])).collect())
        };
        let mut pairs = Vec::new();
        for i in 0..na {
            for j in (0..na).filter(|&j| j != i) {
                let w: Vec<Matrix> = (0..=h).map(|t| rows_of(&spec.pair_weights[t][i][j])).collect();
                if w.iter().flatten().flatten().all(|v| *v == 0.0) {
                    continue;
                }
                let o: Vec<Vector> = (0..=h)
                    .map(|t| spec.offsets[t][i][j].iter().copied().collect())
                    .collect();
                let offset = (!o.iter().flatten().all(|v| *v == 0.0)).then(|| Series::from_values(o));
                pairs.push(PairCost {
                    agent: i,
                    other: j,
                    weight: Series::from_values(w),
                    offset,
                });
            }
        }
        Ok(GameSpec {
            num_agents: na,
            horizon: h,
            agents: spec.dims.clone(),
            dynamics: DynamicsSpec::Decoupled(DecoupledDynamics {
                a: (0..na).map(|i| per_agent(&spec.a, i)).collect(),
                b: (0..na).map(|i| per_agent(&spec.b, i)).collect(),
            }),
            costs: CostSpec::GoalOffset(GoalOffsetCosts {
                goals: spec.goals.iter().map(|g| g.iter().copied().collect()).collect(),
                control_weights: (0..na).map(|i| per_agent(&spec.control_weights, i)).collect(),
                pairs,
            }),
            information: InfoSpec::Named(NamedStructure::Cyclic),
            x1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpngame::make_cyclic_example;

    fn scalar_spec(r11: f64) -> String {
        format!(
            r#"{{
  "num_agents": 2,
  "horizon": 2,
  "agents": [{{"state_dim": 1, "control_dim": 1}}, {{"state_dim": 1, "control_dim": 1}}],
  "dynamics": {{"time_invariant": {{"a": [[1, 0], [0, 1]], "b": [[[1], [0]], [[0], [1]]]}}}},
  "costs": {{"expanded": [
    {{"q": {{"constant": [[1, 0], [0, 0]]}}, "r": [{{"constant": [[{r11}]]}}, null]}},
    {{"q": {{"per_time": [[[0, 0], [0, 1]], [[0, 0], [0, 2]], [[0, 0], [0, 3]]]}},
      "q_lin": {{"constant": [0, -1]}},
      "r": [null, {{"constant": [[2]]}}]}}
  ]}},
  "information": "feedback",
  "x1": [1, -1]
}}"#
        )
    }

    #[test]
    fn expanded_costs_fill_the_game() {
        let spec: GameSpec = parse_json(&scalar_spec(1.0)).unwrap();
        let g = spec.to_game().unwrap();
        assert_eq!(g.q_mat[1][2], DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 3.0]));
        assert_eq!(g.q_vec[1][0], DVector::from_vec(vec![0.0, -1.0]));
        assert_eq!(g.r_mat[0][1][0], DMatrix::zeros(1, 1));
        assert_eq!(g.r_mat[1][1][1], DMatrix::from_element(1, 1, 2.0));
        assert_eq!(g.b[0][1], DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(spec.initial_state(None).unwrap(), DVector::from_vec(vec![1.0, -1.0]));
    }

    #[test]
    fn wrong_shapes_name_the_field() {
        let text = scalar_spec(1.0).replace(r#""a": [[1, 0], [0, 1]]"#, r#""a": [[1, 0]]"#);
        let err = parse_json::<GameSpec>(&text).unwrap().to_game().unwrap_err();
        assert!(err.to_string().contains("dynamics.time_invariant.a"), "{err}");

        let text = scalar_spec(1.0).replace(r#""horizon": 2"#, r#""horizon": "two""#);
        let err = parse_json::<GameSpec>(&text).unwrap_err();
        assert!(err.to_string().contains("`horizon`"), "{err}");
    }

    #[test]
    fn per_time_length_is_checked() {
        let text = scalar_spec(1.0).replace(r#", [[0, 0], [0, 3]]]"#, "]");
        let err = parse_json::<GameSpec>(&text).unwrap().to_game().unwrap_err();
        assert!(err.to_string().contains("costs.expanded[1].q"), "{err}");
    }

    #[test]
    fn cyclic_spec_reproduces_the_example() {
        let params = CyclicParams::default();
        let spec = GameSpec::from_cyclic(&params, None).unwrap();
        let (game, info) = make_cyclic_example(&params).unwrap();
        assert_eq!(spec.to_game().unwrap(), game);
        assert_eq!(spec.to_info().unwrap(), info);
    }

    #[test]
    fn spec_round_trips() {
        let spec = GameSpec::from_cyclic(&CyclicParams::default(), Some(vec![1.0, 0.0, -1.0])).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: GameSpec = parse_json(&text).unwrap();
        assert_eq!(back, spec);
        let spec: GameSpec = parse_json(&scalar_spec(0.5)).unwrap();
        let back: GameSpec = parse_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back.to_game().unwrap(), spec.to_game().unwrap());
    }

    #[test]
    fn explicit_information_array() {
        let text = scalar_spec(1.0).replace(
            r#""information": "feedback""#,
            r#""information": [[[true, true], [false, true]], [[true, false], [false, true]]]"#,
        );
        let info = parse_json::<GameSpec>(&text).unwrap().to_info().unwrap();
        assert!(info.observes(0, 0, 1));
        assert!(!info.observes(0, 1, 0));
        let bad = scalar_spec(1.0).replace(r#""information": "feedback""#, r#""information": [[[true]]]"#);
        assert!(parse_json::<GameSpec>(&bad).unwrap().to_info().is_err());
    }
}
