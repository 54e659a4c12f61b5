//! Random valid games and information structures for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::game::{AgentDims, LqGame};
use crate::info::InformationStructure;

/// Ranges for [`random_game`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameShape {
    pub max_agents: usize,
    pub max_horizon: usize,
    pub max_state_dim: usize,
    pub max_control_dim: usize,
}

impl Default for GameShape {
    fn default() -> Self {
        Self {
            max_agents: 3,
            max_horizon: 5,
            max_state_dim: 3,
            max_control_dim: 2,
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
}

fn uvec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

/// Random PSD matrix, rank-deficient with some probability.
fn psd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let k = if rng.gen_bool(0.3) { rng.gen_range(0..=n) } else { n };
    let m = uniform(rng, n, k, 1.0);
    let p = &m * m.transpose() * scale;
    (&p + p.transpose()) * 0.5
}

fn pd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    psd(rng, n, 0.5) + DMatrix::identity(n, n) * rng.gen_range(0.5..1.5)
}

pub fn random_dims<R: Rng>(rng: &mut R, shape: &GameShape) -> (Vec<AgentDims>, usize) {
    let na = rng.gen_range(1..=shape.max_agents);
    let horizon = rng.gen_range(1..=shape.max_horizon);
    let dims = (0..na)
        .map(|_| {
            AgentDims::new(
                rng.gen_range(1..=shape.max_state_dim),
                rng.gen_range(1..=shape.max_control_dim),
            )
        })
        .collect();
    (dims, horizon)
}

/// A random game with coupled dynamics and costs.
pub fn random_game<R: Rng>(rng: &mut R, dims: Vec<AgentDims>, horizon: usize) -> LqGame {
    let mut g = LqGame::zeros(dims, horizon);
    let n = g.state_dim();
    let na = g.num_agents();
    for t in 0..horizon {
        g.a[t] = DMatrix::identity(n, n) + uniform(rng, n, n, 0.3);
        for j in 0..na {
            g.b[t][j] = uniform(rng, n, g.control_dim(j), 1.0);
        }
    }
    for i in 0..na {
        for t in 0..=horizon {
            g.q_mat[i][t] = psd(rng, n, 0.5);
            g.q_vec[i][t] = uvec(rng, n, 1.0);
        }
        for j in 0..na {
            let mj = g.control_dim(j);
            for t in 0..horizon {
                g.r_mat[i][j][t] = if i == j {
                    pd(rng, mj)
                } else if rng.gen_bool(0.5) {
                    psd(rng, mj, 0.3)
                } else {
                    DMatrix::zeros(mj, mj)
                };
                g.r_vec[i][j][t] = uvec(rng, mj, 0.5);
            }
        }
    }
    g
}

/// A random game in which every agent's dynamics and cost involve only its
/// own state block and control.
pub fn random_decoupled_game<R: Rng>(rng: &mut R, dims: Vec<AgentDims>, horizon: usize) -> LqGame {
    let mut g = LqGame::zeros(dims.clone(), horizon);
    let n = g.state_dim();
    for t in 0..horizon {
        let mut a = DMatrix::zeros(n, n);
        for (i, d) in dims.iter().enumerate() {
            let off = g.state_offset(i);
            a.view_mut((off, off), (d.state_dim, d.state_dim))
                .copy_from(&(DMatrix::identity(d.state_dim, d.state_dim) + uniform(rng, d.state_dim, d.state_dim, 0.3)));
            let mut b = DMatrix::zeros(n, d.control_dim);
            b.rows_mut(off, d.state_dim)
                .copy_from(&uniform(rng, d.state_dim, d.control_dim, 1.0));
            g.b[t][i] = b;
            g.r_mat[i][i][t] = pd(rng, d.control_dim);
            g.r_vec[i][i][t] = uvec(rng, d.control_dim, 0.5);
        }
        g.a[t] = a;
    }
    for (i, d) in dims.iter().enumerate() {
        let off = g.state_offset(i);
        for t in 0..=horizon {
            let mut q = DMatrix::zeros(n, n);
            q.view_mut((off, off), (d.state_dim, d.state_dim))
                .copy_from(&psd(rng, d.state_dim, 0.5));
            let mut qv = DVector::zeros(n);
            qv.rows_mut(off, d.state_dim)
                .copy_from(&uvec(rng, d.state_dim, 1.0));
            g.q_mat[i][t] = q;
            g.q_vec[i][t] = qv;
        }
    }
    g
}

/// Random observation flags, diagonal included.
pub fn random_info<R: Rng>(rng: &mut R, num_agents: usize, horizon: usize) -> InformationStructure {
    let obs = (0..horizon)
        .map(|_| {
            (0..num_agents)
                .map(|_| (0..num_agents).map(|_| rng.gen_bool(0.5)).collect())
                .collect()
        })
        .collect();
    InformationStructure {
        num_agents,
        horizon,
        obs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_games_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (dims, h) = random_dims(&mut rng, &GameShape::default());
            assert!(validate_game(&random_game(&mut rng, dims.clone(), h)).is_valid());
            assert!(validate_game(&random_decoupled_game(&mut rng, dims, h)).is_valid());
        }
    }
}
