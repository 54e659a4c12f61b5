//! Canonical structures against the independent baselines.

use mpngame::baseline::{agent_subgame, lqr_trajectory};
use mpngame::gen::{random_decoupled_game, random_dims, random_game, random_info, GameShape};
use mpngame::solver::rollout_policies;
use mpngame::{
    baseline_feedback_nash, baseline_open_loop_nash, best_response, build_mpn, solve_equilibrium,
    solve_stage_policies, InformationStructure, LqGame,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_x1(rng: &mut ChaCha8Rng, game: &LqGame) -> DVector<f64> {
    DVector::from_fn(game.state_dim(), |_, _| rng.gen_range(-2.0..2.0))
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

#[test]
fn open_loop_matches_stacked_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..100 {
        let (dims, h) = random_dims(&mut rng, &GameShape::default());
        let game = random_game(&mut rng, dims, h);
        let x1 = random_x1(&mut rng, &game);
        let info = InformationStructure::open_loop(game.num_agents(), h);
        let sol = solve_equilibrium(&game, &info, &x1).unwrap();
        let base = baseline_open_loop_nash(&game, &x1).unwrap();
        let e = rel_err(&sol.trajectory.flat_states(), &base.trajectory.flat_states());
        let eu = rel_err(&sol.trajectory.flat_controls(), &base.trajectory.flat_controls());
        assert!(e <= 1e-8 && eu <= 1e-8, "seed {seed}: state {e:e}, control {eu:e}");
    }
}

#[test]
fn feedback_matches_coupled_riccati() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..100 {
        let (dims, h) = random_dims(&mut rng, &GameShape::default());
        let game = random_game(&mut rng, dims, h);
        let info = InformationStructure::feedback(game.num_agents(), h);
        let graph = build_mpn(&game, &info).unwrap();
        let policies = solve_stage_policies(&game, &graph).unwrap();
        let base = baseline_feedback_nash(&game).unwrap();
        let d = policies.max_difference(&base.policies);
        assert!(d <= 1e-9, "seed {seed}: gain difference {d:e}");
        for t in 0..h {
            for i in 0..game.num_agents() {
                let p = policies.get(i, t).unwrap();
                assert_eq!(p.masked_jacobian, p.gain);
            }
        }
    }
}

#[test]
fn feedback_best_response_does_not_improve() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..50 {
        let (dims, h) = random_dims(&mut rng, &GameShape::default());
        let game = random_game(&mut rng, dims, h);
        let x1 = random_x1(&mut rng, &game);
        let info = InformationStructure::feedback(game.num_agents(), h);
        let sol = solve_equilibrium(&game, &info, &x1).unwrap();
        for i in 0..game.num_agents() {
            let (traj, cost) = best_response(&game, i, &sol.policies, &x1).unwrap();
            let eq = sol.costs[i];
            assert!(eq - cost <= 1e-7 * (1.0 + eq.abs()), "seed {seed} agent {i}: {eq} vs {cost}");
            assert!(rel_err(&traj.flat_controls(), &sol.trajectory.flat_controls()) < 1e-7);
        }
    }
}

#[test]
fn single_stage_collapses_all_structures() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let (dims, _) = random_dims(&mut rng, &GameShape::default());
        let game = random_game(&mut rng, dims, 1);
        let x1 = random_x1(&mut rng, &game);
        let na = game.num_agents();
        let reference = solve_equilibrium(&game, &InformationStructure::open_loop(na, 1), &x1).unwrap();
        for info in [
            InformationStructure::feedback(na, 1),
            InformationStructure::cyclic(na, 1),
            random_info(&mut rng, na, 1),
        ] {
            let sol = solve_equilibrium(&game, &info, &x1).unwrap();
            let d = (sol.trajectory.flat_states() - reference.trajectory.flat_states()).amax();
            assert!(d <= 1e-10, "difference {d:e}");
        }
        let fb = baseline_feedback_nash(&game).unwrap();
        let fb_traj = rollout_policies(&game, &fb.policies, &x1).unwrap();
        assert!((fb_traj.flat_states() - reference.trajectory.flat_states()).amax() <= 1e-10);
    }
}

#[test]
fn decoupled_games_ignore_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..30 {
        let (dims, h) = random_dims(&mut rng, &GameShape::default());
        let game = random_decoupled_game(&mut rng, dims, h);
        let x1 = random_x1(&mut rng, &game);
        let na = game.num_agents();
        let structures = [
            InformationStructure::open_loop(na, h),
            InformationStructure::feedback(na, h),
            InformationStructure::cyclic(na, h),
            random_info(&mut rng, na, h),
        ];
        let trajs: Vec<_> = structures
            .iter()
            .map(|info| solve_equilibrium(&game, info, &x1).unwrap().trajectory)
            .collect();
        for t in &trajs[1..] {
            assert!((t.flat_states() - trajs[0].flat_states()).amax() <= 1e-9);
        }
        for i in 0..na {
            let sub = agent_subgame(&game, i);
            let off = game.state_offset(i);
            let ni = game.dims[i].state_dim;
            let lqr = lqr_trajectory(&sub, &x1.rows(off, ni).into_owned()).unwrap();
            for (s, x) in lqr.states.iter().enumerate() {
                let d = (x - trajs[0].states[s].rows(off, ni)).amax();
                assert!(d <= 1e-9, "agent {i} state {s}: {d:e}");
            }
        }
    }
}

#[test]
fn random_structures_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for seed in 0..100 {
        let (dims, h) = random_dims(&mut rng, &GameShape::default());
        let game = random_game(&mut rng, dims, h);
        let x1 = random_x1(&mut rng, &game);
        let info = random_info(&mut rng, game.num_agents(), h);
        let sol = solve_equilibrium(&game, &info, &x1);
        assert!(sol.is_ok(), "seed {seed}: {:?}", sol.err().map(|e| e.to_string()));
    }
}
