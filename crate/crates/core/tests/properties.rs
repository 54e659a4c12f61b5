//! Randomized invariants.

use mpngame::gen::{random_dims, random_game, random_info, GameShape};
use mpngame::goal_offset::GoalOffsetSpec;
use mpngame::{
    build_mpn, from_goal_offset, node_variables, policy_constraints, rollout, total_cost, validate_game,
    validate_graph, AgentDims, InformationStructure, PairRelation, VarId,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_spec(r: &mut ChaCha8Rng) -> GoalOffsetSpec {
    let na = r.gen_range(1..=3);
    let h = r.gen_range(1..=4);
    let nd = r.gen_range(1..=2);
    let dims: Vec<AgentDims> = (0..na).map(|_| AgentDims::new(nd, r.gen_range(1..=2))).collect();
    let mut mat = |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
    let psd = |m: DMatrix<f64>| &m * m.transpose();
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for _ in 0..=h {
        let mut o = Vec::new();
        let mut w = Vec::new();
        for _ in 0..na {
            o.push((0..na).map(|_| mat(nd, 1).column(0).into_owned()).collect::<Vec<_>>());
            w.push((0..na).map(|_| psd(mat(nd, nd))).collect::<Vec<_>>());
        }
        offsets.push(o);
        weights.push(w);
    }
    GoalOffsetSpec {
        goals: (0..na).map(|_| mat(nd, 1).column(0).into_owned()).collect(),
        offsets,
        pair_weights: weights,
        control_weights: (0..h)
            .map(|_| dims.iter().map(|d| psd(mat(d.control_dim, d.control_dim)) + DMatrix::identity(d.control_dim, d.control_dim)).collect())
            .collect(),
        a: (0..h).map(|_| dims.iter().map(|d| mat(d.state_dim, d.state_dim)).collect()).collect(),
        b: (0..h).map(|_| dims.iter().map(|d| mat(d.state_dim, d.control_dim)).collect()).collect(),
        dims,
        horizon: h,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn goal_offset_expansion_differs_by_a_constant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r);
        let game = from_goal_offset(&spec).unwrap();
        prop_assert!(validate_game(&game).is_valid());
        let n = game.state_dim();
        let mut diffs = Vec::new();
        for _ in 0..10 {
            let x1 = DVector::from_fn(n, |_, _| r.gen_range(-2.0..2.0));
            let controls: Vec<Vec<DVector<f64>>> = (0..game.horizon)
                .map(|_| (0..game.num_agents()).map(|j| DVector::from_fn(game.control_dim(j), |_, _| r.gen_range(-2.0..2.0))).collect())
                .collect();
            let traj = rollout(&game, &x1, &controls).unwrap();
            for i in 0..game.num_agents() {
                let mut direct = 0.0;
                for t in 0..=game.horizon {
                    let u = (t < game.horizon).then(|| &traj.controls[t][i]);
                    direct += spec.direct_stage_cost(i, t, &traj.states[t], u);
                }
                let dropped: f64 = (0..=game.horizon).map(|t| spec.dropped_constant(i, t)).sum();
                let assembled = total_cost(&game, i, &traj).unwrap();
                prop_assert!((assembled + dropped - direct).abs() < 1e-9 * (1.0 + direct.abs()));
                diffs.push((i, assembled - direct));
            }
        }
        for i in 0..game.num_agents() {
            let d: Vec<f64> = diffs.iter().filter(|(a, _)| *a == i).map(|(_, d)| *d).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
            prop_assert!(var < 1e-18);
        }
    }

    #[test]
    fn classify_pair_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let na = r.gen_range(2..=4);
        let info = random_info(&mut r, na, 3);
        for t in 0..3 {
            for i in 0..na {
                for j in (0..na).filter(|&j| j != i) {
                    let a = info.classify_pair(i, j, t);
                    let b = info.classify_pair(j, i, t);
                    prop_assert_eq!(a, b);
                    if let PairRelation::OneSided { observer, observed } = a {
                        prop_assert!(info.observes(t, observer, observed));
                        prop_assert!(!info.observes(t, observed, observer));
                    }
                }
            }
        }
    }

    #[test]
    fn built_graphs_are_valid_and_consistent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (dims, h) = random_dims(&mut r, &GameShape { max_agents: 4, ..GameShape::default() });
        let game = random_game(&mut r, dims, h);
        let info = random_info(&mut r, game.num_agents(), h);
        let g = build_mpn(&game, &info).unwrap();
        prop_assert!(validate_graph(&g).is_valid());
        prop_assert_eq!(&g, &build_mpn(&game, &info).unwrap());
        for node in g.nodes() {
            let d = g.reachable.descendants(node);
            prop_assert!(d.contains(&node));
            prop_assert_eq!(policy_constraints(&g, node).len(), d.len() - 1);
            if node.time + 1 < h {
                let next = mpngame::NodeId::new(node.agent, node.time + 1);
                prop_assert!(g.reachable.descendants(next).len() <= d.len());
                // vars(i,t) = {x_{t+1}, u^i_t} plus the successor's states and
                // own controls, plus anticipated copies of everything reachable.
                let vars = node_variables(&g, node);
                let succ = node_variables(&g, next);
                let (x_next, u_now) = (
                    VarId::State { time: node.time + 1 },
                    VarId::Control { agent: node.agent, time: node.time },
                );
                prop_assert!(vars.contains(&x_next));
                prop_assert!(vars.contains(&u_now));
                for v in succ {
                    let mapped = match v {
                        VarId::Anticipated { agent, time, .. } => VarId::Anticipated { owner: node, agent, time },
                        other => other,
                    };
                    prop_assert!(vars.contains(&mapped));
                }
            } else {
                prop_assert_eq!(node_variables(&g, node).len(), h - node.time + h - node.time);
            }
        }
    }

    #[test]
    fn structure_json_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let info = random_info(&mut r, 3, 4);
        let once: InformationStructure = serde_json_round_trip(&info);
        prop_assert_eq!(&once, &info);
        for canon in [InformationStructure::open_loop(3, 4), InformationStructure::feedback(3, 4)] {
            prop_assert_eq!(serde_json_round_trip(&canon), canon);
        }
    }

    #[test]
    fn rollout_matches_an_independent_loop(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (dims, h) = random_dims(&mut r, &GameShape::default());
        let game = random_game(&mut r, dims, h);
        let n = game.state_dim();
        let x1 = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
        let controls: Vec<Vec<DVector<f64>>> = (0..h)
            .map(|_| (0..game.num_agents()).map(|j| DVector::from_fn(game.control_dim(j), |_, _| r.gen_range(-1.0..1.0))).collect())
            .collect();
        let traj = rollout(&game, &x1, &controls).unwrap();
        let mut x = x1.clone();
        prop_assert_eq!(&traj.states[0], &x);
        for t in 0..h {
            let mut next = DVector::zeros(n);
            for row in 0..n {
                let mut acc = 0.0;
                for col in 0..n {
                    acc += game.a[t][(row, col)] * x[col];
                }
                for j in 0..game.num_agents() {
                    for k in 0..game.control_dim(j) {
                        acc += game.b[t][j][(row, k)] * controls[t][j][k];
                    }
                }
                next[row] = acc;
            }
            prop_assert!((&next - &traj.states[t + 1]).amax() <= 1e-12 * (1.0 + next.amax()));
            x = next;
        }
        prop_assert_eq!(rollout(&game, &x1, &controls).unwrap(), traj);
    }
}

fn serde_json_round_trip(info: &InformationStructure) -> InformationStructure {
    serde_json::from_str(&serde_json::to_string(info).unwrap()).unwrap()
}
