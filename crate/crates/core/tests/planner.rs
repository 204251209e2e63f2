mod support;

use std::sync::Arc;

use invmgmt_core::optim::{
    build_plan, dlp_step, economics, exogenous_demand_path, goodwill_oracle, mssp_step, oracle_plan, simulate_plan,
    Cmp, LinearProgram, LpError, PlanStart, ScenarioTree,
};
use invmgmt_core::topology::{builtin, builtin_initial_inventory, Builtin, EdgeSpec, NodeKind, NodeSpec, TopologySpec};
use invmgmt_core::{CoreEnv, DemandModel, EpisodeConfig, Fulfillment, Topology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{random_action, random_small_config, rel_close, vertex_enumeration};

fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let n = rng.random_range(1..=5);
    let vars: Vec<_> = (0..n)
        .map(|i| {
            let lo = if rng.random_bool(0.7) {
                0.0
            } else {
                -rng.random_range(0.0..5.0)
            };
            let hi = lo + rng.random_range(0.5..10.0);
            lp.add_var(format!("x{i}"), lo, hi, rng.random_range(-3.0..3.0))
        })
        .collect();
    for r in 0..rng.random_range(0..=4) {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.7) {
                terms.push((v, rng.random_range(-3.0..3.0)));
            }
        }
        let cmp = [Cmp::Le, Cmp::Ge, Cmp::Eq][rng.random_range(0..3)];
        lp.add_constraint(format!("r{r}"), terms, cmp, rng.random_range(-5.0..10.0));
    }
    lp.objective_constant = rng.random_range(-2.0..2.0);
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn small_lps_match_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        match (lp.solve(), vertex_enumeration(&lp)) {
            (Ok(sol), Some(best)) => {
                prop_assert!(sol.max_residual < 1e-7, "residual {}", sol.max_residual);
                prop_assert!(rel_close(sol.objective, best, 1e-7), "solver {} vs vertices {}", sol.objective, best);
            }
            (Err(LpError::Infeasible), None) => {}
            (got, want) => prop_assert!(false, "solver {:?} vs enumeration {:?}", got, want),
        }
    }
}

#[test]
fn oracle_replay_agrees_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let cfg = random_small_config(&mut rng);
        let seed = rng.random();
        let demand = exogenous_demand_path(&cfg, seed).unwrap();
        let plan = oracle_plan(&cfg, &demand).unwrap();
        let realized = simulate_plan(&cfg, seed, &plan.actions).unwrap().total_reward();
        assert!(
            rel_close(realized, plan.objective, 1e-6),
            "instance {i}: LP {} vs simulated {realized}",
            plan.objective
        );
    }
}

/// Plan from a mid-episode state against the realized remainder, then replay
/// the whole plan from that state.
#[test]
fn mid_episode_plan_replay_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..100 {
        let cfg = random_small_config(&mut rng);
        let seed = rng.random();
        let mut env = CoreEnv::new(cfg.clone(), seed).unwrap();
        env.reset(seed);
        let k = rng.random_range(0..cfg.horizon);
        for _ in 0..k {
            env.step(&random_action(&mut rng, cfg.topology.num_reorder())).unwrap();
        }
        let start = PlanStart::from_state(env.state());
        let rest = exogenous_demand_path(&cfg, seed).unwrap()[k..].to_vec();
        let sol = build_plan(
            &economics(&cfg),
            &start,
            ScenarioTree::single_path(rest.clone()).unwrap(),
        )
        .unwrap()
        .solve()
        .unwrap();
        assert_eq!(sol.first_action, dlp_step(&economics(&cfg), &start, &rest).unwrap());
        let mut realized = 0.0;
        for a in &sol.path_actions {
            realized += env.step(a).unwrap().1.reward;
        }
        assert!(env.is_done());
        assert!(
            rel_close(realized, sol.objective, 1e-6),
            "instance {i} from t={k}: LP {} vs simulated {realized}",
            sol.objective
        );
    }
}

fn tiny_retailer(rng: &mut impl Rng) -> Topology {
    Topology::from_spec(TopologySpec {
        name: "tiny".into(),
        nodes: vec![
            NodeSpec::new("raw", NodeKind::RawSource),
            NodeSpec::new("shop", NodeKind::Retailer).holding(rng.random_range(0.05..1.0)),
            NodeSpec::new("market", NodeKind::Market),
        ],
        edges: vec![
            EdgeSpec::reorder(
                "buy",
                "raw",
                "shop",
                1,
                rng.random_range(1.0..3.0),
                rng.random_range(0.0..0.3),
            ),
            EdgeSpec::retail(
                "sell",
                "shop",
                "market",
                rng.random_range(3.5..6.0),
                rng.random_range(0.0..2.0),
            ),
        ],
    })
    .unwrap()
}

/// Exhaustive search over integer order triples.
fn grid_optimum(cfg: &EpisodeConfig, max_order: u32) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a0 in 0..=max_order {
        for a1 in 0..=max_order {
            for a2 in 0..=max_order {
                let plan = [vec![f64::from(a0)], vec![f64::from(a1)], vec![f64::from(a2)]];
                best = best.max(simulate_plan(cfg, 0, &plan).unwrap().total_reward());
            }
        }
    }
    best
}

#[test]
fn tiny_oracle_matches_exhaustive_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..6 {
        let topo = Arc::new(tiny_retailer(&mut rng));
        let trace: Vec<f64> = (0..3).map(|_| f64::from(rng.random_range(0..=10u32))).collect();
        let mut cfg = EpisodeConfig::new(topo, vec![DemandModel::replay(trace.clone())]);
        cfg.horizon = 3;
        cfg.fulfillment = if i % 2 == 0 {
            Fulfillment::Backlog
        } else {
            Fulfillment::LostSales
        };
        cfg.initial_inventory = [("shop".to_owned(), f64::from(rng.random_range(0..=10u32)))].into();
        let demand = exogenous_demand_path(&cfg, 0).unwrap();
        assert_eq!(demand.iter().map(|d| d[0]).collect::<Vec<_>>(), trace);
        let plan = oracle_plan(&cfg, &demand).unwrap();
        let brute = grid_optimum(&cfg, 30);
        assert!(
            (plan.objective - brute).abs() <= 1e-9 * brute.abs().max(1.0),
            "instance {i}: LP {} vs grid {brute}",
            plan.objective
        );
    }
}

fn random_start(rng: &mut impl Rng) -> (EpisodeConfig, PlanStart) {
    let which = if rng.random_bool(0.5) {
        Builtin::Base
    } else {
        Builtin::Serial
    };
    let mut cfg = EpisodeConfig::new(Arc::new(builtin(which)), vec![DemandModel::poisson(20.0)]);
    cfg.initial_inventory = builtin_initial_inventory(which);
    cfg.fulfillment = if rng.random_bool(0.5) {
        Fulfillment::Backlog
    } else {
        Fulfillment::LostSales
    };
    let seed = rng.random();
    let mut env = CoreEnv::new(cfg.clone(), seed).unwrap();
    env.reset(seed);
    for _ in 0..rng.random_range(0..20) {
        env.step(&random_action(rng, cfg.topology.num_reorder())).unwrap();
    }
    let start = PlanStart::from_state(env.state());
    (cfg, start)
}

#[test]
fn single_scenario_tree_is_dlp() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let (cfg, start) = random_start(&mut rng);
        let stages = rng.random_range(1..=10);
        let path: Vec<Vec<f64>> = (0..stages).map(|_| vec![rng.random_range(0.0..40.0)]).collect();
        let econ = economics(&cfg);
        let d = dlp_step(&econ, &start, &path).unwrap();
        let m = mssp_step(&econ, &start, ScenarioTree::single_path(path).unwrap()).unwrap();
        assert_eq!(d, m);
    }
}

#[test]
fn scenario_order_does_not_change_the_root_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let (cfg, start) = random_start(&mut rng);
        let mut paths: Vec<Vec<Vec<f64>>> = (0..6)
            .map(|_| (0..4).map(|_| vec![rng.random_range(5.0..35.0)]).collect())
            .collect();
        let probs = vec![1.0; paths.len()];
        let econ = economics(&cfg);
        let a = mssp_step(&econ, &start, ScenarioTree::from_paths(&paths, &probs).unwrap()).unwrap();
        paths.reverse();
        paths.swap(1, 4);
        let b = mssp_step(&econ, &start, ScenarioTree::from_paths(&paths, &probs).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

/// One retailer, zero lead time, one period: a newsvendor. The stochastic
/// order must lie between the orders that are optimal for each scenario.
#[test]
fn two_scenario_order_is_bracketed() {
    let topo = Arc::new(
        Topology::from_spec(TopologySpec {
            name: "nv".into(),
            nodes: vec![
                NodeSpec::new("raw", NodeKind::RawSource),
                NodeSpec::new("shop", NodeKind::Retailer).holding(0.5),
                NodeSpec::new("market", NodeKind::Market),
            ],
            edges: vec![
                EdgeSpec::reorder("buy", "raw", "shop", 0, 2.0, 0.0),
                EdgeSpec::retail("sell", "shop", "market", 5.0, 1.0),
            ],
        })
        .unwrap(),
    );
    let econ = invmgmt_core::optim::PlanEconomics {
        topology: topo.clone(),
        fulfillment: Fulfillment::LostSales,
        discount: 1.0,
    };
    let start = PlanStart {
        t0: 0,
        on_hand: vec![0.0, 4.0, 0.0],
        pipeline: vec![vec![]],
        unfulfilled_prev: vec![0.0],
    };
    let (d, delta) = (20.0, 6.0);
    let low = dlp_step(&econ, &start, &[vec![d - delta]]).unwrap()[0];
    let high = dlp_step(&econ, &start, &[vec![d + delta]]).unwrap()[0];
    assert!((low - (d - delta - 4.0)).abs() < 1e-9);
    assert!((high - (d + delta - 4.0)).abs() < 1e-9);
    let tree = ScenarioTree::from_paths(&[vec![vec![d - delta]], vec![vec![d + delta]]], &[1.0, 1.0]).unwrap();
    let q = mssp_step(&econ, &start, tree).unwrap()[0];
    assert!(low - 1e-9 <= q && q <= high + 1e-9, "{low} <= {q} <= {high}");
}

/// Recourse value sits between the value of committing to the mean-path root
/// decision and the wait-and-see value.
#[test]
fn recourse_value_is_between_eev_and_wait_and_see() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..10 {
        let (cfg, start) = random_start(&mut rng);
        let econ = economics(&cfg);
        let paths: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| (0..4).map(|_| vec![rng.random_range(5.0..35.0)]).collect())
            .collect();
        let probs = vec![0.2; 5];
        let tree = ScenarioTree::from_paths(&paths, &probs).unwrap();
        let model = build_plan(&econ, &start, tree.clone()).unwrap();
        let rp = model.solve().unwrap().objective;

        let ws: f64 = paths
            .iter()
            .map(|p| {
                0.2 * build_plan(&econ, &start, ScenarioTree::single_path(p.clone()).unwrap())
                    .unwrap()
                    .solve()
                    .unwrap()
                    .objective
            })
            .sum();

        let mean: Vec<Vec<f64>> = (0..4)
            .map(|t| vec![paths.iter().map(|p| p[t][0]).sum::<f64>() / 5.0])
            .collect();
        let root = dlp_step(&econ, &start, &mean).unwrap();
        let mut fixed = model.clone();
        for (v, a) in fixed.orders[0].clone().into_iter().zip(root) {
            fixed.lp.add_constraint("fix_root", vec![(v, 1.0)], Cmp::Eq, a);
        }
        let eev = fixed.lp.solve().unwrap().objective;

        assert!(eev <= rp + 1e-6 * rp.abs().max(1.0), "EEV {eev} > RP {rp}");
        assert!(rp <= ws + 1e-6 * ws.abs().max(1.0), "RP {rp} > WS {ws}");
    }
}

#[test]
fn goodwill_oracle_is_consistent_with_its_own_replay() {
    for seed in 0..4 {
        let mut cfg = EpisodeConfig::new(Arc::new(builtin(Builtin::Serial)), vec![DemandModel::poisson(20.0)]);
        cfg.initial_inventory = builtin_initial_inventory(Builtin::Serial);
        cfg.goodwill_enabled = true;
        cfg.horizon = 12;
        let g = goodwill_oracle(&cfg, seed, 10).unwrap();
        let rec = simulate_plan(&cfg, seed, &g.actions).unwrap();
        assert_eq!(rec.total_reward(), g.realized_profit);
        assert!(g.iterations <= 10);
        if g.stockout_periods == 0 {
            let s: Vec<f64> = rec.periods.iter().map(|p| p.step.sentiment).collect();
            assert!(
                s.windows(2).all(|w| w[1] >= w[0]),
                "sentiment fell without stockouts: {s:?}"
            );
        }
    }
}
