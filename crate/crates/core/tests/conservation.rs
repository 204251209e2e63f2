mod support;

use std::sync::Arc;

use invmgmt_core::topology::{builtin, builtin_initial_inventory, Builtin};
use invmgmt_core::{CoreEnv, DemandModel, EpisodeConfig, Fulfillment};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use support::{check_ledger, random_any_config, random_episode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ledger_recomputation_and_pipeline_identity(gen_seed in any::<u64>(), env_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(gen_seed);
        let cfg = random_any_config(&mut rng);
        let rec = random_episode(&cfg, env_seed, &mut rng).map_err(TestCaseError::fail)?;
        check_ledger(&rec).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn reward_is_discounted_sum_of_terms(gen_seed in any::<u64>(), alpha in 0.5f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(gen_seed);
        let mut cfg = random_any_config(&mut rng);
        cfg.discount = alpha;
        let rec = random_episode(&cfg, gen_seed, &mut rng).map_err(TestCaseError::fail)?;
        for (t, p) in rec.periods.iter().enumerate() {
            let s = &p.step;
            let tm = &s.terms;
            let net = tm.sales_revenue - tm.procurement - tm.holding - tm.pipeline_holding
                - tm.operating - tm.shortage - tm.fixed_order;
            let want = alpha.powi(t as i32) * net;
            prop_assert!((s.reward - want).abs() <= 1e-9 * want.abs().max(1.0));
            let k: f64 = (0..cfg.topology.num_reorder())
                .filter(|&p| s.filled[p] > 0.0)
                .map(|p| cfg.topology.reorder_edge(p).fixed_order_cost)
                .sum();
            prop_assert!((tm.fixed_order - k).abs() <= 1e-12);
        }
    }
}

fn base_cfg(fulfillment: Fulfillment) -> EpisodeConfig {
    let mut cfg = EpisodeConfig::new(Arc::new(builtin(Builtin::Base)), vec![DemandModel::poisson(20.0)]);
    cfg.initial_inventory = builtin_initial_inventory(Builtin::Base);
    cfg.fulfillment = fulfillment;
    cfg
}

#[test]
fn pipeline_holds_filled_orders_not_requests() {
    let cfg = base_cfg(Fulfillment::Backlog);
    let topo = cfg.topology.clone();
    let mut env = CoreEnv::new(cfg, 5).unwrap();
    env.reset(5);
    let huge = vec![1e6; topo.num_reorder()];
    let (_, r) = env.step(&huge).unwrap();
    let s = env.state();
    for pos in 0..topo.num_reorder() {
        let (from, _) = topo.reorder_endpoints(pos);
        if topo.node(from).kind.is_managed() {
            assert!(r.filled[pos] < 1e6, "edge {pos} filled beyond supply");
        }
        let lead = topo.reorder_edge(pos).lead_time as usize;
        if lead > 0 {
            assert_eq!(*s.pipeline[pos].back().unwrap(), r.filled[pos]);
            assert_eq!(s.in_transit[pos], r.filled[pos]);
        }
    }
}

#[test]
fn backlog_carries_and_lost_sales_forgets() {
    for fulfillment in [Fulfillment::Backlog, Fulfillment::LostSales] {
        let mut cfg = base_cfg(fulfillment);
        cfg.initial_inventory.clear();
        let topo = cfg.topology.clone();
        let mut env = CoreEnv::new(cfg, 9).unwrap();
        env.reset(9);
        let mut prev_u = vec![0.0; topo.num_retail()];
        while !env.is_done() {
            let (_, r) = env.step(&vec![0.0; topo.num_reorder()]).unwrap();
            for k in 0..topo.num_retail() {
                let carried = match fulfillment {
                    Fulfillment::Backlog => prev_u[k],
                    Fulfillment::LostSales => 0.0,
                };
                assert_eq!(r.effective_demand[k], r.demand[k] + carried);
            }
            prev_u = r.unfulfilled.clone();
        }
    }
}

#[test]
fn same_seed_same_actions_same_ledger() {
    let mut a = ChaCha8Rng::seed_from_u64(11);
    let mut b = ChaCha8Rng::seed_from_u64(11);
    let cfg = random_any_config(&mut ChaCha8Rng::seed_from_u64(3));
    let ra = random_episode(&cfg, 42, &mut a).unwrap();
    let rb = random_episode(&cfg, 42, &mut b).unwrap();
    assert_eq!(ra.ledger_csv(), rb.ledger_csv());
}

#[test]
fn ledger_check_rejects_tampering() {
    let cfg = base_cfg(Fulfillment::Backlog);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rec = random_episode(&cfg, 1, &mut rng).unwrap();
    check_ledger(&rec).unwrap();

    let retailer = cfg.topology.node_idx("retailer").unwrap();
    let mut bad = rec.clone();
    bad.periods[3].on_hand[retailer] += 1e-6;
    assert!(check_ledger(&bad).is_err());

    let mut bad = rec.clone();
    let pos = (0..cfg.topology.num_reorder())
        .find(|&p| cfg.topology.reorder_edge(p).lead_time > 0)
        .unwrap();
    bad.periods[5].in_transit[pos] += 1.0;
    assert!(check_ledger(&bad).is_err());
}
