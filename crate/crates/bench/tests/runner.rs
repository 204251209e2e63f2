use invmgmt_bench::grid::build_core_grid;
use invmgmt_bench::runner::{read_csv, results_csv, run_episode, write_csv, CSV_COLUMNS};
use invmgmt_bench::{run_matrix, Scenario};

fn ids(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn quiet(_: &invmgmt_bench::RunResult) {}

#[test]
fn one_agent_full_grid_gives_220_rows() {
    let grid = build_core_grid();
    let seeds: Vec<u64> = (0..10).collect();
    let res = run_matrix(&ids(&["zero"]), &grid, &seeds, &quiet);
    assert_eq!(res.len(), 220);
    assert!(res.iter().all(|r| !r.is_failed()));
    let mut keys: Vec<_> = res.iter().map(|r| (r.scenario.clone(), r.seed)).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 220);
}

#[test]
fn profit_is_sum_of_ledger_rewards() {
    let sc: Scenario = "serial-trend-seasonal-gw-lost".parse().unwrap();
    let rec = run_episode("newsvendor", &sc, 4).unwrap();
    let sum: f64 = rec.periods.iter().map(|p| p.step.reward).sum();
    let k = invmgmt_core::env::kpis(&rec);
    assert!((k.profit - sum).abs() <= 1e-9 * sum.abs().max(1.0));
}

#[test]
fn csv_is_deterministic_and_round_trips() {
    let grid: Vec<Scenario> = build_core_grid().into_iter().step_by(5).collect();
    let agents = ids(&["newsvendor", "ss-I", "echelon", "zero"]);
    let a = results_csv(&run_matrix(&agents, &grid, &[0, 1], &quiet), false);
    let b = results_csv(&run_matrix(&agents, &grid, &[0, 1], &quiet), false);
    assert_eq!(a, b);
    assert_eq!(a.lines().next().unwrap(), CSV_COLUMNS.join(","));

    let rows = read_csv(a.as_bytes()).unwrap();
    assert_eq!(rows.len(), agents.len() * grid.len() * 2);
    assert!(rows.iter().all(|r| r.wall_time_s.is_none()));
    let mut again = Vec::new();
    write_csv(&rows, &mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), a);
}

#[test]
fn timing_column_only_when_requested() {
    let grid = vec![build_core_grid()[0].clone()];
    let res = run_matrix(&ids(&["zero"]), &grid, &[0], &quiet);
    let rows = read_csv(results_csv(&res, true).as_bytes()).unwrap();
    assert!(rows[0].wall_time_s.is_some());
}

#[test]
fn exogenous_rows_share_one_demand_path() {
    for sc in build_core_grid().into_iter().filter(|s| s.is_exogenous()) {
        let demand = |agent: &str| -> Vec<Vec<f64>> {
            run_episode(agent, &sc, 2)
                .unwrap()
                .periods
                .iter()
                .map(|p| p.step.demand.clone())
                .collect()
        };
        let zero = demand("zero");
        assert_eq!(zero, demand("newsvendor-I"), "{}", sc.id);
        assert_eq!(zero, demand("ss"), "{}", sc.id);
    }
}

#[test]
fn adding_an_agent_does_not_change_others() {
    let grid: Vec<Scenario> = build_core_grid()
        .into_iter()
        .filter(|s| s.is_exogenous())
        .take(4)
        .collect();
    let alone = run_matrix(&ids(&["expsmooth"]), &grid, &[3, 7], &quiet);
    let crowd = run_matrix(&ids(&["zero", "expsmooth", "echelon-I"]), &grid, &[3, 7], &quiet);
    let mine: Vec<_> = crowd.iter().filter(|r| r.agent == "expsmooth").collect();
    assert_eq!(alone.len(), mine.len());
    for (a, b) in alone.iter().zip(mine) {
        assert_eq!(a.outcome, b.outcome);
        assert_eq!((&a.scenario, a.seed), (&b.scenario, b.seed));
    }
}

#[test]
fn unknown_agent_becomes_a_failed_row() {
    let grid = vec![build_core_grid()[0].clone()];
    let res = run_matrix(&ids(&["zero", "ppo"]), &grid, &[0], &quiet);
    assert_eq!(res.len(), 2);
    assert!(!res[0].is_failed());
    assert!(res[1].is_failed());
}
