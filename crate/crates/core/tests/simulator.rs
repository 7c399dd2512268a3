mod common;

use proptest::prelude::*;

use common::*;
use thiele::measure::solve_spouse_reserves;
use thiele::model::config::ModelConfig;
use thiele::model::{Discount, State, TimeGrid};
use thiele::simulator::{simulate_pv, write_paths_csv, Simulator};

const DISCRETE: &str = r#"{
    "schema": 1, "model_kind": "discrete", "t_start": 0, "horizon_end": 15, "grid_step": 0.25,
    "interest": {"constant": 0.02},
    "discrete": {
        "n_states": 3,
        "transitions": [
            {"from": 0, "to": 1, "rate": {"constant": 0.3}},
            {"from": 1, "to": 0, "rate": {"linear": {"intercept": 0.5, "slope": -0.02}}},
            {"from": 1, "to": 2, "rate": {"constant": 0.05}}
        ],
        "payments": {"sojourn": [{"state": 1, "amount": 1.0}]}
    }
}"#;

fn scenarios() -> Vec<(ModelConfig, State)> {
    let spouse = ModelConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/random_spouse.json")).unwrap();
    vec![
        (ModelConfig::from_json(DISCRETE).unwrap(), State::Discrete(0)),
        (ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03), State::Active),
        (spouse, State::Active),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reachable_states_satisfy_their_invariants(seed in any::<u64>(), kind in 0usize..3, start in 0.0f64..0.9) {
        let (cfg, x0) = scenarios().swap_remove(kind);
        let scenario = cfg.build().unwrap();
        let t0 = cfg.t_start + start * (cfg.horizon_end - cfg.t_start);
        for path in scenario.sample_paths(&x0, t0, 200, seed).unwrap() {
            prop_assert_eq!(path.states.len(), path.jump_times.len() + 1);
            prop_assert!(path.jump_times.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(path.jump_times.iter().all(|&j| j > t0 && j <= cfg.horizon_end));
            for (k, s) in path.states.iter().enumerate() {
                let entered = if k == 0 { t0 } else { path.jump_times[k - 1] };
                prop_assert!(s.check(Some(entered)).is_ok(), "{} entered at {}", s, entered);
                if k > 0 {
                    prop_assert_ne!(*s, path.states[k - 1]);
                }
                if let State::Disabled { onset } = s {
                    if k > 0 {
                        prop_assert_eq!(*onset, entered);
                    }
                }
            }
            prop_assert!(path.pv.is_finite() && path.pv >= 0.0);
        }
    }
}

#[test]
fn onset_reserve_within_three_standard_errors() {
    let scenario = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 360.0, 0.03).build().unwrap();
    let x = State::Disabled { onset: 30.0 };
    let ode = scenario.reserves_at(&[(x, 30.0)]).unwrap()[0];
    let mc = scenario.simulate(&x, 30.0, 100_000, 4_242, 1.0).unwrap();
    assert!(mc.z_score(ode).abs() < 3.0, "ODE {ode} vs {mc:?}");
}

#[test]
fn spouse_reserve_agrees_with_simulation() {
    let m = spouse_instance();
    let d = Discount::constant(0.02);
    let grid = TimeGrid::new(40.0, 90.0, 1.0 / 120.0).unwrap();
    let ode = solve_spouse_reserves(&m, &d, &grid).unwrap();
    let pay = m.payments();
    let sim = Simulator::new(&m, &pay, &d, 40.0, 90.0, 1.0 / 480.0).unwrap();
    for (x, t) in [(State::Active, 40.0), (State::Active, 65.0), (State::DeadWithSpouse { age_diff: 3.0 }, 70.0)] {
        let v = ode.lookup(&x, t).unwrap();
        let mc = simulate_pv(&sim, &x, t, 200_000, 77).unwrap();
        assert!(mc.z_score(v).abs() < 4.0, "{x} at {t}: ODE {v} vs {mc:?}");
    }
}

#[test]
fn estimate_does_not_depend_on_thread_count() {
    let scenario = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03).build().unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scenario.simulate(&State::Active, 30.0, 20_000, 5, 1.0).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn path_dump_lists_every_visited_state() {
    let scenario = ModelConfig::standard_disability(30.0, 67.0, 1.0 / 12.0, 0.03).build().unwrap();
    let paths = scenario.sample_paths(&State::Active, 30.0, 50, 3).unwrap();
    let mut buf = Vec::new();
    write_paths_csv(&paths, 30.0, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,index,time,state,pv"));
    let rows = paths.iter().map(|p| p.states.len()).sum::<usize>();
    assert_eq!(lines.count(), rows);
}
