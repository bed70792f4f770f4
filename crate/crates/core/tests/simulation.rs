use dutchbook::fixtures;
use dutchbook::rational::q;
use dutchbook::simulate::{compare_to_exact, run_rounds, SimError};
use dutchbook::{Distribution, SimConfig, SimMode, StateId};

fn fixed(s: usize, rounds: u64, seed: u64) -> SimConfig {
    SimConfig {
        rounds,
        seed,
        mode: SimMode::FixedState(StateId(s)),
    }
}

#[test]
fn uniform_agent_rejects_every_larry_gamble() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_uniform(&env);
    let g = fixtures::larry_book(&env);
    let r = run_rounds(&env, &mu, &g, &fixed(0, 2_000, 1)).unwrap();
    let st = &r.per_state[0];
    assert_eq!(st.count, 2_000);
    assert_eq!(st.exact_expectation, q(0, 1));
    assert_eq!(st.empirical_mean, Some(q(0, 1)));
    assert_eq!(st.ungated_expectation, q(-1, 3));
    assert!(compare_to_exact(&r).iter().all(|d| !d.flagged));
}

#[test]
fn same_seed_same_report() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let a = run_rounds(&env, &mu, &g, &fixed(1, 3_000, 42)).unwrap();
    let b = run_rounds(&env, &mu, &g, &fixed(1, 3_000, 42)).unwrap();
    let c = run_rounds(&env, &mu, &g, &fixed(1, 3_000, 43)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.counts, c.counts);
}

#[test]
fn empirical_mean_matches_counts() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let r = run_rounds(&env, &mu, &g, &fixed(2, 10_000, 3)).unwrap();
    // state pa: paths pa (0), mp (+9), ps (-10)
    let counts = &r.counts[2];
    let leaf = |name: &str| env.forest().path_index_of_leaf(env.forest().id(name).unwrap()).unwrap();
    let total: u64 = counts.iter().sum();
    let sum = 9 * counts[leaf("mp")] as i64 - 10 * counts[leaf("ps")] as i64;
    assert_eq!(r.per_state[2].empirical_mean, Some(q(sum, total as i64)));
}

#[test]
fn prior_mode_draws_states_in_proportion() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let prior = Distribution::new(vec![q(1, 2), q(1, 4), q(1, 4)]).unwrap();
    let rounds = 40_000u64;
    let cfg = SimConfig {
        rounds,
        seed: 8,
        mode: SimMode::Prior(prior.clone()),
    };
    let r = run_rounds(&env, &mu, &g, &cfg).unwrap();
    for (s, st) in r.per_state.iter().enumerate() {
        let p = prior.mass(s).to_f64();
        let sd = (rounds as f64 * p * (1.0 - p)).sqrt();
        assert!((st.count as f64 - rounds as f64 * p).abs() < 4.0 * sd);
    }
}

#[test]
fn estimator_tightens_with_more_rounds() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let err = |rounds: u64| {
        (0..8u64)
            .map(|seed| {
                let r = run_rounds(&env, &mu, &g, &fixed(0, rounds, seed)).unwrap();
                (r.per_state[0].empirical_mean_f64.unwrap() + 1.0 / 3.0).abs()
            })
            .sum::<f64>()
            / 8.0
    };
    assert!(err(40_000) < err(400));
}

#[test]
fn zero_rounds_is_an_error() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    assert_eq!(run_rounds(&env, &mu, &g, &fixed(0, 0, 1)), Err(SimError::NoRounds));
}
