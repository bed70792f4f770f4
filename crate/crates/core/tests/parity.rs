use dutchbook::cps::{check_siniscalchi_with, lcps_to_cps_with, validate_complete_cps_with};
use dutchbook::dutchbook::classify_dutch_book_with;
use dutchbook::fixtures;
use dutchbook::generate::{random_accepted_system, random_beliefs, random_environment, random_lcps};
use dutchbook::odds::build_coherence_graph_with;
use dutchbook::simulate::run_rounds_with;
use dutchbook::{Distribution, Execution, Rational, SimConfig, SimMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BOTH: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

#[test]
fn graph_and_book_verdicts_match_across_executions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let env = random_environment(&mut rng, 5, 8, 12);
        let mu = random_beliefs(&mut rng, &env, 12);
        let g = random_accepted_system(&mut rng, &env, &mu);
        let [a, b] = BOTH.map(|e| build_coherence_graph_with(&env, &mu, e));
        assert_eq!(a, b);
        let [a, b] = BOTH.map(|e| classify_dutch_book_with(&env, &g, e));
        assert_eq!(a, b);
    }
}

#[test]
fn cps_results_match_across_executions() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=6 {
        let lcps = random_lcps(&mut rng, n, 12);
        let [a, b] = BOTH.map(|e| lcps_to_cps_with(&lcps, e).unwrap());
        assert_eq!(a, b);
        let [x, y] = BOTH.map(|e| validate_complete_cps_with(&a, e));
        assert_eq!(x, y);
        assert!(x.is_ok());
    }
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let [a, b] = BOTH.map(|e| check_siniscalchi_with(&env, &mu, 6, e));
    assert_eq!(a, b);
}

#[test]
fn simulation_is_schedule_independent() {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let cfg = SimConfig {
        rounds: 20_000,
        seed: 5,
        mode: SimMode::Prior(Distribution::from_weights(vec![Rational::one(); 3]).unwrap()),
    };
    let [a, b] = BOTH.map(|e| run_rounds_with(&env, &mu, &g, &cfg, e).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.counts.iter().flatten().sum::<u64>(), 20_000);
}
