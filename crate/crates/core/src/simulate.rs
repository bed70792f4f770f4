//! Monte Carlo audit of a gamble system: sample a state and a learning path
//! each round, collect every accepted gamble along the path, and compare the
//! empirical mean with the exact expectation.
//!
//! Round `i` draws from `ChaCha8Rng` seeded with `seed` on stream `i`, so
//! results do not depend on how rounds are spread over threads. A round is
//! fully described by its (state, path) pair; the simulator keeps only the
//! count table and evaluates all statistics exactly from it.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dutchbook::{accepts_system, GambleError, GambleSystem};
use crate::model::{BeliefSystem, Distribution, LearningEnvironment, StateId};
use crate::par::{self, Execution};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimMode {
    FixedState(StateId),
    /// States drawn from a prior each round.
    Prior(Distribution),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub rounds: u64,
    pub seed: u64,
    pub mode: SimMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("at least one round is required")]
    NoRounds,
    #[error("state index {0} is out of range")]
    UnknownState(usize),
    #[error("prior has {got} entries, expected {expected}")]
    PriorDimension { got: usize, expected: usize },
    #[error(transparent)]
    Gamble(#[from] GambleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateReport {
    pub state: StateId,
    pub count: u64,
    /// Mean accepted payoff per round; `None` when the state never occurred.
    pub empirical_mean: Option<Rational>,
    pub empirical_mean_f64: Option<f64>,
    /// Σ_h p(h|s)·g(s|h) over accepted gambles.
    pub exact_expectation: Rational,
    /// Same quantities as if every gamble were taken.
    pub ungated_empirical_mean: Option<Rational>,
    pub ungated_expectation: Rational,
    /// Sample standard deviation of the per-round payoff; needs two rounds.
    pub sample_std_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub rounds: u64,
    pub seed: u64,
    pub per_state: Vec<StateReport>,
    /// `counts[s][path]`.
    pub counts: Vec<Vec<u64>>,
}

enum Sampler {
    /// Cumulative integer thresholds over a common denominator.
    Exact { cumulative: Vec<u64>, total: u64 },
    Float(WeightedIndex<f64>),
}

impl Sampler {
    fn new(masses: &[Rational]) -> Sampler {
        let lcm = masses
            .iter()
            .fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
        if let Some(total) = lcm.to_u64() {
            let mut cumulative = Vec::with_capacity(masses.len());
            let mut acc = 0u64;
            for m in masses {
                let w = (m.numer() * (&lcm / m.denom())).to_u64().expect("bounded by the total");
                acc += w;
                cumulative.push(acc);
            }
            debug_assert_eq!(acc, total);
            Sampler::Exact { cumulative, total }
        } else {
            let weights = masses.iter().map(Rational::to_f64);
            Sampler::Float(WeightedIndex::new(weights).expect("a distribution has positive mass"))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            Sampler::Exact { cumulative, total } => {
                let x = rng.random_range(0..*total);
                cumulative.partition_point(|&c| c <= x)
            }
            Sampler::Float(w) => w.sample(rng),
        }
    }
}

/// The accepted and the full payoff along every (state, path).
struct PayoffTable {
    gated: Vec<Vec<Rational>>,
    ungated: Vec<Vec<Rational>>,
}

fn payoff_table(env: &LearningEnvironment, accepted: &[bool], g: &GambleSystem) -> PayoffTable {
    let paths = env.forest().paths();
    let along = |s: StateId, gate: bool| -> Vec<Rational> {
        paths
            .iter()
            .map(|p| {
                p.chain
                    .iter()
                    .filter(|h| !gate || accepted[h.0])
                    .map(|&h| g.payoff(h, s))
                    .sum()
            })
            .collect()
    };
    PayoffTable {
        gated: env.states().ids().map(|s| along(s, true)).collect(),
        ungated: env.states().ids().map(|s| along(s, false)).collect(),
    }
}

/// Σ_h p(h|s)·g(s|h), restricted to accepted contingencies when `accepted`
/// is given.
pub fn exact_expectation(env: &LearningEnvironment, g: &GambleSystem, s: StateId, accepted: Option<&[bool]>) -> Rational {
    env.forest()
        .ids()
        .filter(|&h| env.is_consistent(h, s) && accepted.is_none_or(|a| a[h.0]))
        .map(|h| env.reach(h, s) * g.payoff(h, s))
        .sum()
}

/// The same expectation computed path by path: Σ_l η^s(l)·(payoff along l).
pub fn exact_expectation_by_paths(env: &LearningEnvironment, g: &GambleSystem, s: StateId, accepted: Option<&[bool]>) -> Rational {
    env.consistent_paths(s)
        .iter()
        .map(|&l| {
            let along: Rational = env.forest().paths()[l]
                .chain
                .iter()
                .filter(|h| accepted.is_none_or(|a| a[h.0]))
                .map(|&h| g.payoff(h, s))
                .sum();
            env.eta(s, l) * along
        })
        .sum()
}

pub fn run_rounds(env: &LearningEnvironment, mu: &BeliefSystem, g: &GambleSystem, cfg: &SimConfig) -> Result<SimReport, SimError> {
    run_rounds_with(env, mu, g, cfg, Execution::default())
}

pub fn run_rounds_with(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    g: &GambleSystem,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<SimReport, SimError> {
    if cfg.rounds == 0 {
        return Err(SimError::NoRounds);
    }
    let n = env.num_states();
    let state_sampler = match &cfg.mode {
        SimMode::FixedState(s) if s.0 >= n => return Err(SimError::UnknownState(s.0)),
        SimMode::FixedState(s) => Err(*s),
        SimMode::Prior(p) if p.len() != n => {
            return Err(SimError::PriorDimension {
                got: p.len(),
                expected: n,
            })
        }
        SimMode::Prior(p) => Ok(Sampler::new(p.masses())),
    };
    let acceptance = accepts_system(env, mu, g)?;
    let accepted: Vec<bool> = acceptance.per_contingency.iter().map(|c| c.accepted).collect();
    let path_samplers: Vec<Sampler> = env.states().ids().map(|s| Sampler::new(env.eta_row(s))).collect();
    let num_paths = env.forest().paths().len();

    let flat = par::fold_range(
        exec,
        cfg.rounds,
        4096,
        || vec![0u64; n * num_paths],
        |acc, round| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(round);
            let s = match &state_sampler {
                Err(s) => s.0,
                Ok(sampler) => sampler.sample(&mut rng),
            };
            let l = path_samplers[s].sample(&mut rng);
            acc[s * num_paths + l] += 1;
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    );
    let counts: Vec<Vec<u64>> = flat.chunks(num_paths.max(1)).map(<[u64]>::to_vec).collect();
    let table = payoff_table(env, &accepted, g);

    let per_state = env
        .states()
        .ids()
        .map(|s| {
            let row = &counts[s.0];
            let count: u64 = row.iter().sum();
            let mean_of = |values: &[Rational]| -> Option<Rational> {
                (count > 0).then(|| {
                    let total: Rational = row
                        .iter()
                        .zip(values)
                        .map(|(&c, v)| v * Rational::from_integer(c as i64))
                        .sum();
                    total / Rational::from_integer(count as i64)
                })
            };
            let empirical_mean = mean_of(&table.gated[s.0]);
            let sample_std_dev = (count >= 2).then(|| {
                let mean = empirical_mean.clone().expect("count is positive");
                let squares: Rational = row
                    .iter()
                    .zip(&table.gated[s.0])
                    .map(|(&c, v)| {
                        let d = v - &mean;
                        &d * &d * Rational::from_integer(c as i64)
                    })
                    .sum();
                (squares / Rational::from_integer(count as i64 - 1)).to_f64().sqrt()
            });
            StateReport {
                state: s,
                count,
                empirical_mean_f64: empirical_mean.as_ref().map(Rational::to_f64),
                empirical_mean,
                exact_expectation: exact_expectation(env, g, s, Some(&accepted)),
                ungated_empirical_mean: mean_of(&table.ungated[s.0]),
                ungated_expectation: exact_expectation(env, g, s, None),
                sample_std_dev,
            }
        })
        .collect();

    Ok(SimReport {
        rounds: cfg.rounds,
        seed: cfg.seed,
        per_state,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub state: StateId,
    /// |mean − exact| in standard errors; infinite when the sample has no
    /// spread but misses the exact value.
    pub standard_errors: f64,
    pub flagged: bool,
}

pub const FLAG_THRESHOLD: f64 = 4.0;

/// Deviations for every state observed at least twice.
pub fn compare_to_exact(report: &SimReport) -> Vec<Deviation> {
    report
        .per_state
        .iter()
        .filter(|r| r.count >= 2)
        .map(|r| {
            let mean = r.empirical_mean.as_ref().expect("count is positive");
            let sd = r.sample_std_dev.expect("count is at least two");
            let standard_errors = if sd == 0.0 {
                if *mean == r.exact_expectation {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (mean - &r.exact_expectation).abs().to_f64() / (sd / (r.count as f64).sqrt())
            };
            Deviation {
                state: r.state,
                standard_errors,
                flagged: standard_errors > FLAG_THRESHOLD,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::q;

    fn cfg(rounds: u64, seed: u64, s: usize) -> SimConfig {
        SimConfig {
            rounds,
            seed,
            mode: SimMode::FixedState(StateId(s)),
        }
    }

    #[test]
    fn larry_loses_a_third_per_round() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let book = fixtures::larry_book(&env);
        let report = run_rounds(&env, &mu, &book, &cfg(20_000, 7, 0)).unwrap();
        let sq = &report.per_state[0];
        assert_eq!(sq.count, 20_000);
        assert_eq!(sq.exact_expectation, q(-1, 3));
        assert!(compare_to_exact(&report).iter().all(|d| !d.flagged));
    }

    #[test]
    fn modes_and_reruns_are_identical() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let book = fixtures::larry_book(&env);
        let prior = SimConfig {
            rounds: 9_999,
            seed: 42,
            mode: SimMode::Prior(Distribution::new(vec![q(1, 2), q(1, 3), q(1, 6)]).unwrap()),
        };
        let a = run_rounds_with(&env, &mu, &book, &prior, Execution::Sequential).unwrap();
        let b = run_rounds_with(&env, &mu, &book, &prior, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_state.iter().map(|r| r.count).sum::<u64>(), 9_999);
        assert_eq!(a, run_rounds(&env, &mu, &book, &prior).unwrap());
    }

    #[test]
    fn zero_book_pays_nothing() {
        let env = fixtures::env_larry();
        let report = run_rounds(&env, &fixtures::bel_regret(&env), &GambleSystem::zero(&env), &cfg(500, 1, 1)).unwrap();
        let r = &report.per_state[1];
        assert_eq!(r.empirical_mean, Some(q(0, 1)));
        assert_eq!(r.sample_std_dev, Some(0.0));
        assert_eq!(compare_to_exact(&report)[0].standard_errors, 0.0);
    }

    #[test]
    fn consistent_agent_rejects_everything() {
        let env = fixtures::env_larry();
        let book = fixtures::larry_book(&env);
        let report = run_rounds(&env, &fixtures::bel_uniform(&env), &book, &cfg(1_000, 3, 0)).unwrap();
        let r = &report.per_state[0];
        assert_eq!(r.empirical_mean, Some(q(0, 1)));
        assert_eq!(r.exact_expectation, q(0, 1));
        assert_eq!(r.ungated_expectation, q(-1, 3));
    }

    #[test]
    fn mismatched_expectation_is_flagged() {
        let env = fixtures::env_larry();
        let mut report = run_rounds(&env, &fixtures::bel_regret(&env), &fixtures::larry_book(&env), &cfg(5_000, 9, 2)).unwrap();
        report.per_state[2].exact_expectation = q(1, 1);
        assert!(compare_to_exact(&report)[0].flagged);
    }

    #[test]
    fn path_enumeration_agrees() {
        let env = fixtures::env_nested();
        let mu = fixtures::bel_drift(&env);
        let book = crate::dutchbook::synthesize_deterministic_db(&env, &mu, &Default::default()).unwrap();
        let accepted: Vec<bool> = book.acceptance.per_contingency.iter().map(|c| c.accepted).collect();
        for s in env.states().ids() {
            assert_eq!(
                exact_expectation(&env, &book.gambles, s, Some(&accepted)),
                exact_expectation_by_paths(&env, &book.gambles, s, Some(&accepted))
            );
        }
    }

    #[test]
    fn config_errors() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let g = GambleSystem::zero(&env);
        assert_eq!(run_rounds(&env, &mu, &g, &cfg(0, 1, 0)), Err(SimError::NoRounds));
        assert_eq!(run_rounds(&env, &mu, &g, &cfg(1, 1, 9)), Err(SimError::UnknownState(9)));
    }

    #[test]
    fn float_fallback_samples_valid_indices() {
        let huge = Rational::from_big(BigInt::one(), BigInt::from(u64::MAX) * 3);
        let masses = vec![huge.clone(), Rational::one() - huge];
        let sampler = Sampler::new(&masses);
        assert!(matches!(sampler, Sampler::Float(_)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| sampler.sample(&mut rng) < 2));
    }
}
