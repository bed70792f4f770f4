//! Random instances for property tests, the acceptance suite and benches.
//!
//! All masses are exact rationals with small denominators: a distribution
//! over `k` outcomes is drawn as a random composition of a denominator
//! `d ≤ max_den` into `k` positive parts.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::consistency::{check_complete_consistency, Lcps};
use crate::dutchbook::{expected_payoff, is_willing_to_accept, Gamble, GambleSystem};
use crate::model::{BeliefSystem, ContingencyForest, Distribution, LearningEnvironment, NodeId, StateId, StateSpace};
use crate::rational::Rational;

/// `k` positive masses with a common denominator at most `max_den`.
/// Requires `1 ≤ k ≤ max_den`.
pub fn random_masses<R: Rng + ?Sized>(rng: &mut R, k: usize, max_den: i64) -> Vec<Rational> {
    assert!(k >= 1 && k as i64 <= max_den);
    let d = rng.random_range(k as i64..=max_den);
    // k − 1 distinct cut points in 1..d
    let mut cuts: Vec<i64> = (1..d).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<i64> = cuts.into_iter().take(k - 1).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(k);
    for c in cuts.into_iter().chain(std::iter::once(d)) {
        out.push(Rational::new(c - prev, d));
        prev = c;
    }
    out
}

/// A distribution over `len` indices, positive exactly on `support`.
pub fn random_distribution_on<R: Rng + ?Sized>(rng: &mut R, len: usize, support: &[usize], max_den: i64) -> Distribution {
    let masses = random_masses(rng, support.len(), max_den);
    let mut out = vec![Rational::zero(); len];
    for (&i, m) in support.iter().zip(masses) {
        out[i] = m;
    }
    Distribution::new(out).expect("masses sum to one")
}

fn state_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

fn random_forest<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ContingencyForest {
    let nodes = (0..k).map(|i| {
        let parent = if i == 0 || rng.random_bool(0.35) {
            None
        } else {
            Some(format!("h{}", rng.random_range(0..i)))
        };
        (format!("h{i}"), parent)
    });
    ContingencyForest::new(nodes.collect::<Vec<_>>()).expect("parents precede children")
}

/// Builds eta from per-state path supports, covering every path.
fn environment_from_supports<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    forest: ContingencyForest,
    mut supports: Vec<Vec<usize>>,
    max_den: i64,
) -> LearningEnvironment {
    let num_paths = forest.paths().len();
    for l in 0..num_paths {
        if !supports.iter().any(|s| s.contains(&l)) {
            let s = rng.random_range(0..n);
            supports[s].push(l);
        }
    }
    let eta = supports
        .iter()
        .map(|sup| {
            let mut sup = sup.clone();
            sup.sort_unstable();
            sup.dedup();
            random_distribution_on(rng, num_paths, &sup, max_den.max(sup.len() as i64)).masses().to_vec()
        })
        .collect();
    let states = StateSpace::new(state_names(n)).expect("distinct names");
    LearningEnvironment::build(states, forest, eta).expect("every path is covered")
}

/// A random environment with `1..=max_states` states and
/// `1..=max_contingencies` contingencies.
pub fn random_environment<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_contingencies: usize,
    max_den: i64,
) -> LearningEnvironment {
    let n = rng.random_range(1..=max_states);
    let k = rng.random_range(1..=max_contingencies);
    let forest = random_forest(rng, k);
    let num_paths = forest.paths().len();
    let supports = (0..n)
        .map(|_| {
            let size = rng.random_range(1..=num_paths.min(3).min(max_den as usize));
            let mut all: Vec<usize> = (0..num_paths).collect();
            all.shuffle(rng);
            all.truncate(size);
            all
        })
        .collect();
    environment_from_supports(rng, n, forest, supports, max_den)
}

/// An environment where every state follows at most one path per tree, so
/// continuation below any contingency is deterministic.
pub fn random_filtration_environment<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_contingencies: usize,
    max_den: i64,
) -> LearningEnvironment {
    let n = rng.random_range(1..=max_states);
    let k = rng.random_range(1..=max_contingencies);
    let forest = random_forest(rng, k);
    let tree_of_path: Vec<NodeId> = forest.paths().iter().map(|p| p.chain[0]).collect();
    let roots = forest.roots().to_vec();
    let supports = (0..n)
        .map(|_| {
            let mut chosen = Vec::new();
            for &r in &roots {
                if chosen.is_empty() || rng.random_bool(0.5) {
                    let candidates: Vec<usize> = (0..tree_of_path.len()).filter(|&l| tree_of_path[l] == r).collect();
                    chosen.push(candidates[rng.random_range(0..candidates.len())]);
                }
            }
            chosen
        })
        .collect::<Vec<_>>();
    // covering a leaf must not give a state a second path in the same tree
    let mut supports = supports;
    for l in 0..tree_of_path.len() {
        if supports.iter().any(|s| s.contains(&l)) {
            continue;
        }
        let s = rng.random_range(0..n);
        supports[s].retain(|&m| tree_of_path[m] != tree_of_path[l]);
        supports[s].push(l);
    }
    // the retain above may uncover another leaf; add fresh states for those
    let mut names = n;
    loop {
        let uncovered: Vec<usize> = (0..tree_of_path.len()).filter(|l| !supports.iter().any(|s| s.contains(l))).collect();
        let Some(&l) = uncovered.first() else { break };
        supports.push(vec![l]);
        names += 1;
    }
    let env = environment_from_supports(rng, names, forest, supports, max_den);
    debug_assert!(env.has_deterministic_continuation());
    env
}

/// A random LCPS with full support, one to three levels.
pub fn random_lcps<R: Rng + ?Sized>(rng: &mut R, n: usize, max_den: i64) -> Lcps {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let num_levels = rng.random_range(1..=n.min(3));
    // cut the shuffled states into num_levels nonempty blocks
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(num_levels - 1).collect();
    cuts.sort_unstable();
    let mut levels = Vec::new();
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        let mut block = order[prev..c].to_vec();
        block.sort_unstable();
        levels.push(random_distribution_on(rng, n, &block, max_den));
        prev = c;
    }
    Lcps::new(levels).expect("blocks partition the states")
}

/// Beliefs supported on S(h), with support a random nonempty subset.
pub fn random_beliefs<R: Rng + ?Sized>(rng: &mut R, env: &LearningEnvironment, max_den: i64) -> BeliefSystem {
    BeliefSystem::new(
        env.forest()
            .ids()
            .map(|h| random_belief_at(rng, env, h, max_den))
            .collect(),
    )
}

fn random_belief_at<R: Rng + ?Sized>(rng: &mut R, env: &LearningEnvironment, h: NodeId, max_den: i64) -> Distribution {
    let mut support: Vec<usize> = env.consistent_states(h).iter().map(|s| s.0).collect();
    support.shuffle(rng);
    let size = rng.random_range(1..=support.len());
    support.truncate(size);
    support.sort_unstable();
    random_distribution_on(rng, env.num_states(), &support, max_den)
}

/// Replaces beliefs at random contingencies until the system is no longer
/// completely consistent; `None` when `attempts` tries all stay consistent.
pub fn perturb_to_inconsistent<R: Rng + ?Sized>(
    rng: &mut R,
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    max_den: i64,
    attempts: usize,
) -> Option<BeliefSystem> {
    let candidates: Vec<NodeId> = env.forest().ids().filter(|&h| env.consistent_states(h).len() >= 2).collect();
    if candidates.is_empty() {
        return None;
    }
    let mut rows = mu.beliefs().to_vec();
    for _ in 0..attempts {
        let h = candidates[rng.random_range(0..candidates.len())];
        rows[h.0] = random_belief_at(rng, env, h, max_den);
        let perturbed = BeliefSystem::new(rows.clone());
        if !check_complete_consistency(env, &perturbed).ok()?.is_consistent() {
            return Some(perturbed);
        }
    }
    None
}

/// Payoffs in `[−10, 10]` with denominators at most 16 on S(h), then repaired
/// so that the agent accepts: the positive part (over states the agent
/// deems possible) is rescaled to cancel or exceed the negative part.
pub fn random_accepted_gamble<R: Rng + ?Sized>(rng: &mut R, env: &LearningEnvironment, nu: &Distribution, h: NodeId) -> Gamble {
    let mut payoffs = vec![Rational::zero(); env.num_states()];
    for &s in env.consistent_states(h) {
        let d = rng.random_range(1..=16i64);
        payoffs[s.0] = Rational::new(rng.random_range(-10 * d..=10 * d), d);
    }
    let mut gamble = Gamble::new(payoffs);
    if is_willing_to_accept(nu, &gamble) {
        return gamble;
    }
    let part = |g: &Gamble, positive: bool| -> Rational {
        (0..g.len())
            .filter(|&s| nu.mass(s).is_positive() && g.payoffs()[s].is_positive() == positive)
            .map(|s| nu.mass(s) * &g.payoffs()[s])
            .sum()
    };
    if !part(&gamble, true).is_positive() {
        gamble = Gamble::new(gamble.payoffs().iter().map(|x| -x).collect());
    }
    let positive = part(&gamble, true);
    let negative = part(&gamble, false);
    if positive.is_positive() && negative.is_negative() {
        let exact = -(&negative / &positive);
        let factor = if rng.random_bool(0.5) {
            exact
        } else {
            exact * Rational::new(rng.random_range(17..=32), 16)
        };
        let scaled = (0..gamble.len())
            .map(|s| {
                let x = &gamble.payoffs()[s];
                if nu.mass(s).is_positive() && x.is_positive() {
                    x * &factor
                } else {
                    x.clone()
                }
            })
            .collect();
        gamble = Gamble::new(scaled);
    }
    if expected_payoff(nu, &gamble).is_zero() {
        // a zero-expectation gamble is only taken without null-state losses
        let cleaned = (0..gamble.len())
            .map(|s| {
                let x = &gamble.payoffs()[s];
                if nu.mass(s).is_zero() && x.is_negative() {
                    Rational::zero()
                } else {
                    x.clone()
                }
            })
            .collect();
        gamble = Gamble::new(cleaned);
    }
    debug_assert!(is_willing_to_accept(nu, &gamble));
    gamble
}

/// One accepted gamble per contingency; about a quarter are zero.
pub fn random_accepted_system<R: Rng + ?Sized>(rng: &mut R, env: &LearningEnvironment, mu: &BeliefSystem) -> GambleSystem {
    GambleSystem::new(
        env.forest()
            .ids()
            .map(|h| {
                if rng.random_bool(0.25) {
                    Gamble::zero(env.num_states())
                } else {
                    random_accepted_gamble(rng, env, mu.belief(h), h)
                }
            })
            .collect(),
    )
}

/// μ(·|h) = prior conditioned on S(h), ignoring reach.
pub fn conditioning_beliefs(env: &LearningEnvironment, prior: &Distribution) -> BeliefSystem {
    BeliefSystem::new(
        env.forest()
            .ids()
            .map(|h| {
                prior
                    .condition(|s| env.is_consistent(h, StateId(s)))
                    .expect("a full-support prior charges every S(h)")
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::derive_beliefs;
    use crate::model::validate_belief_system;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn masses_respect_the_denominator_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.random_range(1..=6);
            let m = random_masses(&mut rng, k, 12);
            assert_eq!(m.len(), k);
            assert!(m.iter().all(|x| x.is_positive() && *x.denom() <= 12.into()));
            assert!(m.iter().sum::<Rational>().is_one());
        }
    }

    #[test]
    fn generated_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let env = random_environment(&mut rng, 6, 12, 12);
            assert!(env.num_states() <= 6 && env.num_contingencies() <= 12);
            let lcps = random_lcps(&mut rng, env.num_states(), 12);
            let mu = derive_beliefs(&env, &lcps).unwrap();
            assert_eq!(validate_belief_system(&env, &mu), Ok(()));
            validate_belief_system(&env, &random_beliefs(&mut rng, &env, 12)).unwrap();
            let filtration = random_filtration_environment(&mut rng, 5, 8, 12);
            assert!(filtration.has_deterministic_continuation());
            let g = random_accepted_system(&mut rng, &env, &mu);
            let report = crate::dutchbook::accepts_system(&env, &mu, &g).unwrap();
            assert!(report.accepts_all());
        }
    }
}
