//! Systems of gambles, acceptance with the null-state tie-break, Dutch-book
//! classification in expected and deterministic terms, and the two
//! constructive synthesizers.

use std::fmt;

use thiserror::Error;

use crate::consistency::{check_complete_consistency, forward_violations, CompleteConsistency, ConsistencyError};
use crate::model::{validate_belief_system, BeliefSystem, BeliefViolation, Distribution, LearningEnvironment, NodeId, StateId};
use crate::odds::{CoherenceViolation, ExtendedRatio};
use crate::par::{self, Execution};
use crate::rational::Rational;

/// Payoffs to the agent, one per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gamble {
    payoffs: Vec<Rational>,
}

impl Gamble {
    pub fn new(payoffs: Vec<Rational>) -> Self {
        Gamble { payoffs }
    }

    pub fn zero(num_states: usize) -> Self {
        Gamble {
            payoffs: vec![Rational::zero(); num_states],
        }
    }

    pub fn set(&mut self, s: StateId, value: Rational) {
        self.payoffs[s.0] = value;
    }

    pub fn add(&mut self, s: StateId, value: &Rational) {
        self.payoffs[s.0] += value;
    }

    pub fn payoff(&self, s: StateId) -> &Rational {
        &self.payoffs[s.0]
    }

    pub fn payoffs(&self) -> &[Rational] {
        &self.payoffs
    }

    pub fn len(&self) -> usize {
        self.payoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.payoffs.iter().all(Rational::is_zero)
    }
}

/// One gamble per contingency, indexed like the forest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GambleSystem {
    gambles: Vec<Gamble>,
}

impl GambleSystem {
    pub fn new(gambles: Vec<Gamble>) -> Self {
        GambleSystem { gambles }
    }

    pub fn zero(env: &LearningEnvironment) -> Self {
        GambleSystem {
            gambles: vec![Gamble::zero(env.num_states()); env.num_contingencies()],
        }
    }

    pub fn gamble(&self, h: NodeId) -> &Gamble {
        &self.gambles[h.0]
    }

    pub fn gamble_mut(&mut self, h: NodeId) -> &mut Gamble {
        &mut self.gambles[h.0]
    }

    pub fn gambles(&self) -> &[Gamble] {
        &self.gambles
    }

    /// g(s|h).
    pub fn payoff(&self, h: NodeId, s: StateId) -> &Rational {
        self.gambles[h.0].payoff(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GambleError {
    #[error("gamble system has {got} gambles, expected {expected}")]
    Count { got: usize, expected: usize },
    #[error("gamble at {h} has {got} payoffs, expected {expected}")]
    Dimension { h: String, got: usize, expected: usize },
    #[error("gamble at {h} pays {value} on state {state}, which is inconsistent with it")]
    Support { h: String, state: String, value: Rational },
}

/// Shape check plus g(s|h) = 0 for every s ∉ S(h).
pub fn validate_gamble_system(env: &LearningEnvironment, g: &GambleSystem) -> Result<(), GambleError> {
    if g.gambles.len() != env.num_contingencies() {
        return Err(GambleError::Count {
            got: g.gambles.len(),
            expected: env.num_contingencies(),
        });
    }
    for h in env.forest().ids() {
        let gamble = g.gamble(h);
        if gamble.len() != env.num_states() {
            return Err(GambleError::Dimension {
                h: env.forest().name(h).into(),
                got: gamble.len(),
                expected: env.num_states(),
            });
        }
        for s in env.states().ids() {
            if !gamble.payoff(s).is_zero() && !env.is_consistent(h, s) {
                return Err(GambleError::Support {
                    h: env.forest().name(h).into(),
                    state: env.states().name(s).into(),
                    value: gamble.payoff(s).clone(),
                });
            }
        }
    }
    Ok(())
}

/// Σ ν(s)·γ(s).
pub fn expected_payoff(nu: &Distribution, gamble: &Gamble) -> Rational {
    nu.masses()
        .iter()
        .zip(gamble.payoffs())
        .map(|(m, x)| m * x)
        .sum()
}

/// Positive expectation, or zero expectation with no loss on a null state.
pub fn is_willing_to_accept(nu: &Distribution, gamble: &Gamble) -> bool {
    let e = expected_payoff(nu, gamble);
    if e.is_positive() {
        return true;
    }
    e.is_zero()
        && nu
            .masses()
            .iter()
            .zip(gamble.payoffs())
            .all(|(m, x)| !m.is_zero() || !x.is_negative())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyAcceptance {
    pub expectation: Rational,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptanceReport {
    pub per_contingency: Vec<ContingencyAcceptance>,
}

impl AcceptanceReport {
    pub fn accepts_all(&self) -> bool {
        self.per_contingency.iter().all(|c| c.accepted)
    }

    pub fn accepted(&self, h: NodeId) -> bool {
        self.per_contingency[h.0].accepted
    }
}

pub fn accepts_system(env: &LearningEnvironment, mu: &BeliefSystem, g: &GambleSystem) -> Result<AcceptanceReport, GambleError> {
    validate_gamble_system(env, g)?;
    Ok(acceptance(env, mu, g))
}

fn acceptance(env: &LearningEnvironment, mu: &BeliefSystem, g: &GambleSystem) -> AcceptanceReport {
    AcceptanceReport {
        per_contingency: env
            .forest()
            .ids()
            .map(|h| {
                let (nu, gamble) = (mu.belief(h), g.gamble(h));
                ContingencyAcceptance {
                    expectation: expected_payoff(nu, gamble),
                    accepted: is_willing_to_accept(nu, gamble),
                }
            })
            .collect(),
    }
}

/// Objective expected payoff per state, Σ_h p(h|s)·g(s|h).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BookVerdict {
    pub per_state: Vec<Rational>,
    pub is_dutch_book: bool,
}

fn all_nonpositive_some_negative<'a>(values: impl Iterator<Item = &'a Rational> + Clone) -> bool {
    values.clone().all(|v| !v.is_positive()) && values.into_iter().any(Rational::is_negative)
}

pub fn classify_dutch_book(env: &LearningEnvironment, g: &GambleSystem) -> BookVerdict {
    classify_dutch_book_with(env, g, Execution::default())
}

pub fn classify_dutch_book_with(env: &LearningEnvironment, g: &GambleSystem, exec: Execution) -> BookVerdict {
    let per_state = par::map_range(exec, env.num_states(), |s| {
        let s = StateId(s);
        env.forest()
            .ids()
            .filter(|&h| env.is_consistent(h, s))
            .map(|h| env.reach(h, s) * g.payoff(h, s))
            .sum::<Rational>()
    });
    let is_dutch_book = all_nonpositive_some_negative(per_state.iter());
    BookVerdict { per_state, is_dutch_book }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSum {
    pub state: StateId,
    /// Index into the forest's paths.
    pub path: usize,
    pub sum: Rational,
}

/// Realized payoff Σ_{h∈H(l)} g(s|h) along every possible (state, path).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicVerdict {
    pub per_path: Vec<PathSum>,
    pub is_deterministic: bool,
}

pub fn path_sum(env: &LearningEnvironment, g: &GambleSystem, s: StateId, path: usize) -> Rational {
    env.forest().paths()[path]
        .chain
        .iter()
        .map(|&h| g.payoff(h, s))
        .sum()
}

pub fn classify_deterministic(env: &LearningEnvironment, g: &GambleSystem) -> DeterministicVerdict {
    let per_path: Vec<PathSum> = env
        .states()
        .ids()
        .flat_map(|s| {
            env.consistent_paths(s).iter().map(move |&path| PathSum {
                state: s,
                path,
                sum: path_sum(env, g, s, path),
            })
        })
        .collect();
    let is_deterministic = all_nonpositive_some_negative(per_path.iter().map(|p| &p.sum));
    DeterministicVerdict { per_path, is_deterministic }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisParams {
    /// Starting ε; the synthesizer's natural scale when `None`.
    pub epsilon: Option<Rational>,
    pub shrink_factor: Rational,
    pub max_shrinks: u32,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            epsilon: None,
            shrink_factor: Rational::new(1, 2),
            max_shrinks: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Precondition {
    /// The beliefs are completely consistent.
    Consistent,
    /// The beliefs update by conditioning everywhere.
    ForwardConsistent,
    /// Every violating pair has infinite earlier odds.
    NoFiniteOrientation,
    InvalidParams(String),
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precondition::Consistent => write!(f, "beliefs are completely consistent"),
            Precondition::ForwardConsistent => write!(f, "beliefs are forward consistent"),
            Precondition::NoFiniteOrientation => {
                write!(f, "no violating state pair has finite odds at the earlier contingency")
            }
            Precondition::InvalidParams(m) => write!(f, "invalid parameters: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(Precondition),
    #[error("unsupported environment: some state reaches several children of a contingency")]
    UnsupportedEnvironment,
    #[error("belief system is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidBeliefs(Vec<BeliefViolation>),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<ConsistencyError> for SynthesisError {
    fn from(e: ConsistencyError) -> Self {
        match e {
            ConsistencyError::InvalidBeliefs(v) => SynthesisError::InvalidBeliefs(v),
            other => SynthesisError::Internal(other.to_string()),
        }
    }
}

/// A verified expected-terms Dutch book built along a violating cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesizedBook {
    pub gambles: GambleSystem,
    pub witness: CoherenceViolation,
    pub epsilon: Rational,
    pub shrinks: u32,
    pub acceptance: AcceptanceReport,
    pub verdict: BookVerdict,
    /// Anchor-state expected payoff of the ε = 0 book, −p(h¹|s)·(1−r).
    pub telescoping: Rational,
}

/// Gambles along the cycle `s⁰ → s¹ @h¹, …, sⁿ⁻¹ → sⁿ = s⁰ @hⁿ`.
fn cycle_book(env: &LearningEnvironment, mu: &BeliefSystem, witness: &CoherenceViolation, epsilon: &Rational) -> GambleSystem {
    let links = witness.cycle.links();
    let mut g = GambleSystem::zero(env);
    // g(s^{m-1}|h^m), g(s^m|h^m)
    let mut prev_to: Option<Rational> = None;
    for (m, link) in links.iter().enumerate() {
        let (h, from, to) = (link.h, link.from, link.to);
        let give = match &prev_to {
            None => Rational::from_integer(-1),
            Some(prev) => {
                let prev_h = links[m - 1].h;
                -(prev * env.reach(prev_h, from) / env.reach(h, from)) - epsilon
            }
        };
        let take = -(&give * mu.mass(h, from) / mu.mass(h, to)) + epsilon;
        g.gamble_mut(h).add(from, &give);
        g.gamble_mut(h).add(to, &take);
        prev_to = Some(take);
    }
    g
}

fn product_value(r: &ExtendedRatio) -> Option<Rational> {
    match r {
        ExtendedRatio::Zero => Some(Rational::zero()),
        ExtendedRatio::Finite(v) => Some(v.clone()),
        ExtendedRatio::Infinite => None,
    }
}

/// Builds and verifies a Dutch book from a coherence violation.
pub fn synthesize_from_witness(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    witness: &CoherenceViolation,
    params: &SynthesisParams,
) -> Result<SynthesizedBook, SynthesisError> {
    let r = product_value(&witness.product)
        .filter(|r| *r < 1)
        .ok_or_else(|| SynthesisError::Internal(format!("witness product {} is not below one", witness.product)))?;
    if witness.cycle.links().iter().any(|l| mu.mass(l.h, l.to).is_zero()) {
        return Err(SynthesisError::Internal("witness cycle has an infinite link".into()));
    }
    let anchor = witness.cycle.start();
    let h1 = witness.cycle.links()[0].h;

    let flat = cycle_book(env, mu, witness, &Rational::zero());
    let telescoping = classify_dutch_book(env, &flat).per_state[anchor.0].clone();
    let expected = -(env.reach(h1, anchor) * (Rational::one() - &r));
    if telescoping != expected {
        return Err(SynthesisError::Internal(format!(
            "telescoping identity fails: {telescoping} != {expected}"
        )));
    }

    let mut epsilon = match &params.epsilon {
        Some(e) if e.is_positive() => e.clone(),
        Some(e) => {
            return Err(SynthesisError::PreconditionViolation(Precondition::InvalidParams(format!(
                "epsilon must be positive, got {e}"
            ))))
        }
        None => Rational::one(),
    };
    for shrinks in 0..=params.max_shrinks {
        let gambles = cycle_book(env, mu, witness, &epsilon);
        let acceptance = acceptance(env, mu, &gambles);
        let verdict = classify_dutch_book(env, &gambles);
        if acceptance.accepts_all() && verdict.is_dutch_book {
            return Ok(SynthesizedBook {
                gambles,
                witness: witness.clone(),
                epsilon,
                shrinks,
                acceptance,
                verdict,
                telescoping,
            });
        }
        epsilon = epsilon * &params.shrink_factor;
    }
    Err(SynthesisError::Internal(format!(
        "no verified book after {} shrinks",
        params.max_shrinks
    )))
}

/// A Dutch book the agent accepts, for beliefs that are not completely
/// consistent.
pub fn synthesize_dutch_book(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    params: &SynthesisParams,
) -> Result<SynthesizedBook, SynthesisError> {
    match check_complete_consistency(env, mu)? {
        CompleteConsistency::Consistent { .. } => Err(SynthesisError::PreconditionViolation(Precondition::Consistent)),
        CompleteConsistency::Inconsistent(witness) => synthesize_from_witness(env, mu, &witness, params),
    }
}

/// Which payoff on `s` at `h′` was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterministicVariant {
    /// g(s|h′) = −1 − yε/4.
    Printed,
    /// g(s|h′) = −1 − ε/(4y); accepted for every y > 0.
    Rescaled,
}

impl fmt::Display for DeterministicVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeterministicVariant::Printed => write!(f, "printed"),
            DeterministicVariant::Rescaled => write!(f, "rescaled"),
        }
    }
}

/// A verified deterministic Dutch book on two nested contingencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicBook {
    pub gambles: GambleSystem,
    pub h: NodeId,
    pub h_prime: NodeId,
    pub s: StateId,
    pub s_prime: StateId,
    /// μ(s|h)/μ(s′|h).
    pub x: Rational,
    /// μ(s|h′)/μ(s′|h′).
    pub y: Rational,
    pub epsilon: Rational,
    pub variant: DeterministicVariant,
    pub acceptance: AcceptanceReport,
    pub verdict: DeterministicVerdict,
}

struct OddsPair {
    h: NodeId,
    h_prime: NodeId,
    s: StateId,
    s_prime: StateId,
    x: Rational,
    y: Rational,
}

fn choose_pair(env: &LearningEnvironment, mu: &BeliefSystem) -> Result<OddsPair, SynthesisError> {
    let violations = forward_violations(env, mu);
    if violations.is_empty() {
        return Err(SynthesisError::PreconditionViolation(Precondition::ForwardConsistent));
    }
    let mut seen = Vec::new();
    for v in &violations {
        if seen.contains(&(v.h, v.h_prime)) {
            continue;
        }
        seen.push((v.h, v.h_prime));
        let (h, h_prime) = (v.h, v.h_prime);
        let states = env.consistent_states(h_prime);
        for &s in states {
            for &s_prime in states {
                if s == s_prime || mu.mass(h, s_prime).is_zero() || mu.mass(h_prime, s_prime).is_zero() {
                    continue;
                }
                let x = mu.mass(h, s) / mu.mass(h, s_prime);
                let y = mu.mass(h_prime, s) / mu.mass(h_prime, s_prime);
                if x > y {
                    return Ok(OddsPair { h, h_prime, s, s_prime, x, y });
                }
            }
        }
    }
    Err(SynthesisError::PreconditionViolation(Precondition::NoFiniteOrientation))
}

fn two_step_book(env: &LearningEnvironment, pair: &OddsPair, epsilon: &Rational, variant: DeterministicVariant) -> GambleSystem {
    let third = Rational::new(1, 3);
    let quarter = Rational::new(1, 4);
    let mut g = GambleSystem::zero(env);
    let one = Rational::one();
    g.gamble_mut(pair.h).set(pair.s, one.clone());
    g.gamble_mut(pair.h).set(pair.s_prime, -&pair.x + epsilon * &third);
    let bump = match variant {
        DeterministicVariant::Printed => &pair.y * epsilon * &quarter,
        DeterministicVariant::Rescaled => epsilon * &quarter / &pair.y,
    };
    g.gamble_mut(pair.h_prime).set(pair.s, -one - bump);
    g.gamble_mut(pair.h_prime).set(pair.s_prime, &pair.y + epsilon * &third);
    g
}

/// A deterministic Dutch book the agent accepts, for beliefs that fail
/// conditioning somewhere.
pub fn synthesize_deterministic_db(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    params: &SynthesisParams,
) -> Result<DeterministicBook, SynthesisError> {
    validate_belief_system(env, mu).map_err(SynthesisError::InvalidBeliefs)?;
    if !env.has_deterministic_continuation() {
        return Err(SynthesisError::UnsupportedEnvironment);
    }
    let pair = choose_pair(env, mu)?;
    let gap = &pair.x - &pair.y;
    let start = match &params.epsilon {
        Some(e) if e.is_positive() && *e < gap => e.clone(),
        _ => gap * Rational::new(1, 2),
    };
    let mut variants = vec![DeterministicVariant::Printed];
    if pair.y.is_positive() {
        variants.push(DeterministicVariant::Rescaled);
    }
    for variant in variants {
        let mut epsilon = start.clone();
        for _ in 0..=params.max_shrinks {
            let gambles = two_step_book(env, &pair, &epsilon, variant);
            let acceptance = acceptance(env, mu, &gambles);
            let verdict = classify_deterministic(env, &gambles);
            if acceptance.accepts_all() && verdict.is_deterministic {
                return Ok(DeterministicBook {
                    gambles,
                    h: pair.h,
                    h_prime: pair.h_prime,
                    s: pair.s,
                    s_prime: pair.s_prime,
                    x: pair.x,
                    y: pair.y,
                    epsilon,
                    variant,
                    acceptance,
                    verdict,
                });
            }
            epsilon = epsilon * &params.shrink_factor;
        }
    }
    Err(SynthesisError::Internal("no verified deterministic book".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Distribution;
    use crate::rational::q;

    fn dist(m: &[Rational]) -> Distribution {
        Distribution::new(m.to_vec()).unwrap()
    }

    fn gamble(m: &[i64]) -> Gamble {
        Gamble::new(m.iter().map(|&v| Rational::from_integer(v)).collect())
    }

    #[test]
    fn expectations_and_tie_break() {
        let nu = dist(&[q(3, 4), q(1, 4), q(0, 1)]);
        assert_eq!(expected_payoff(&nu, &gamble(&[9, -10, 0])), q(17, 4));
        assert!(is_willing_to_accept(&nu, &gamble(&[9, -10, 0])));
        assert_eq!(expected_payoff(&nu, &Gamble::zero(3)), q(0, 1));
        assert_eq!(expected_payoff(&dist(&[q(1, 1), q(0, 1)]), &gamble(&[-1, 0])), q(-1, 1));
        let point = dist(&[q(1, 1), q(0, 1)]);
        assert!(!is_willing_to_accept(&point, &gamble(&[0, -5])));
        assert!(is_willing_to_accept(&point, &gamble(&[0, 5])));
    }

    #[test]
    fn larry_accepts_the_book_and_loses_a_third() {
        let env = fixtures::env_larry();
        let book = fixtures::larry_book(&env);
        let report = accepts_system(&env, &fixtures::bel_regret(&env), &book).unwrap();
        assert!(report.accepts_all());
        let verdict = classify_dutch_book(&env, &book);
        assert_eq!(verdict.per_state, vec![q(-1, 3); 3]);
        assert!(verdict.is_dutch_book);
        let uniform = accepts_system(&env, &fixtures::bel_uniform(&env), &book).unwrap();
        assert!(!uniform.accepts_all());
        assert_eq!(uniform.per_contingency[3].expectation, q(-1, 2));
    }

    #[test]
    fn zero_and_positive_systems_are_not_books() {
        let env = fixtures::env_larry();
        let zero = GambleSystem::zero(&env);
        assert!(accepts_system(&env, &fixtures::bel_regret(&env), &zero).unwrap().accepts_all());
        let v = classify_dutch_book(&env, &zero);
        assert_eq!(v.per_state, vec![q(0, 1); 3]);
        assert!(!v.is_dutch_book);
        assert!(!classify_deterministic(&env, &zero).is_deterministic);
        let mut plus = zero.clone();
        plus.gamble_mut(NodeId(0)).set(StateId(0), q(1, 1));
        assert!(!classify_dutch_book(&env, &plus).is_dutch_book);
    }

    #[test]
    fn support_violation_is_an_error() {
        let env = fixtures::env_larry();
        let mut g = GambleSystem::zero(&env);
        g.gamble_mut(NodeId(0)).set(StateId(1), q(1, 1));
        assert!(matches!(
            accepts_system(&env, &fixtures::bel_regret(&env), &g),
            Err(GambleError::Support { .. })
        ));
    }

    #[test]
    fn synthesized_book_for_larry() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let book = synthesize_dutch_book(&env, &mu, &SynthesisParams::default()).unwrap();
        assert!(accepts_system(&env, &mu, &book.gambles).unwrap().accepts_all());
        let verdict = classify_dutch_book(&env, &book.gambles);
        assert!(verdict.is_dutch_book);
        assert!(verdict.per_state.iter().all(Rational::is_negative));
        // −p(h¹|s)(1 − 1/27)
        assert_eq!(book.telescoping, q(-26, 81));
        assert_eq!(
            synthesize_dutch_book(&env, &fixtures::bel_uniform(&env), &SynthesisParams::default()),
            Err(SynthesisError::PreconditionViolation(Precondition::Consistent))
        );
    }

    #[test]
    fn two_state_two_contingency_book() {
        let states = crate::model::StateSpace::new(["a", "b"]).unwrap();
        let forest = crate::model::ContingencyForest::new([("h", None), ("k", None)]).unwrap();
        let half = vec![q(1, 2), q(1, 2)];
        let env = LearningEnvironment::build(states, forest, vec![half.clone(), half]).unwrap();
        let mu = BeliefSystem::new(vec![dist(&[q(2, 3), q(1, 3)]), dist(&[q(1, 2), q(1, 2)])]);
        let book = synthesize_dutch_book(&env, &mu, &SynthesisParams::default()).unwrap();
        assert_eq!(book.witness.product, ExtendedRatio::Finite(q(1, 2)));
        assert!(accepts_system(&env, &mu, &book.gambles).unwrap().accepts_all());
        assert!(classify_dutch_book(&env, &book.gambles).is_dutch_book);
    }

    fn nested_book(epsilon: Option<Rational>) -> (LearningEnvironment, BeliefSystem, DeterministicBook) {
        let env = fixtures::env_nested();
        let mu = fixtures::bel_drift(&env);
        let params = SynthesisParams {
            epsilon,
            ..SynthesisParams::default()
        };
        let book = synthesize_deterministic_db(&env, &mu, &params).unwrap();
        (env, mu, book)
    }

    #[test]
    fn deterministic_book_for_drift() {
        let (env, mu, book) = nested_book(Some(q(1, 2)));
        let name = |s: StateId| env.states().name(s);
        assert_eq!((name(book.s), name(book.s_prime)), ("B", "A"));
        assert_eq!((book.x.clone(), book.y.clone()), (q(1, 1), q(1, 3)));
        assert_eq!(book.variant, DeterministicVariant::Printed);
        assert_eq!(book.epsilon, q(1, 2));
        let (h0, h1) = (NodeId(0), NodeId(1));
        let (a, b) = (StateId(0), StateId(1));
        assert_eq!(*book.gambles.payoff(h0, b), q(1, 1));
        assert_eq!(*book.gambles.payoff(h0, a), q(-5, 6));
        assert_eq!(*book.gambles.payoff(h1, b), q(-25, 24));
        assert_eq!(*book.gambles.payoff(h1, a), q(1, 2));
        assert_eq!(book.acceptance.per_contingency[0].expectation, q(1, 18));
        assert_eq!(book.acceptance.per_contingency[1].expectation, q(11, 96));
        let sums: Vec<Rational> = book.verdict.per_path.iter().map(|p| p.sum.clone()).collect();
        assert_eq!(sums, vec![q(-1, 3), q(-1, 24), q(0, 1)]);
        let expected = classify_dutch_book(&env, &book.gambles);
        assert!(expected.is_dutch_book);
        assert_eq!(expected.per_state, vec![q(-1, 3), q(-1, 24), q(0, 1)]);
        assert!(accepts_system(&env, &mu, &book.gambles).unwrap().accepts_all());
    }

    #[test]
    fn deterministic_default_epsilon_is_half_the_gap() {
        let (_, _, book) = nested_book(None);
        assert_eq!(book.epsilon, q(1, 3));
        assert!(book.verdict.is_deterministic);
    }

    #[test]
    fn deterministic_preconditions() {
        let env = fixtures::env_nested();
        assert_eq!(
            synthesize_deterministic_db(&env, &fixtures::bel_nested(&env), &SynthesisParams::default()),
            Err(SynthesisError::PreconditionViolation(Precondition::ForwardConsistent))
        );
        // root r with children c1 ∋ {A, B} and c2 ∋ {A}; A branches
        let states = crate::model::StateSpace::new(["A", "B"]).unwrap();
        let forest = crate::model::ContingencyForest::new([("r", None), ("c1", Some("r")), ("c2", Some("r"))]).unwrap();
        let env = LearningEnvironment::build(states, forest, vec![vec![q(1, 2), q(1, 2)], vec![q(1, 1), q(0, 1)]]).unwrap();
        let mu = BeliefSystem::new(vec![
            dist(&[q(1, 2), q(1, 2)]),
            dist(&[q(3, 4), q(1, 4)]),
            dist(&[q(1, 1), q(0, 1)]),
        ]);
        assert_eq!(
            synthesize_deterministic_db(&env, &mu, &SynthesisParams::default()),
            Err(SynthesisError::UnsupportedEnvironment)
        );
    }

    #[test]
    fn large_later_odds_fall_back_to_the_rescaled_payoff() {
        // y = 2 at h1 is too large for the printed constant
        let env = fixtures::env_nested();
        let mu = fixtures::beliefs(
            &env,
            &[
                ("h0", &[("A", q(3, 8)), ("B", q(1, 8)), ("C", q(1, 2))]),
                ("h1", &[("A", q(2, 3)), ("B", q(1, 3))]),
                ("h2", &[("C", q(1, 1))]),
            ],
        );
        let book = synthesize_deterministic_db(&env, &mu, &SynthesisParams::default()).unwrap();
        assert_eq!((book.x.clone(), book.y.clone()), (q(3, 1), q(2, 1)));
        assert_eq!(book.variant, DeterministicVariant::Rescaled);
        assert!(book.verdict.is_deterministic);
        assert!(accepts_system(&env, &mu, &book.gambles).unwrap().accepts_all());
    }
}
