//! Lexicographic conditional probability systems, belief derivation by Bayes
//! rule from the first explaining level, complete-consistency checking with
//! LCPS extraction, and forward consistency.

use thiserror::Error;

use crate::model::{
    validate_belief_system, BeliefSystem, BeliefViolation, Distribution, LearningEnvironment,
    NodeId, StateId,
};
use crate::odds::{
    build_coherence_graph, check_coherence, Coherence, CoherenceCertificate, CoherenceViolation,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LcpsError {
    #[error("an LCPS needs at least one level")]
    NoLevels,
    #[error("level {level} has {got} entries, expected {expected}")]
    Dimension {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("state {state} has positive mass in no level")]
    Uncovered { state: usize },
    #[error("state {state} has positive mass in levels {first} and {second}")]
    Overlap {
        state: usize,
        first: usize,
        second: usize,
    },
}

/// Ordered, mutually singular probability measures whose supports cover S.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcps {
    levels: Vec<Distribution>,
}

impl Lcps {
    pub fn new(levels: Vec<Distribution>) -> Result<Self, LcpsError> {
        let Some(first) = levels.first() else {
            return Err(LcpsError::NoLevels);
        };
        let n = first.len();
        for (m, level) in levels.iter().enumerate() {
            if level.len() != n {
                return Err(LcpsError::Dimension {
                    level: m,
                    got: level.len(),
                    expected: n,
                });
            }
        }
        for s in 0..n {
            let mut owner = None;
            for (m, level) in levels.iter().enumerate() {
                if level.mass(s).is_positive() {
                    if let Some(first) = owner {
                        return Err(LcpsError::Overlap {
                            state: s,
                            first,
                            second: m,
                        });
                    }
                    owner = Some(m);
                }
            }
            if owner.is_none() {
                return Err(LcpsError::Uncovered { state: s });
            }
        }
        Ok(Lcps { levels })
    }

    pub fn levels(&self) -> &[Distribution] {
        &self.levels
    }

    pub fn num_states(&self) -> usize {
        self.levels[0].len()
    }

    /// The unique level giving `s` positive mass.
    pub fn level_of(&self, s: StateId) -> usize {
        self.levels
            .iter()
            .position(|l| l.mass(s.0).is_positive())
            .expect("every state is covered")
    }

    /// First level with positive mass on `event`.
    pub fn first_explaining(&self, event: impl Fn(usize) -> bool + Copy) -> Option<usize> {
        self.levels
            .iter()
            .position(|l| l.mass_where(event).is_positive())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("LCPS covers {got} states but the environment has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("belief system is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidBeliefs(Vec<BeliefViolation>),
    #[error("beliefs are not completely consistent")]
    NotCoherent(Box<CoherenceViolation>),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Bayes rule from the first level that explains each contingency.
pub fn derive_beliefs(env: &LearningEnvironment, lcps: &Lcps) -> Result<BeliefSystem, ConsistencyError> {
    if lcps.num_states() != env.num_states() {
        return Err(ConsistencyError::Dimension {
            got: lcps.num_states(),
            expected: env.num_states(),
        });
    }
    let beliefs = env
        .forest()
        .ids()
        .map(|h| {
            let k = lcps
                .first_explaining(|s| env.is_consistent(h, StateId(s)))
                .expect("an LCPS covers every state and S(h) is nonempty");
            let level = &lcps.levels()[k];
            let weights = (0..env.num_states())
                .map(|s| {
                    if env.is_consistent(h, StateId(s)) {
                        env.reach(h, StateId(s)) * level.mass(s)
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            Distribution::from_weights(weights).expect("explaining level has positive weight")
        })
        .collect();
    Ok(BeliefSystem::new(beliefs))
}

/// Whether `lcps` generates exactly `mu`.
pub fn verify_ccbs(env: &LearningEnvironment, mu: &BeliefSystem, lcps: &Lcps) -> bool {
    match derive_beliefs(env, lcps) {
        Ok(derived) => derived == *mu,
        Err(_) => false,
    }
}

/// Levels from the partition, masses from the per-level normalized potentials.
pub fn lcps_from_certificate(certificate: &CoherenceCertificate) -> Lcps {
    let n = certificate.potentials.len();
    let levels = certificate
        .partition
        .levels()
        .iter()
        .map(|level| {
            let mut masses = vec![Rational::zero(); n];
            for s in level {
                masses[s.0] = certificate.potentials[s.0].clone();
            }
            Distribution::new(masses).expect("potentials are normalized per level")
        })
        .collect();
    Lcps::new(levels).expect("partition levels are disjoint and cover S")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompleteConsistency {
    Consistent {
        lcps: Lcps,
        certificate: CoherenceCertificate,
    },
    Inconsistent(CoherenceViolation),
}

impl CompleteConsistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, CompleteConsistency::Consistent { .. })
    }
}

pub fn check_complete_consistency(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
) -> Result<CompleteConsistency, ConsistencyError> {
    validate_belief_system(env, mu).map_err(ConsistencyError::InvalidBeliefs)?;
    match check_coherence(&build_coherence_graph(env, mu)) {
        Coherence::Violation(v) => Ok(CompleteConsistency::Inconsistent(v)),
        Coherence::Certificate(certificate) => {
            let lcps = lcps_from_certificate(&certificate);
            if !verify_ccbs(env, mu, &lcps) {
                return Err(ConsistencyError::Internal(
                    "extracted LCPS does not reproduce the beliefs".into(),
                ));
            }
            Ok(CompleteConsistency::Consistent { lcps, certificate })
        }
    }
}

pub fn extract_lcps(env: &LearningEnvironment, mu: &BeliefSystem) -> Result<Lcps, ConsistencyError> {
    match check_complete_consistency(env, mu)? {
        CompleteConsistency::Consistent { lcps, .. } => Ok(lcps),
        CompleteConsistency::Inconsistent(v) => Err(ConsistencyError::NotCoherent(Box::new(v))),
    }
}

/// `μ(s|h) ≠ μ(s|h′)·μ(S(h′)|h)` for an ancestor `h` of `h′` with
/// `μ(S(h′)|h) > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardViolation {
    pub h: NodeId,
    pub h_prime: NodeId,
    pub s: StateId,
    pub lhs: Rational,
    pub rhs: Rational,
}

/// Every conditioning failure, ordered by `(h, h′, s)`.
pub fn forward_violations(env: &LearningEnvironment, mu: &BeliefSystem) -> Vec<ForwardViolation> {
    let forest = env.forest();
    let mut out = Vec::new();
    for h in forest.ids() {
        for h_prime in forest.ids() {
            if !forest.precedes(h, h_prime) {
                continue;
            }
            let prior = mu
                .belief(h)
                .mass_where(|s| env.is_consistent(h_prime, StateId(s)));
            if !prior.is_positive() {
                continue;
            }
            for &s in env.consistent_states(h_prime) {
                let lhs = mu.mass(h, s).clone();
                let rhs = mu.mass(h_prime, s) * &prior;
                if lhs != rhs {
                    out.push(ForwardViolation {
                        h,
                        h_prime,
                        s,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    out
}

/// `Ok` iff beliefs update by conditioning along every ancestor pair.
pub fn check_forward_consistency(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
) -> Result<(), ForwardViolation> {
    match forward_violations(env, mu).into_iter().next() {
        None => Ok(()),
        Some(v) => Err(v),
    }
}
