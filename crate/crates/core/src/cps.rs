//! Complete conditional probability systems, conversion to and from LCPSs,
//! and Siniscalchi's consistency condition for uniform-reach environments.
//!
//! Events are bit masks over the canonical state order; row `mask - 1` holds
//! the conditional on `mask`.

use thiserror::Error;

use crate::consistency::Lcps;
use crate::model::{BeliefSystem, Distribution, LearningEnvironment, NodeId, StateId};
use crate::par::{self, Execution};
use crate::rational::Rational;

pub const MAX_CPS_STATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpsError {
    #[error("a complete CPS supports at most {MAX_CPS_STATES} states, got {0}")]
    TooManyStates(usize),
    #[error("a complete CPS needs at least one state")]
    NoStates,
    #[error("expected {expected} conditionals, got {got}")]
    RowCount { got: usize, expected: usize },
    #[error("conditional on event {event:#b} has {got} entries, expected {expected}")]
    RowDimension { event: u32, got: usize, expected: usize },
}

/// A conditional distribution on every nonempty subset of S.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompleteCps {
    num_states: usize,
    rows: Vec<Distribution>,
}

fn full_mask(n: usize) -> u32 {
    ((1u64 << n) - 1) as u32
}

fn contains(mask: u32, s: usize) -> bool {
    mask & (1 << s) != 0
}

impl CompleteCps {
    /// `rows[mask - 1]` is the conditional on `mask`.
    pub fn new(num_states: usize, rows: Vec<Distribution>) -> Result<Self, CpsError> {
        if num_states == 0 {
            return Err(CpsError::NoStates);
        }
        if num_states > MAX_CPS_STATES {
            return Err(CpsError::TooManyStates(num_states));
        }
        let expected = full_mask(num_states) as usize;
        if rows.len() != expected {
            return Err(CpsError::RowCount {
                got: rows.len(),
                expected,
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_states {
                return Err(CpsError::RowDimension {
                    event: i as u32 + 1,
                    got: row.len(),
                    expected: num_states,
                });
            }
        }
        Ok(CompleteCps { num_states, rows })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// μ̄(·|event).
    pub fn conditional(&self, event: u32) -> &Distribution {
        &self.rows[event as usize - 1]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn full_event(&self) -> u32 {
        full_mask(self.num_states)
    }

    /// μ̄(event | given).
    pub fn prob(&self, event: u32, given: u32) -> Rational {
        self.conditional(given).mass_where(|s| contains(event, s))
    }
}

/// States of an event mask, in canonical order.
pub fn event_states(event: u32) -> Vec<StateId> {
    (0..32).filter(|&s| contains(event, s)).map(StateId).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpsViolation {
    /// μ̄(C|C) < 1.
    Support { event: u32, mass_inside: Rational },
    /// μ̄(E|C) ≠ μ̄(E|D)·μ̄(D|C) for the singleton `E = {state}`.
    ChainRule {
        c: u32,
        d: u32,
        state: StateId,
        lhs: Rational,
        rhs: Rational,
    },
}

pub fn validate_complete_cps(cps: &CompleteCps) -> Result<(), CpsViolation> {
    validate_complete_cps_with(cps, Execution::default())
}

pub fn validate_complete_cps_with(cps: &CompleteCps, exec: Execution) -> Result<(), CpsViolation> {
    let first = par::map_range(exec, cps.rows.len(), |i| {
        let c = i as u32 + 1;
        let row = cps.conditional(c);
        let inside = cps.prob(c, c);
        if !inside.is_one() {
            return Some(CpsViolation::Support {
                event: c,
                mass_inside: inside,
            });
        }
        // proper nonempty subsets of c, ascending
        let mut d = (c - 1) & c;
        let mut subsets = Vec::new();
        while d != 0 {
            subsets.push(d);
            d = (d - 1) & c;
        }
        subsets.reverse();
        for d in subsets {
            let p_d = cps.prob(d, c);
            let given_d = cps.conditional(d);
            for s in 0..cps.num_states {
                if !contains(d, s) {
                    continue;
                }
                let lhs = row.mass(s).clone();
                let rhs = given_d.mass(s) * &p_d;
                if lhs != rhs {
                    return Some(CpsViolation::ChainRule {
                        c,
                        d,
                        state: StateId(s),
                        lhs,
                        rhs,
                    });
                }
            }
        }
        None
    });
    match first.into_iter().flatten().next() {
        None => Ok(()),
        Some(v) => Err(v),
    }
}

pub fn lcps_to_cps(lcps: &Lcps) -> Result<CompleteCps, CpsError> {
    lcps_to_cps_with(lcps, Execution::default())
}

/// Conditions the first level with positive mass on each event.
pub fn lcps_to_cps_with(lcps: &Lcps, exec: Execution) -> Result<CompleteCps, CpsError> {
    let n = lcps.num_states();
    if n > MAX_CPS_STATES {
        return Err(CpsError::TooManyStates(n));
    }
    let rows = par::map_range(exec, full_mask(n) as usize, |i| {
        let c = i as u32 + 1;
        let member = |s: usize| contains(c, s);
        let k = lcps
            .first_explaining(member)
            .expect("an LCPS covers every state");
        lcps.levels()[k]
            .condition(member)
            .expect("explaining level has positive mass")
    });
    CompleteCps::new(n, rows)
}

/// Levels are the conditionals on S, then on the states null under every
/// earlier level, until nothing remains.
pub fn cps_to_lcps(cps: &CompleteCps) -> Lcps {
    let mut remaining = cps.full_event();
    let mut levels = Vec::new();
    while remaining != 0 {
        let row = cps.conditional(remaining).clone();
        for s in row.support() {
            remaining &= !(1 << s);
        }
        levels.push(row);
    }
    Lcps::new(levels).expect("a valid complete CPS yields disjoint covering levels")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SiniscalchiError {
    #[error("the environment does not have uniform reach")]
    NonUniformReach,
    #[error("sequence length bound must be at least 2, got {0}")]
    MaxLenTooSmall(usize),
}

/// A contingency sequence and event on which the two sides differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiniscalchiViolation {
    pub sequence: Vec<NodeId>,
    pub event: Vec<StateId>,
    pub lhs: Rational,
    pub rhs: Rational,
}

struct SeqSearch<'a> {
    env: &'a LearningEnvironment,
    mu: &'a BeliefSystem,
    /// `overlap[a][b]` = μ(S(a)∩S(b) | a).
    overlap: Vec<Vec<Rational>>,
    max_len: usize,
}

impl SeqSearch<'_> {
    fn check_endpoints(&self, seq: &[NodeId], left: &Rational, right: &Rational) -> Option<SiniscalchiViolation> {
        let (first, last) = (seq[0], seq[seq.len() - 1]);
        let common: Vec<StateId> = self
            .env
            .consistent_states(first)
            .iter()
            .copied()
            .filter(|&s| self.env.is_consistent(last, s))
            .collect();
        let mut events: Vec<Vec<StateId>> = common.iter().map(|&s| vec![s]).collect();
        if common.len() > 1 {
            events.push(common.clone());
        }
        for event in events {
            let at = |h: NodeId| -> Rational { event.iter().map(|&s| self.mu.mass(h, s)).sum() };
            let lhs = at(first) * left;
            let rhs = at(last) * right;
            if lhs != rhs {
                return Some(SiniscalchiViolation {
                    sequence: seq.to_vec(),
                    event,
                    lhs,
                    rhs,
                });
            }
        }
        None
    }

    fn extend(&self, seq: &mut Vec<NodeId>, left: &Rational, right: &Rational) -> Option<SiniscalchiViolation> {
        if seq.len() >= 2 {
            if let Some(v) = self.check_endpoints(seq, left, right) {
                return Some(v);
            }
        }
        if seq.len() == self.max_len {
            return None;
        }
        let last = seq[seq.len() - 1];
        for next in self.env.forest().ids() {
            if seq.contains(&next) {
                continue;
            }
            let l = left * &self.overlap[next.0][last.0];
            let r = right * &self.overlap[last.0][next.0];
            if l.is_zero() && r.is_zero() {
                // every extension reads 0 = 0
                continue;
            }
            seq.push(next);
            let found = self.extend(seq, &l, &r);
            seq.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// Checks `μ(E|h¹)·Π μ(S(hᵐ)∩S(hᵐ⁺¹)|hᵐ⁺¹) = μ(E|hⁿ)·Π μ(S(hᵐ)∩S(hᵐ⁺¹)|hᵐ)`
/// over sequences of distinct contingencies of length at most `max_len`.
pub fn check_siniscalchi(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    max_len: usize,
) -> Result<Result<(), SiniscalchiViolation>, SiniscalchiError> {
    check_siniscalchi_with(env, mu, max_len, Execution::default())
}

pub fn check_siniscalchi_with(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    max_len: usize,
    exec: Execution,
) -> Result<Result<(), SiniscalchiViolation>, SiniscalchiError> {
    if !env.is_uniform_reach() {
        return Err(SiniscalchiError::NonUniformReach);
    }
    if max_len < 2 {
        return Err(SiniscalchiError::MaxLenTooSmall(max_len));
    }
    let k = env.num_contingencies();
    let overlap = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    mu.belief(NodeId(a))
                        .mass_where(|s| env.is_consistent(NodeId(b), StateId(s)))
                })
                .collect()
        })
        .collect();
    let search = SeqSearch {
        env,
        mu,
        overlap,
        max_len,
    };
    let per_start = par::map_range(exec, k, |h| {
        search.extend(&mut vec![NodeId(h)], &Rational::one(), &Rational::one())
    });
    Ok(match per_start.into_iter().flatten().next() {
        None => Ok(()),
        Some(v) => Err(v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::q;

    fn dist(m: &[Rational]) -> Distribution {
        Distribution::new(m.to_vec()).unwrap()
    }

    #[test]
    fn single_state_cps() {
        let lcps = Lcps::new(vec![dist(&[q(1, 1)])]).unwrap();
        let cps = lcps_to_cps(&lcps).unwrap();
        assert_eq!(cps.rows(), &[dist(&[q(1, 1)])]);
        assert_eq!(cps_to_lcps(&cps), lcps);
    }

    #[test]
    fn lex_rows() {
        let cps = lcps_to_cps(&fixtures::lcps_lex()).unwrap();
        assert_eq!(validate_complete_cps(&cps), Ok(()));
        assert_eq!(*cps.conditional(0b110), dist(&[q(0, 1), q(2, 3), q(1, 3)]));
        assert_eq!(*cps.conditional(0b011), dist(&[q(1, 1), q(0, 1), q(0, 1)]));
        assert_eq!(*cps.conditional(0b111), dist(&[q(1, 1), q(0, 1), q(0, 1)]));
        assert_eq!(cps_to_lcps(&cps), fixtures::lcps_lex());
    }

    #[test]
    fn uniform_rows_are_uniform_conditionals() {
        let lcps = Lcps::new(vec![dist(&[q(1, 3), q(1, 3), q(1, 3)])]).unwrap();
        let cps = lcps_to_cps(&lcps).unwrap();
        for c in 1..8u32 {
            let k = c.count_ones() as i64;
            for s in 0..3 {
                let expected = if contains(c, s) { q(1, k) } else { q(0, 1) };
                assert_eq!(*cps.conditional(c).mass(s), expected);
            }
        }
    }

    #[test]
    fn row_outside_its_event_is_flagged() {
        let rows = vec![dist(&[q(1, 1), q(0, 1)]), dist(&[q(1, 2), q(1, 2)]), dist(&[q(1, 2), q(1, 2)])];
        let cps = CompleteCps::new(2, rows).unwrap();
        assert!(matches!(
            validate_complete_cps(&cps),
            Err(CpsViolation::Support { event: 2, .. })
        ));
    }

    #[test]
    fn perturbed_row_breaks_the_chain_rule() {
        let lcps = Lcps::new(vec![dist(&[q(1, 2), q(1, 4), q(1, 4)])]).unwrap();
        let mut rows = lcps_to_cps(&lcps).unwrap().rows().to_vec();
        rows[0b011 - 1] = dist(&[q(1, 2), q(1, 2), q(0, 1)]);
        let cps = CompleteCps::new(3, rows).unwrap();
        let Err(CpsViolation::ChainRule { c, d, state, .. }) = validate_complete_cps(&cps) else {
            panic!("expected a chain rule violation");
        };
        assert_eq!((c, d, state), (0b111, 0b011, StateId(0)));
        assert_eq!(
            validate_complete_cps_with(&cps, Execution::Sequential),
            validate_complete_cps(&cps)
        );
    }

    #[test]
    fn size_limits() {
        assert_eq!(CompleteCps::new(17, vec![]), Err(CpsError::TooManyStates(17)));
        assert!(matches!(
            CompleteCps::new(2, vec![dist(&[q(1, 1), q(0, 1)])]),
            Err(CpsError::RowCount { got: 1, expected: 3 })
        ));
    }

    #[test]
    fn siniscalchi_on_larry() {
        let env = fixtures::env_larry();
        let v = check_siniscalchi(&env, &fixtures::bel_regret(&env), 3)
            .unwrap()
            .unwrap_err();
        let names: Vec<&str> = v.sequence.iter().map(|&h| env.forest().name(h)).collect();
        assert_eq!(names, ["sm", "mp", "ps"]);
        assert_eq!(v.event, vec![env.states().id("sq").unwrap()]);
        assert_eq!((v.lhs, v.rhs), (q(1, 64), q(27, 64)));
        assert_eq!(check_siniscalchi(&env, &fixtures::bel_uniform(&env), 3).unwrap(), Ok(()));
        assert_eq!(check_siniscalchi(&env, &fixtures::bel_lex(&env), 3).unwrap(), Ok(()));
    }

    #[test]
    fn siniscalchi_needs_uniform_reach() {
        let env = fixtures::env_skewed();
        let mu = fixtures::beliefs(
            &env,
            &[("a", &[("u", q(1, 2)), ("v", q(1, 2))]), ("b", &[("u", q(1, 2)), ("v", q(1, 2))])],
        );
        assert_eq!(check_siniscalchi(&env, &mu, 2), Err(SiniscalchiError::NonUniformReach));
        let env = fixtures::env_larry();
        assert_eq!(
            check_siniscalchi(&env, &fixtures::bel_uniform(&env), 1),
            Err(SiniscalchiError::MaxLenTooSmall(1))
        );
    }
}
