//! Canonical worked instances shared by tests, benches and documentation.
//!
//! * `env_larry`: three firework locations, six leaf contingencies, each state
//!   reaching its three consistent contingencies with probability 1/3.
//! * `bel_regret`: the regretful beliefs (3/4 on the "other" location).
//! * `bel_uniform`, `bel_lex`, `lcps_lex`: consistent beliefs on the same
//!   environment.
//! * `env_skewed`: two states with state-dependent reach.
//! * `env_nested`, `bel_nested`, `bel_drift`: a two-level tree where `bel_drift`
//!   breaks conditioning between the root and its left child.
//! * `larry_book`: the 9/-10 system of gambles.

use crate::consistency::Lcps;
use crate::dutchbook::{Gamble, GambleSystem};
use crate::model::{BeliefSystem, ContingencyForest, Distribution, LearningEnvironment, StateSpace};
use crate::rational::{q, Rational};

pub fn env_larry() -> LearningEnvironment {
    let states = StateSpace::new(["sq", "ma", "pa"]).unwrap();
    let forest = ContingencyForest::new(
        ["sq", "ma", "pa", "sm", "mp", "ps"].map(|h| (h, None)),
    )
    .unwrap();
    let third = q(1, 3);
    let z = Rational::zero();
    // paths (leaves) in order: sq, ma, pa, sm, mp, ps
    let eta = vec![
        vec![third.clone(), z.clone(), z.clone(), third.clone(), z.clone(), third.clone()],
        vec![z.clone(), third.clone(), z.clone(), third.clone(), third.clone(), z.clone()],
        vec![z.clone(), z.clone(), third.clone(), z.clone(), third.clone(), third.clone()],
    ];
    LearningEnvironment::build(states, forest, eta).unwrap()
}

/// Builds a belief system from `(contingency, [(state, mass)])` literals;
/// omitted states get mass zero.
pub fn beliefs(env: &LearningEnvironment, rows: &[(&str, &[(&str, Rational)])]) -> BeliefSystem {
    let mut out = vec![None; env.num_contingencies()];
    for (h, masses) in rows {
        let hid = env.forest().id(h).expect("unknown contingency");
        let mut row = vec![Rational::zero(); env.num_states()];
        for (s, m) in masses.iter() {
            row[env.states().id(s).expect("unknown state").0] = m.clone();
        }
        out[hid.0] = Some(Distribution::new(row).expect("belief is not a distribution"));
    }
    BeliefSystem::new(out.into_iter().map(|d| d.expect("missing belief")).collect())
}

fn larry_with_pairs(env: &LearningEnvironment, sm: [Rational; 2], mp: [Rational; 2], ps: [Rational; 2]) -> BeliefSystem {
    let one = Rational::one();
    let [sm_sq, sm_ma] = sm;
    let [mp_ma, mp_pa] = mp;
    let [ps_pa, ps_sq] = ps;
    beliefs(
        env,
        &[
            ("sq", &[("sq", one.clone())]),
            ("ma", &[("ma", one.clone())]),
            ("pa", &[("pa", one)]),
            ("sm", &[("sq", sm_sq), ("ma", sm_ma)]),
            ("mp", &[("ma", mp_ma), ("pa", mp_pa)]),
            ("ps", &[("pa", ps_pa), ("sq", ps_sq)]),
        ],
    )
}

/// μ(sq|ps) = μ(ma|sm) = μ(pa|mp) = 3/4.
pub fn bel_regret(env: &LearningEnvironment) -> BeliefSystem {
    larry_with_pairs(
        env,
        [q(1, 4), q(3, 4)],
        [q(1, 4), q(3, 4)],
        [q(1, 4), q(3, 4)],
    )
}

pub fn bel_uniform(env: &LearningEnvironment) -> BeliefSystem {
    larry_with_pairs(
        env,
        [q(1, 2), q(1, 2)],
        [q(1, 2), q(1, 2)],
        [q(1, 2), q(1, 2)],
    )
}

/// Beliefs generated by [`lcps_lex`].
pub fn bel_lex(env: &LearningEnvironment) -> BeliefSystem {
    larry_with_pairs(
        env,
        [q(1, 1), q(0, 1)],
        [q(2, 3), q(1, 3)],
        [q(0, 1), q(1, 1)],
    )
}

/// Point mass on `sq`, then `(ma: 2/3, pa: 1/3)`.
pub fn lcps_lex() -> Lcps {
    Lcps::new(vec![
        Distribution::new(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap(),
        Distribution::new(vec![q(0, 1), q(2, 3), q(1, 3)]).unwrap(),
    ])
    .unwrap()
}

pub fn env_skewed() -> LearningEnvironment {
    let states = StateSpace::new(["u", "v"]).unwrap();
    let forest = ContingencyForest::new([("a", None), ("b", None)]).unwrap();
    let eta = vec![vec![q(3, 4), q(1, 4)], vec![q(1, 4), q(3, 4)]];
    LearningEnvironment::build(states, forest, eta).unwrap()
}

/// Root `h0` with children `h1` (reached by A and B) and `h2` (reached by C).
pub fn env_nested() -> LearningEnvironment {
    let states = StateSpace::new(["A", "B", "C"]).unwrap();
    let forest =
        ContingencyForest::new([("h0", None), ("h1", Some("h0")), ("h2", Some("h0"))]).unwrap();
    // paths: h1, h2
    let eta = vec![
        vec![q(1, 1), q(0, 1)],
        vec![q(1, 1), q(0, 1)],
        vec![q(0, 1), q(1, 1)],
    ];
    LearningEnvironment::build(states, forest, eta).unwrap()
}

fn nested_with_h1(env: &LearningEnvironment, a: Rational, b: Rational) -> BeliefSystem {
    let third = q(1, 3);
    beliefs(
        env,
        &[
            ("h0", &[("A", third.clone()), ("B", third.clone()), ("C", third)]),
            ("h1", &[("A", a), ("B", b)]),
            ("h2", &[("C", q(1, 1))]),
        ],
    )
}

/// Uniform at the root, conditioned below it.
pub fn bel_nested(env: &LearningEnvironment) -> BeliefSystem {
    nested_with_h1(env, q(1, 2), q(1, 2))
}

/// Like [`bel_nested`] but μ(·|h1) = (3/4, 1/4, 0).
pub fn bel_drift(env: &LearningEnvironment) -> BeliefSystem {
    nested_with_h1(env, q(3, 4), q(1, 4))
}

/// g(sq|ps) = g(ma|sm) = g(pa|mp) = 9; g(pa|ps) = g(sq|sm) = g(ma|mp) = -10.
pub fn larry_book(env: &LearningEnvironment) -> GambleSystem {
    let mut gambles = vec![Gamble::zero(env.num_states()); env.num_contingencies()];
    let mut set = |h: &str, s: &str, v: i64| {
        let h = env.forest().id(h).unwrap();
        let s = env.states().id(s).unwrap();
        gambles[h.0].set(s, Rational::from_integer(v));
    };
    set("ps", "sq", 9);
    set("sm", "ma", 9);
    set("mp", "pa", 9);
    set("ps", "pa", -10);
    set("sm", "sq", -10);
    set("mp", "ma", -10);
    GambleSystem::new(gambles)
}
