#![allow(dead_code)]

use dutchbook::io::{environment_from_doc, environment_to_json, parse_doc, EnvironmentDoc};
use dutchbook::odds::{OddsChain, OddsLink};
use dutchbook::{BeliefSystem, Distribution, Gamble, GambleSystem, LearningEnvironment, Rational, StateId, StateSpace};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

/// `perm[new] = old`.
pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn permute_env(env: &LearningEnvironment, perm: &[usize]) -> LearningEnvironment {
    let names: Vec<&str> = perm.iter().map(|&o| env.states().name(StateId(o))).collect();
    let eta = perm.iter().map(|&o| env.eta_row(StateId(o)).to_vec()).collect();
    LearningEnvironment::build(StateSpace::new(names).unwrap(), env.forest().clone(), eta).unwrap()
}

fn permute_dist(d: &Distribution, perm: &[usize]) -> Distribution {
    Distribution::new(perm.iter().map(|&o| d.mass(o).clone()).collect()).unwrap()
}

pub fn permute_beliefs(mu: &BeliefSystem, perm: &[usize]) -> BeliefSystem {
    BeliefSystem::new(mu.beliefs().iter().map(|d| permute_dist(d, perm)).collect())
}

pub fn permute_gambles(g: &GambleSystem, perm: &[usize]) -> GambleSystem {
    GambleSystem::new(
        g.gambles()
            .iter()
            .map(|x| Gamble::new(perm.iter().map(|&o| x.payoff(StateId(o)).clone()).collect()))
            .collect(),
    )
}

/// Inverse of `permute_gambles`.
pub fn unpermute_gambles(g: &GambleSystem, perm: &[usize]) -> GambleSystem {
    permute_gambles(g, &inverse(perm))
}

pub fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Relabels a chain found on the permuted instance back to original ids.
pub fn unpermute_chain(chain: &OddsChain, perm: &[usize]) -> OddsChain {
    OddsChain::new(
        chain
            .links()
            .iter()
            .map(|l| OddsLink {
                h: l.h,
                from: StateId(perm[l.from.0]),
                to: StateId(perm[l.to.0]),
                value: l.value.clone(),
            })
            .collect(),
    )
    .unwrap()
}

/// Rewrites every η entry `p/q` as `pk/qk` in the document text and parses it
/// back.
pub fn scale_eta_text(env: &LearningEnvironment, k: i64) -> LearningEnvironment {
    let mut doc = environment_to_json(env);
    for row in doc["eta"].as_object_mut().unwrap().values_mut() {
        for v in row.as_object_mut().unwrap().values_mut() {
            let r: Rational = v.as_str().unwrap().parse().unwrap();
            *v = Value::String(format!("{}/{}", r.numer() * k, r.denom() * k));
        }
    }
    let parsed: EnvironmentDoc = parse_doc(&doc.to_string(), "scaled").unwrap();
    environment_from_doc(&parsed).unwrap()
}

/// Every fraction in [0, 1] with denominator at most `max_den`, ascending.
pub fn farey(max_den: i64) -> Vec<Rational> {
    let mut v: Vec<Rational> = (1..=max_den)
        .flat_map(|d| (0..=d).map(move |n| Rational::new(n, d)))
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Every distribution on `k` points whose masses have denominators at most
/// `max_den`.
pub fn simplex_grid(k: usize, max_den: i64) -> Vec<Vec<Rational>> {
    let f = farey(max_den);
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(f: &[Rational], k: usize, left: Rational, cur: &mut Vec<Rational>, out: &mut Vec<Vec<Rational>>) {
        if k == 1 {
            if f.contains(&left) {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for x in f.iter().filter(|x| **x <= left) {
            cur.push(x.clone());
            go(f, k - 1, &left - x, cur, out);
            cur.pop();
        }
    }
    go(&f, k, Rational::one(), &mut cur, &mut out);
    out
}
