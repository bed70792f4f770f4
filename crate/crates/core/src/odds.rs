//! Discounted and generalized odds ratios, the coherence multigraph over
//! states, and the cycle-consistency check that yields either a plausibility
//! partition with multiplicative potentials or a violating self-cycle.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Mul;

use thiserror::Error;

use crate::model::{BeliefSystem, LearningEnvironment, NodeId, StateId};
use crate::par::{self, Execution};
use crate::rational::Rational;

/// A ratio in `[0, ∞]`. Zero and infinity are tags so that a `Finite` value is
/// always strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtendedRatio {
    Zero,
    Finite(Rational),
    Infinite,
}

impl ExtendedRatio {
    /// `num / den` for non-negative operands; `None` for `0/0`.
    pub fn from_ratio(num: &Rational, den: &Rational) -> Option<ExtendedRatio> {
        match (num.is_zero(), den.is_zero()) {
            (true, true) => None,
            (true, false) => Some(ExtendedRatio::Zero),
            (false, true) => Some(ExtendedRatio::Infinite),
            (false, false) => Some(ExtendedRatio::Finite(num / den)),
        }
    }

    pub fn one() -> Self {
        ExtendedRatio::Finite(Rational::one())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, ExtendedRatio::Finite(v) if v.is_one())
    }

    pub fn recip(&self) -> ExtendedRatio {
        match self {
            ExtendedRatio::Zero => ExtendedRatio::Infinite,
            ExtendedRatio::Infinite => ExtendedRatio::Zero,
            ExtendedRatio::Finite(v) => ExtendedRatio::Finite(v.recip()),
        }
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtendedRatio::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Product, or `None` when it is `0·∞`.
    pub fn checked_mul(&self, other: &ExtendedRatio) -> Option<ExtendedRatio> {
        use ExtendedRatio::*;
        match (self, other) {
            (Zero, Infinite) | (Infinite, Zero) => None,
            (Zero, _) | (_, Zero) => Some(Zero),
            (Infinite, _) | (_, Infinite) => Some(Infinite),
            (Finite(a), Finite(b)) => Some(Finite(a * b)),
        }
    }

    /// Whether the value is strictly below one.
    pub fn is_below_one(&self) -> bool {
        match self {
            ExtendedRatio::Zero => true,
            ExtendedRatio::Finite(v) => *v < 1,
            ExtendedRatio::Infinite => false,
        }
    }
}

impl Mul for &ExtendedRatio {
    type Output = Option<ExtendedRatio>;
    fn mul(self, rhs: &ExtendedRatio) -> Option<ExtendedRatio> {
        self.checked_mul(rhs)
    }
}

impl fmt::Display for ExtendedRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedRatio::Zero => write!(f, "0"),
            ExtendedRatio::Finite(v) => write!(f, "{v}"),
            ExtendedRatio::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OddsError {
    #[error("odds ratio between {s} and {s_prime} at {h} is indeterminate (both beliefs are zero)")]
    Indeterminate {
        h: NodeId,
        s: StateId,
        s_prime: StateId,
    },
    #[error("state {s} is not consistent with contingency {h}")]
    Domain { h: NodeId, s: StateId },
    #[error("odds ratio needs two distinct states, got {0} twice")]
    SameState(StateId),
    #[error("an odds chain needs at least one link")]
    EmptyChain,
    #[error("chain link {at} does not start where the previous one ends")]
    Disconnected { at: usize },
    #[error("chain mixes zero and infinite odds, so its product is indeterminate")]
    IndeterminateProduct,
    #[error("zero odds ratios form a cycle; the plausibility order is undefined")]
    ZeroCycle,
}

/// One discounted odds ratio `o(from, to | h)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OddsLink {
    pub h: NodeId,
    pub from: StateId,
    pub to: StateId,
    pub value: ExtendedRatio,
}

impl OddsLink {
    pub fn reversed(&self) -> OddsLink {
        OddsLink {
            h: self.h,
            from: self.to,
            to: self.from,
            value: self.value.recip(),
        }
    }
}

/// A concatenation of odds links, each starting where the previous one ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OddsChain {
    links: Vec<OddsLink>,
}

impl OddsChain {
    pub fn new(links: Vec<OddsLink>) -> Result<Self, OddsError> {
        if links.is_empty() {
            return Err(OddsError::EmptyChain);
        }
        for (i, w) in links.windows(2).enumerate() {
            if w[0].to != w[1].from {
                return Err(OddsError::Disconnected { at: i + 1 });
            }
        }
        let has_zero = links.iter().any(|l| l.value == ExtendedRatio::Zero);
        let has_inf = links.iter().any(|l| l.value == ExtendedRatio::Infinite);
        if has_zero && has_inf {
            return Err(OddsError::IndeterminateProduct);
        }
        Ok(OddsChain { links })
    }

    pub fn links(&self) -> &[OddsLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn start(&self) -> StateId {
        self.links[0].from
    }

    pub fn end(&self) -> StateId {
        self.links[self.links.len() - 1].to
    }

    pub fn is_cycle(&self) -> bool {
        self.start() == self.end()
    }

    /// Product of the stored link values.
    pub fn stored_product(&self) -> ExtendedRatio {
        self.links
            .iter()
            .try_fold(ExtendedRatio::one(), |acc, l| acc.checked_mul(&l.value))
            .expect("chain invariant excludes 0·∞")
    }

    /// The same chain walked backwards, with every ratio inverted.
    pub fn reversed(&self) -> OddsChain {
        OddsChain {
            links: self.links.iter().rev().map(OddsLink::reversed).collect(),
        }
    }
}

/// `(μ(s|h)/p(h|s))·(p(h|s')/μ(s'|h))`.
pub fn discounted_odds_ratio(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    h: NodeId,
    s: StateId,
    s_prime: StateId,
) -> Result<ExtendedRatio, OddsError> {
    if s == s_prime {
        return Err(OddsError::SameState(s));
    }
    for x in [s, s_prime] {
        if !env.is_consistent(h, x) {
            return Err(OddsError::Domain { h, s: x });
        }
    }
    let num = mu.mass(h, s) / env.reach(h, s);
    let den = mu.mass(h, s_prime) / env.reach(h, s_prime);
    ExtendedRatio::from_ratio(&num, &den).ok_or(OddsError::Indeterminate { h, s, s_prime })
}

/// Re-evaluates every link of `chain` against `(env, mu)` and multiplies.
pub fn generalized_odds_ratio(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    chain: &OddsChain,
) -> Result<ExtendedRatio, OddsError> {
    let mut acc = ExtendedRatio::one();
    for link in chain.links() {
        let v = discounted_odds_ratio(env, mu, link.h, link.from, link.to)?;
        acc = acc
            .checked_mul(&v)
            .ok_or(OddsError::IndeterminateProduct)?;
    }
    Ok(acc)
}

/// Every defined discounted odds ratio, in both orientations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceGraph {
    num_states: usize,
    edges: Vec<OddsLink>,
    outgoing: Vec<Vec<usize>>,
}

impl CoherenceGraph {
    pub fn from_edges(num_states: usize, edges: Vec<OddsLink>) -> Self {
        let mut outgoing = vec![Vec::new(); num_states];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.from.0].push(i);
        }
        CoherenceGraph {
            num_states,
            edges,
            outgoing,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Edges ordered by contingency, then source, then target.
    pub fn edges(&self) -> &[OddsLink] {
        &self.edges
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = &OddsLink> + '_ {
        self.outgoing[s.0].iter().map(|&i| &self.edges[i])
    }
}

pub fn build_coherence_graph(env: &LearningEnvironment, mu: &BeliefSystem) -> CoherenceGraph {
    build_coherence_graph_with(env, mu, Execution::default())
}

pub fn build_coherence_graph_with(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
    exec: Execution,
) -> CoherenceGraph {
    let per_contingency = par::map_range(exec, env.num_contingencies(), |h| {
        let h = NodeId(h);
        let states = env.consistent_states(h);
        let mut edges = Vec::new();
        for &s in states {
            for &t in states {
                if s == t {
                    continue;
                }
                if let Ok(value) = discounted_odds_ratio(env, mu, h, s, t) {
                    edges.push(OddsLink {
                        h,
                        from: s,
                        to: t,
                        value,
                    });
                }
            }
        }
        edges
    });
    CoherenceGraph::from_edges(env.num_states(), per_contingency.into_iter().flatten().collect())
}

/// Ordered, disjoint, nonempty state sets covering S; lower levels are more
/// plausible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlausibilityPartition {
    levels: Vec<Vec<StateId>>,
}

impl PlausibilityPartition {
    pub fn levels(&self) -> &[Vec<StateId>] {
        &self.levels
    }

    pub fn level_of(&self, s: StateId) -> usize {
        self.levels
            .iter()
            .position(|l| l.contains(&s))
            .expect("partition covers every state")
    }
}

/// Proof that every generalized self-odds ratio is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceCertificate {
    pub partition: PlausibilityPartition,
    /// Positive on every state, summing to one within each level.
    pub potentials: Vec<Rational>,
}

/// A self-cycle of odds whose product is `Zero` or finite and below one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceViolation {
    pub cycle: OddsChain,
    pub product: ExtendedRatio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coherence {
    Certificate(CoherenceCertificate),
    Violation(CoherenceViolation),
}

/// Spanning forest of the finite-odds subgraph, rooted at the canonically
/// first state of each component.
struct FiniteForest {
    component: Vec<usize>,
    /// Members of each component, in canonical state order.
    members: Vec<Vec<StateId>>,
    potential: Vec<Rational>,
    depth: Vec<usize>,
    /// Tree edge from the parent into this state.
    parent_edge: Vec<Option<OddsLink>>,
}

impl FiniteForest {
    fn span(graph: &CoherenceGraph) -> FiniteForest {
        let n = graph.num_states();
        let mut component = vec![usize::MAX; n];
        let mut potential = vec![Rational::zero(); n];
        let mut depth = vec![0; n];
        let mut parent_edge = vec![None; n];
        let mut members = Vec::new();
        for root in 0..n {
            if component[root] != usize::MAX {
                continue;
            }
            let c = members.len();
            let mut member = vec![StateId(root)];
            component[root] = c;
            potential[root] = Rational::one();
            let mut queue = VecDeque::from([StateId(root)]);
            while let Some(u) = queue.pop_front() {
                for e in graph.outgoing(u) {
                    let ExtendedRatio::Finite(v) = &e.value else {
                        continue;
                    };
                    let t = e.to;
                    if component[t.0] != usize::MAX {
                        continue;
                    }
                    component[t.0] = c;
                    // v = ν(u)/ν(t)
                    potential[t.0] = &potential[u.0] / v;
                    depth[t.0] = depth[u.0] + 1;
                    parent_edge[t.0] = Some(e.clone());
                    member.push(t);
                    queue.push_back(t);
                }
            }
            member.sort();
            members.push(member);
        }
        FiniteForest {
            component,
            members,
            potential,
            depth,
            parent_edge,
        }
    }

    /// Links along the tree from `a` to `b` (same component).
    fn tree_path(&self, a: StateId, b: StateId) -> Vec<OddsLink> {
        debug_assert_eq!(self.component[a.0], self.component[b.0]);
        let mut up = Vec::new();
        let mut down = Vec::new();
        let (mut x, mut y) = (a, b);
        while x != y {
            if self.depth[x.0] >= self.depth[y.0] {
                let e = self.parent_edge[x.0].as_ref().expect("non-root has a parent");
                up.push(e.reversed());
                x = e.from;
            } else {
                let e = self.parent_edge[y.0].as_ref().expect("non-root has a parent");
                down.push(e.clone());
                y = e.from;
            }
        }
        down.reverse();
        up.extend(down);
        up
    }
}

fn oriented_violation(links: Vec<OddsLink>) -> CoherenceViolation {
    let cycle = OddsChain::new(links).expect("witness cycle is well formed");
    let product = cycle.stored_product();
    debug_assert!(!product.is_one());
    if product.is_below_one() {
        CoherenceViolation { cycle, product }
    } else {
        let cycle = cycle.reversed();
        let product = cycle.stored_product();
        CoherenceViolation { cycle, product }
    }
}

/// Zero edges between finite components, one representative per ordered
/// component pair.
struct Condensation {
    successors: Vec<Vec<(usize, OddsLink)>>,
}

enum ZeroStructure {
    Acyclic(Condensation),
    Violation(CoherenceViolation),
}

fn condense(graph: &CoherenceGraph, forest: &FiniteForest) -> ZeroStructure {
    let k = forest.members.len();
    let mut successors: Vec<Vec<(usize, OddsLink)>> = vec![Vec::new(); k];
    for e in graph.edges() {
        if e.value != ExtendedRatio::Zero {
            continue;
        }
        let (ca, cb) = (forest.component[e.from.0], forest.component[e.to.0]);
        if ca == cb {
            let mut links = vec![e.clone()];
            links.extend(forest.tree_path(e.to, e.from));
            return ZeroStructure::Violation(oriented_violation(links));
        }
        if !successors[ca].iter().any(|(c, _)| *c == cb) {
            successors[ca].push((cb, e.clone()));
        }
    }

    // Iterative DFS for a directed cycle, components in canonical order.
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; k];
    for start in 0..k {
        if color[start] != WHITE {
            continue;
        }
        // (component, next successor index, edge used to enter it)
        let mut stack: Vec<(usize, usize, Option<OddsLink>)> = vec![(start, 0, None)];
        color[start] = GRAY;
        while let Some(top) = stack.last_mut() {
            let (c, i) = (top.0, top.1);
            if i < successors[c].len() {
                top.1 += 1;
                let (d, e) = successors[c][i].clone();
                match color[d] {
                    WHITE => {
                        color[d] = GRAY;
                        stack.push((d, 0, Some(e)));
                    }
                    GRAY => {
                        let pos = stack.iter().position(|f| f.0 == d).unwrap();
                        let mut zero_edges: Vec<OddsLink> = stack[pos + 1..]
                            .iter()
                            .map(|f| f.2.clone().unwrap())
                            .collect();
                        zero_edges.push(e);
                        let mut links = Vec::new();
                        let m = zero_edges.len();
                        for j in 0..m {
                            let e = &zero_edges[j];
                            let next = &zero_edges[(j + 1) % m];
                            links.push(e.clone());
                            links.extend(forest.tree_path(e.to, next.from));
                        }
                        return ZeroStructure::Violation(oriented_violation(links));
                    }
                    _ => {}
                }
            } else {
                color[c] = BLACK;
                stack.pop();
            }
        }
    }
    ZeroStructure::Acyclic(Condensation { successors })
}

fn levels_of(condensation: &Condensation, forest: &FiniteForest, n: usize) -> PlausibilityPartition {
    let k = forest.members.len();
    let mut level: Vec<Option<usize>> = vec![None; k];
    fn visit(c: usize, succ: &[Vec<(usize, OddsLink)>], level: &mut [Option<usize>]) -> usize {
        if let Some(l) = level[c] {
            return l;
        }
        let l = succ[c]
            .iter()
            .map(|(d, _)| visit(*d, succ, level) + 1)
            .max()
            .unwrap_or(0);
        level[c] = Some(l);
        l
    }
    for c in 0..k {
        visit(c, &condensation.successors, &mut level);
    }
    let depth = level.iter().map(|l| l.unwrap()).max().unwrap_or(0) + 1;
    let mut levels = vec![Vec::new(); depth];
    for s in 0..n {
        levels[level[forest.component[s]].unwrap()].push(StateId(s));
    }
    PlausibilityPartition { levels }
}

/// Decides whether every generalized self-odds ratio equals one.
pub fn check_coherence(graph: &CoherenceGraph) -> Coherence {
    let forest = FiniteForest::span(graph);

    for e in graph.edges() {
        let ExtendedRatio::Finite(v) = &e.value else {
            continue;
        };
        let implied = &forest.potential[e.from.0] / &forest.potential[e.to.0];
        if implied != *v {
            let mut links = vec![e.clone()];
            links.extend(forest.tree_path(e.to, e.from));
            return Coherence::Violation(oriented_violation(links));
        }
    }

    let condensation = match condense(graph, &forest) {
        ZeroStructure::Acyclic(c) => c,
        ZeroStructure::Violation(v) => return Coherence::Violation(v),
    };
    let partition = levels_of(&condensation, &forest, graph.num_states());

    let mut potentials = forest.potential.clone();
    for level in partition.levels() {
        let total: Rational = level.iter().map(|s| &forest.potential[s.0]).sum();
        for s in level {
            potentials[s.0] = &forest.potential[s.0] / &total;
        }
    }
    Coherence::Certificate(CoherenceCertificate {
        partition,
        potentials,
    })
}

/// The plausibility partition of a graph without zero-odds cycles.
pub fn plausibility_levels(graph: &CoherenceGraph) -> Result<PlausibilityPartition, OddsError> {
    let forest = FiniteForest::span(graph);
    match condense(graph, &forest) {
        ZeroStructure::Acyclic(c) => Ok(levels_of(&c, &forest, graph.num_states())),
        ZeroStructure::Violation(_) => Err(OddsError::ZeroCycle),
    }
}
