//! States, the contingency forest, learning paths, objective path
//! distributions and the derived reach tables.
//!
//! Everything here is immutable once built. Derived tables (reach
//! probabilities, consistent-state sets, consistent paths) are computed
//! eagerly in [`LearningEnvironment::build`].

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::rational::Rational;

/// Index of a state in its [`StateSpace`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

/// Index of a contingency in its [`ContingencyForest`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("state space is empty")]
    EmptyStateSpace,
    #[error("duplicate state {0:?}")]
    DuplicateState(String),
    #[error("contingency forest is empty")]
    EmptyForest,
    #[error("duplicate contingency {0:?}")]
    DuplicateContingency(String),
    #[error("contingency {node:?} names unknown parent {parent:?}")]
    UnknownParent { node: String, parent: String },
    #[error("cycle in contingency forest through {0:?}")]
    CycleInForest(String),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("unknown contingency {0:?}")]
    UnknownContingency(String),
    #[error("{0:?} is not a leaf contingency, so it does not name a learning path")]
    UnknownPath(String),
    #[error("no path distribution given for state {0:?}")]
    MissingEta(String),
    #[error("path distribution of state {state:?} has {got} entries, expected {expected}")]
    EtaShape {
        state: String,
        got: usize,
        expected: usize,
    },
    #[error("negative path probability {value} for state {state:?} on path {path:?}")]
    NegativeEta {
        state: String,
        path: String,
        value: Rational,
    },
    #[error("path distribution of state {state:?} sums to {sum}, not 1")]
    EtaNotNormalized { state: String, sum: Rational },
    #[error("inconsistent contingency {0:?}: no state reaches it with positive probability")]
    InconsistentContingency(String),
}

/// The finite, ordered set of states. Order is canonical and drives every
/// deterministic tie-break downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    names: Vec<String>,
    index: HashMap<String, StateId>,
}

impl StateSpace {
    pub fn new<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ModelError::EmptyStateSpace);
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), StateId(i)).is_some() {
                return Err(ModelError::DuplicateState(name.clone()));
            }
        }
        Ok(StateSpace { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.names.len()).map(StateId)
    }
}

/// A root-to-leaf chain of contingencies, keyed by its leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningPath {
    pub leaf: NodeId,
    pub chain: Vec<NodeId>,
}

impl LearningPath {
    pub fn contains(&self, h: NodeId) -> bool {
        self.chain.contains(&h)
    }
}

/// The arborescence (possibly with several roots) of contingencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyForest {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    roots: Vec<NodeId>,
    paths: Vec<LearningPath>,
    /// `paths_through[h]` lists the indices of the paths whose chain contains h.
    paths_through: Vec<Vec<usize>>,
    path_of_leaf: Vec<Option<usize>>,
}

impl ContingencyForest {
    /// Builds the forest from `(id, parent)` pairs. The given order is the
    /// canonical contingency order; paths are ordered by their leaves.
    pub fn new<I, S>(nodes: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: Into<String>,
    {
        let raw: Vec<(String, Option<String>)> = nodes
            .into_iter()
            .map(|(n, p)| (n.into(), p.map(Into::into)))
            .collect();
        if raw.is_empty() {
            return Err(ModelError::EmptyForest);
        }
        let mut index = HashMap::with_capacity(raw.len());
        for (i, (name, _)) in raw.iter().enumerate() {
            if index.insert(name.clone(), NodeId(i)).is_some() {
                return Err(ModelError::DuplicateContingency(name.clone()));
            }
        }
        let mut parent = Vec::with_capacity(raw.len());
        for (name, p) in &raw {
            match p {
                None => parent.push(None),
                Some(p) => match index.get(p) {
                    Some(&pid) => parent.push(Some(pid)),
                    None => {
                        return Err(ModelError::UnknownParent {
                            node: name.clone(),
                            parent: p.clone(),
                        })
                    }
                },
            }
        }
        let n = raw.len();
        // Every node must reach a root within n steps.
        for start in 0..n {
            let mut cur = NodeId(start);
            let mut steps = 0;
            while let Some(p) = parent[cur.0] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(ModelError::CycleInForest(raw[start].0.clone()));
                }
            }
        }
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (i, p) in parent.iter().enumerate() {
            match p {
                Some(p) => children[p.0].push(NodeId(i)),
                None => roots.push(NodeId(i)),
            }
        }
        let mut paths = Vec::new();
        let mut paths_through = vec![Vec::new(); n];
        let mut path_of_leaf = vec![None; n];
        for leaf in (0..n).filter(|&i| children[i].is_empty()) {
            let mut chain = vec![NodeId(leaf)];
            let mut cur = NodeId(leaf);
            while let Some(p) = parent[cur.0] {
                chain.push(p);
                cur = p;
            }
            chain.reverse();
            let idx = paths.len();
            for h in &chain {
                paths_through[h.0].push(idx);
            }
            path_of_leaf[leaf] = Some(idx);
            paths.push(LearningPath {
                leaf: NodeId(leaf),
                chain,
            });
        }
        let names = raw.into_iter().map(|(n, _)| n).collect();
        Ok(ContingencyForest {
            names,
            index,
            parent,
            children,
            roots,
            paths,
            paths_through,
            path_of_leaf,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, h: NodeId) -> &str {
        &self.names[h.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len()).map(NodeId)
    }

    pub fn parent(&self, h: NodeId) -> Option<NodeId> {
        self.parent[h.0]
    }

    pub fn children(&self, h: NodeId) -> &[NodeId] {
        &self.children[h.0]
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn is_leaf(&self, h: NodeId) -> bool {
        self.children[h.0].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.paths.iter().map(|p| p.leaf)
    }

    /// `a ≺ b`: `a` is a proper ancestor of `b`.
    pub fn precedes(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = self.parent[b.0];
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.parent[p.0];
        }
        false
    }

    pub fn paths(&self) -> &[LearningPath] {
        &self.paths
    }

    /// Path indices of `L(h)`.
    pub fn paths_through(&self, h: NodeId) -> &[usize] {
        &self.paths_through[h.0]
    }

    pub fn path_index_of_leaf(&self, leaf: NodeId) -> Option<usize> {
        self.path_of_leaf[leaf.0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("negative mass {value} at index {index}")]
    Negative { index: usize, value: Rational },
    #[error("masses sum to {0}, not 1")]
    NotNormalized(Rational),
    #[error("total weight is not positive")]
    NoMass,
}

/// A probability vector with exact masses, indexed densely (by state, or by
/// path for objective path distributions).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distribution {
    masses: Vec<Rational>,
}

impl Distribution {
    pub fn new(masses: Vec<Rational>) -> Result<Self, DistributionError> {
        for (index, m) in masses.iter().enumerate() {
            if m.is_negative() {
                return Err(DistributionError::Negative {
                    index,
                    value: m.clone(),
                });
            }
        }
        let total: Rational = masses.iter().sum();
        if !total.is_one() {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Distribution { masses })
    }

    /// Rescales non-negative weights to total mass one.
    pub fn from_weights(weights: Vec<Rational>) -> Result<Self, DistributionError> {
        for (index, m) in weights.iter().enumerate() {
            if m.is_negative() {
                return Err(DistributionError::Negative {
                    index,
                    value: m.clone(),
                });
            }
        }
        let total: Rational = weights.iter().sum();
        if !total.is_positive() {
            return Err(DistributionError::NoMass);
        }
        Ok(Distribution {
            masses: weights.into_iter().map(|w| w / &total).collect(),
        })
    }

    pub fn point(len: usize, at: usize) -> Self {
        let mut masses = vec![Rational::zero(); len];
        masses[at] = Rational::one();
        Distribution { masses }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, i: usize) -> &Rational {
        &self.masses[i]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.masses
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_positive())
            .map(|(i, _)| i)
    }

    /// Total mass on the indices where `member` holds.
    pub fn mass_where(&self, member: impl Fn(usize) -> bool) -> Rational {
        self.masses
            .iter()
            .enumerate()
            .filter(|(i, _)| member(*i))
            .map(|(_, m)| m)
            .sum()
    }

    /// Conditions on the event `member`; `None` when the event is null.
    pub fn condition(&self, member: impl Fn(usize) -> bool) -> Option<Distribution> {
        let weights: Vec<Rational> = self
            .masses
            .iter()
            .enumerate()
            .map(|(i, m)| if member(i) { m.clone() } else { Rational::zero() })
            .collect();
        Distribution::from_weights(weights).ok()
    }
}

/// A learning environment: states, contingencies and objective path
/// distributions, with the derived reach tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningEnvironment {
    states: StateSpace,
    forest: ContingencyForest,
    /// `eta[s][path]`.
    eta: Vec<Vec<Rational>>,
    /// `reach[h][s]` = p(h|s).
    reach: Vec<Vec<Rational>>,
    consistent: Vec<Vec<bool>>,
    consistent_states: Vec<Vec<StateId>>,
    consistent_paths: Vec<Vec<usize>>,
}

impl LearningEnvironment {
    /// Validates the inputs and computes every derived table. `eta[s]` is the
    /// path distribution of state `s`, indexed like [`ContingencyForest::paths`].
    pub fn build(
        states: StateSpace,
        forest: ContingencyForest,
        eta: Vec<Vec<Rational>>,
    ) -> Result<Self, ModelError> {
        if eta.len() != states.len() {
            let missing = states.names().get(eta.len()).cloned().unwrap_or_default();
            return Err(ModelError::MissingEta(missing));
        }
        let n_paths = forest.paths().len();
        for (s, row) in eta.iter().enumerate() {
            let name = states.name(StateId(s)).to_string();
            if row.len() != n_paths {
                return Err(ModelError::EtaShape {
                    state: name,
                    got: row.len(),
                    expected: n_paths,
                });
            }
            for (p, v) in row.iter().enumerate() {
                if v.is_negative() {
                    return Err(ModelError::NegativeEta {
                        state: name,
                        path: forest.name(forest.paths()[p].leaf).to_string(),
                        value: v.clone(),
                    });
                }
            }
            let sum: Rational = row.iter().sum();
            if !sum.is_one() {
                return Err(ModelError::EtaNotNormalized { state: name, sum });
            }
        }

        let reach: Vec<Vec<Rational>> = forest
            .ids()
            .map(|h| {
                (0..states.len())
                    .map(|s| forest.paths_through(h).iter().map(|&p| &eta[s][p]).sum())
                    .collect()
            })
            .collect();
        let consistent: Vec<Vec<bool>> = reach
            .iter()
            .map(|row| row.iter().map(Rational::is_positive).collect())
            .collect();
        let consistent_states: Vec<Vec<StateId>> = consistent
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, c)| **c)
                    .map(|(s, _)| StateId(s))
                    .collect()
            })
            .collect();
        if let Some(h) = consistent_states.iter().position(Vec::is_empty) {
            return Err(ModelError::InconsistentContingency(
                forest.name(NodeId(h)).to_string(),
            ));
        }
        let consistent_paths = eta
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_positive())
                    .map(|(p, _)| p)
                    .collect()
            })
            .collect();
        Ok(LearningEnvironment {
            states,
            forest,
            eta,
            reach,
            consistent,
            consistent_states,
            consistent_paths,
        })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn forest(&self) -> &ContingencyForest {
        &self.forest
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_contingencies(&self) -> usize {
        self.forest.len()
    }

    /// η^s(l) for the path with index `path`.
    pub fn eta(&self, s: StateId, path: usize) -> &Rational {
        &self.eta[s.0][path]
    }

    pub fn eta_row(&self, s: StateId) -> &[Rational] {
        &self.eta[s.0]
    }

    /// p(h|s).
    pub fn reach(&self, h: NodeId, s: StateId) -> &Rational {
        &self.reach[h.0][s.0]
    }

    /// Membership test for S(h).
    pub fn is_consistent(&self, h: NodeId, s: StateId) -> bool {
        self.consistent[h.0][s.0]
    }

    /// S(h), in canonical state order.
    pub fn consistent_states(&self, h: NodeId) -> &[StateId] {
        &self.consistent_states[h.0]
    }

    /// Indices of the paths in L(s).
    pub fn consistent_paths(&self, s: StateId) -> &[usize] {
        &self.consistent_paths[s.0]
    }

    /// p(h|s) looked up by name.
    pub fn reach_probability(&self, h: &str, s: &str) -> Result<Rational, ModelError> {
        let hid = self
            .forest
            .id(h)
            .ok_or_else(|| ModelError::UnknownContingency(h.to_string()))?;
        let sid = self
            .states
            .id(s)
            .ok_or_else(|| ModelError::UnknownState(s.to_string()))?;
        Ok(self.reach(hid, sid).clone())
    }

    /// True when every contingency is reached with the same probability by
    /// all of its consistent states.
    pub fn is_uniform_reach(&self) -> bool {
        self.forest.ids().all(|h| {
            let states = self.consistent_states(h);
            states
                .windows(2)
                .all(|w| self.reach(h, w[0]) == self.reach(h, w[1]))
        })
    }

    /// True when, at every non-leaf contingency, each consistent state
    /// continues to a single child.
    pub fn has_deterministic_continuation(&self) -> bool {
        self.forest.ids().filter(|&h| !self.forest.is_leaf(h)).all(|h| {
            self.consistent_states(h).iter().all(|&s| {
                self.forest
                    .children(h)
                    .iter()
                    .filter(|&&c| self.is_consistent(c, s))
                    .count()
                    <= 1
            })
        })
    }
}

/// One belief per contingency, indexed like the environment's forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefSystem {
    beliefs: Vec<Distribution>,
}

impl BeliefSystem {
    pub fn new(beliefs: Vec<Distribution>) -> Self {
        BeliefSystem { beliefs }
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn belief(&self, h: NodeId) -> &Distribution {
        &self.beliefs[h.0]
    }

    pub fn beliefs(&self) -> &[Distribution] {
        &self.beliefs
    }

    /// μ(s|h).
    pub fn mass(&self, h: NodeId, s: StateId) -> &Rational {
        self.beliefs[h.0].mass(s.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BeliefViolationKind {
    /// No belief given for the contingency.
    Undefined,
    /// The belief has the wrong number of entries.
    Dimension { got: usize, expected: usize },
    /// Positive mass on a state outside S(h).
    MassOutsideSupport { state: String, mass: Rational },
    UnknownState(String),
    UnknownContingency,
    NotADistribution(DistributionError),
}

impl fmt::Display for BeliefViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeliefViolationKind::Undefined => write!(f, "undefined belief"),
            BeliefViolationKind::Dimension { got, expected } => {
                write!(f, "belief has {got} entries, expected {expected}")
            }
            BeliefViolationKind::MassOutsideSupport { state, mass } => {
                write!(f, "mass {mass} on inconsistent state {state:?}")
            }
            BeliefViolationKind::UnknownState(s) => write!(f, "unknown state {s:?}"),
            BeliefViolationKind::UnknownContingency => write!(f, "unknown contingency"),
            BeliefViolationKind::NotADistribution(e) => write!(f, "not a distribution: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefViolation {
    pub contingency: String,
    pub kind: BeliefViolationKind,
}

impl fmt::Display for BeliefViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.contingency, self.kind)
    }
}

/// Checks that `mu` defines a belief at every contingency with μ(S(h)|h) = 1.
pub fn validate_belief_system(
    env: &LearningEnvironment,
    mu: &BeliefSystem,
) -> Result<(), Vec<BeliefViolation>> {
    let mut violations = Vec::new();
    for h in env.forest().ids() {
        let contingency = env.forest().name(h).to_string();
        let Some(belief) = mu.beliefs.get(h.0) else {
            violations.push(BeliefViolation {
                contingency,
                kind: BeliefViolationKind::Undefined,
            });
            continue;
        };
        if belief.len() != env.num_states() {
            violations.push(BeliefViolation {
                contingency,
                kind: BeliefViolationKind::Dimension {
                    got: belief.len(),
                    expected: env.num_states(),
                },
            });
            continue;
        }
        for s in env.states().ids() {
            let m = belief.mass(s.0);
            if m.is_positive() && !env.is_consistent(h, s) {
                violations.push(BeliefViolation {
                    contingency: contingency.clone(),
                    kind: BeliefViolationKind::MassOutsideSupport {
                        state: env.states().name(s).to_string(),
                        mass: m.clone(),
                    },
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
