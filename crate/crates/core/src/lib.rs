//! Exact verification of belief systems over learning environments.
//!
//! Given states, a forest of contingencies with objective path distributions
//! per state, and one belief per contingency, this crate decides complete
//! consistency (one lexicographic conditional probability system explains
//! every belief via Bayes rule with reach probabilities) and forward
//! consistency (conditioning along paths). It extracts a rationalizing LCPS
//! when one exists and otherwise synthesizes a verified Dutch book, in
//! expected or deterministic terms. All verdicts use exact rationals.
//!
//! Data-parallel loops go through [`par`]; disable the default `parallel`
//! feature for a purely sequential build.

pub mod consistency;
pub mod cps;
pub mod dutchbook;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod model;
pub mod odds;
pub mod par;
pub mod rational;
pub mod simulate;

pub use consistency::{
    check_complete_consistency, check_forward_consistency, derive_beliefs, extract_lcps, verify_ccbs,
    CompleteConsistency, ForwardViolation, Lcps,
};
pub use cps::{check_siniscalchi, cps_to_lcps, lcps_to_cps, validate_complete_cps, CompleteCps};
pub use dutchbook::{
    accepts_system, classify_deterministic, classify_dutch_book, synthesize_deterministic_db, synthesize_dutch_book,
    Gamble, GambleSystem, SynthesisParams,
};
pub use model::{
    validate_belief_system, BeliefSystem, ContingencyForest, Distribution, LearningEnvironment, NodeId, StateId,
    StateSpace,
};
pub use odds::{build_coherence_graph, check_coherence, discounted_odds_ratio, generalized_odds_ratio, ExtendedRatio};
pub use par::Execution;
pub use rational::Rational;
pub use simulate::{compare_to_exact, run_rounds, SimConfig, SimMode, SimReport};
