//! JSON documents and canonical rendering.
//!
//! Rationals are strings (`"p/q"` or `"n"`). Keys are written in canonical
//! state and contingency order, and zero entries are omitted, so equal values
//! always render to identical bytes.

use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::consistency::{ForwardViolation, Lcps};
use crate::cps::{event_states, CompleteCps, CpsViolation, SiniscalchiViolation};
use crate::dutchbook::{AcceptanceReport, BookVerdict, DeterministicVerdict, Gamble, GambleSystem};
use crate::model::{
    BeliefSystem, BeliefViolation, BeliefViolationKind, ContingencyForest, Distribution, LearningEnvironment, ModelError,
    StateId, StateSpace,
};
use crate::odds::{CoherenceCertificate, CoherenceViolation};
use crate::rational::Rational;
use crate::simulate::{Deviation, SimReport};

type Row = IndexMap<String, Rational>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message} (at {location})")]
pub struct DocError {
    pub code: &'static str,
    pub message: String,
    pub location: String,
}

impl DocError {
    pub fn new(code: &'static str, message: impl Into<String>, location: impl Into<String>) -> Self {
        DocError {
            code,
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"code": self.code, "message": self.message, "location": self.location})
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContingencyDoc {
    pub id: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDoc {
    pub states: Vec<String>,
    pub contingencies: Vec<ContingencyDoc>,
    pub eta: IndexMap<String, Row>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefsDoc {
    pub beliefs: IndexMap<String, Row>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcpsDoc {
    pub levels: Vec<Row>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpsDoc {
    pub conditionals: IndexMap<String, Row>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GamblesDoc {
    pub gambles: IndexMap<String, Row>,
}

/// Parses a document, mapping serde failures to a `parse` error.
pub fn parse_doc<T: for<'de> Deserialize<'de>>(text: &str, location: &str) -> Result<T, DocError> {
    serde_json::from_str(text).map_err(|e| DocError::new("parse", e.to_string(), location))
}

fn state_row(states: &StateSpace, row: &Row, location: &str) -> Result<Vec<Rational>, DocError> {
    let mut out = vec![Rational::zero(); states.len()];
    for (name, mass) in row {
        let s = states
            .id(name)
            .ok_or_else(|| DocError::new("unknown-state", format!("unknown state {name:?}"), format!("{location}.{name}")))?;
        out[s.0] = mass.clone();
    }
    Ok(out)
}

pub fn environment_from_doc(doc: &EnvironmentDoc) -> Result<LearningEnvironment, DocError> {
    let model = |e: ModelError, at: &str| DocError::new("model", e.to_string(), at);
    let states = StateSpace::new(doc.states.iter().cloned()).map_err(|e| model(e, "states"))?;
    let forest = ContingencyForest::new(doc.contingencies.iter().map(|c| (c.id.clone(), c.parent.clone())))
        .map_err(|e| model(e, "contingencies"))?;
    for name in doc.eta.keys() {
        if states.id(name).is_none() {
            return Err(DocError::new("unknown-state", format!("unknown state {name:?}"), format!("eta.{name}")));
        }
    }
    let mut eta = Vec::with_capacity(states.len());
    for name in states.names() {
        let row = doc
            .eta
            .get(name)
            .ok_or_else(|| DocError::new("model", format!("no path distribution for state {name:?}"), format!("eta.{name}")))?;
        let mut masses = vec![Rational::zero(); forest.paths().len()];
        for (leaf, mass) in row {
            let at = format!("eta.{name}.{leaf}");
            let h = forest
                .id(leaf)
                .ok_or_else(|| DocError::new("unknown-path", format!("unknown contingency {leaf:?}"), at.clone()))?;
            let path = forest
                .path_index_of_leaf(h)
                .ok_or_else(|| DocError::new("unknown-path", format!("{leaf:?} is not a leaf"), at))?;
            masses[path] = mass.clone();
        }
        eta.push(masses);
    }
    LearningEnvironment::build(states, forest, eta).map_err(|e| model(e, "eta"))
}

/// Beliefs from a document; structural problems become violations so that
/// validation can report them all.
pub fn beliefs_from_doc(env: &LearningEnvironment, doc: &BeliefsDoc) -> Result<BeliefSystem, Vec<BeliefViolation>> {
    let mut violations = Vec::new();
    for name in doc.beliefs.keys() {
        if env.forest().id(name).is_none() {
            violations.push(BeliefViolation {
                contingency: name.clone(),
                kind: BeliefViolationKind::UnknownContingency,
            });
        }
    }
    let mut beliefs = Vec::new();
    for h in env.forest().ids() {
        let name = env.forest().name(h);
        let violation = |kind| BeliefViolation {
            contingency: name.to_string(),
            kind,
        };
        let Some(row) = doc.beliefs.get(name) else {
            violations.push(violation(BeliefViolationKind::Undefined));
            continue;
        };
        let mut masses = vec![Rational::zero(); env.num_states()];
        let mut ok = true;
        for (s, m) in row {
            match env.states().id(s) {
                Some(id) => masses[id.0] = m.clone(),
                None => {
                    violations.push(violation(BeliefViolationKind::UnknownState(s.clone())));
                    ok = false;
                }
            }
        }
        match Distribution::new(masses) {
            Ok(d) if ok => beliefs.push(d),
            Ok(_) => {}
            Err(e) => violations.push(violation(BeliefViolationKind::NotADistribution(e))),
        }
    }
    if violations.is_empty() {
        let mu = BeliefSystem::new(beliefs);
        crate::model::validate_belief_system(env, &mu)?;
        Ok(mu)
    } else {
        Err(violations)
    }
}

pub fn lcps_from_doc(states: &StateSpace, doc: &LcpsDoc) -> Result<Lcps, DocError> {
    let levels = doc
        .levels
        .iter()
        .enumerate()
        .map(|(m, row)| {
            let at = format!("levels[{m}]");
            let masses = state_row(states, row, &at)?;
            Distribution::new(masses).map_err(|e| DocError::new("lcps", e.to_string(), at))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Lcps::new(levels).map_err(|e| DocError::new("lcps", e.to_string(), "levels"))
}

/// Parses a comma-joined event key.
fn event_mask(states: &StateSpace, key: &str) -> Option<u32> {
    let mut mask = 0u32;
    for name in key.split(',') {
        let s = states.id(name.trim())?;
        if s.0 >= 32 {
            return None;
        }
        mask |= 1 << s.0;
    }
    (mask != 0).then_some(mask)
}

fn event_key(states: &StateSpace, event: u32) -> String {
    event_states(event)
        .into_iter()
        .map(|s| states.name(s))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn cps_from_doc(states: &StateSpace, doc: &CpsDoc) -> Result<CompleteCps, DocError> {
    let n = states.len();
    if n > crate::cps::MAX_CPS_STATES {
        return Err(DocError::new("cps", format!("at most {} states are supported", crate::cps::MAX_CPS_STATES), "conditionals"));
    }
    let mut rows: Vec<Option<Distribution>> = vec![None; (1usize << n) - 1];
    for (key, row) in &doc.conditionals {
        let at = format!("conditionals.{key}");
        let mask = event_mask(states, key).ok_or_else(|| DocError::new("cps", format!("bad event key {key:?}"), at.clone()))?;
        let slot = &mut rows[mask as usize - 1];
        if slot.is_some() {
            return Err(DocError::new("cps", format!("event {key:?} given twice"), at));
        }
        let masses = state_row(states, row, &at)?;
        *slot = Some(Distribution::new(masses).map_err(|e| DocError::new("cps", e.to_string(), at))?);
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| {
                let key = event_key(states, i as u32 + 1);
                DocError::new("cps", format!("missing conditional on {{{key}}}"), format!("conditionals.{key}"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    CompleteCps::new(n, rows).map_err(|e| DocError::new("cps", e.to_string(), "conditionals"))
}

/// Omitted contingencies carry the zero gamble.
pub fn gambles_from_doc(env: &LearningEnvironment, doc: &GamblesDoc) -> Result<GambleSystem, DocError> {
    let mut g = GambleSystem::zero(env);
    for (name, row) in &doc.gambles {
        let at = format!("gambles.{name}");
        let h = env
            .forest()
            .id(name)
            .ok_or_else(|| DocError::new("unknown-contingency", format!("unknown contingency {name:?}"), at.clone()))?;
        *g.gamble_mut(h) = Gamble::new(state_row(env.states(), row, &at)?);
    }
    crate::dutchbook::validate_gamble_system(env, &g).map_err(|e| DocError::new("gamble", e.to_string(), "gambles"))?;
    Ok(g)
}

fn rat(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn sparse_row(states: &StateSpace, values: &[Rational]) -> Value {
    let mut m = Map::new();
    for s in states.ids() {
        if !values[s.0].is_zero() {
            m.insert(states.name(s).to_string(), rat(&values[s.0]));
        }
    }
    Value::Object(m)
}

pub fn environment_to_json(env: &LearningEnvironment) -> Value {
    let forest = env.forest();
    let contingencies: Vec<Value> = forest
        .ids()
        .map(|h| json!({"id": forest.name(h), "parent": forest.parent(h).map(|p| forest.name(p))}))
        .collect();
    let mut eta = Map::new();
    for s in env.states().ids() {
        let mut row = Map::new();
        for (l, path) in forest.paths().iter().enumerate() {
            let m = env.eta(s, l);
            if !m.is_zero() {
                row.insert(forest.name(path.leaf).to_string(), rat(m));
            }
        }
        eta.insert(env.states().name(s).to_string(), Value::Object(row));
    }
    json!({"states": env.states().names(), "contingencies": contingencies, "eta": eta})
}

pub fn beliefs_to_json(env: &LearningEnvironment, mu: &BeliefSystem) -> Value {
    let mut m = Map::new();
    for h in env.forest().ids() {
        m.insert(env.forest().name(h).to_string(), sparse_row(env.states(), mu.belief(h).masses()));
    }
    json!({"beliefs": m})
}

pub fn lcps_to_json(states: &StateSpace, lcps: &Lcps) -> Value {
    let levels: Vec<Value> = lcps.levels().iter().map(|l| sparse_row(states, l.masses())).collect();
    json!({"levels": levels})
}

pub fn cps_to_json(states: &StateSpace, cps: &CompleteCps) -> Value {
    let mut m = Map::new();
    for (i, row) in cps.rows().iter().enumerate() {
        m.insert(event_key(states, i as u32 + 1), sparse_row(states, row.masses()));
    }
    json!({"conditionals": m})
}

pub fn gambles_to_json(env: &LearningEnvironment, g: &GambleSystem) -> Value {
    let mut m = Map::new();
    for h in env.forest().ids() {
        m.insert(env.forest().name(h).to_string(), sparse_row(env.states(), g.gamble(h).payoffs()));
    }
    json!({"gambles": m})
}

pub fn witness_to_json(env: &LearningEnvironment, v: &CoherenceViolation) -> Value {
    let cycle: Vec<Value> = v
        .cycle
        .links()
        .iter()
        .map(|l| {
            json!({
                "h": env.forest().name(l.h),
                "from": env.states().name(l.from),
                "to": env.states().name(l.to),
                "value": l.value.to_string(),
            })
        })
        .collect();
    json!({"cycle": cycle, "product": v.product.to_string()})
}

pub fn certificate_to_json(env: &LearningEnvironment, c: &CoherenceCertificate) -> Value {
    let levels: Vec<Value> = c
        .partition
        .levels()
        .iter()
        .map(|l| Value::from(l.iter().map(|&s| env.states().name(s)).collect::<Vec<_>>()))
        .collect();
    json!({"levels": levels, "potentials": sparse_row(env.states(), &c.potentials)})
}

pub fn forward_violation_to_json(env: &LearningEnvironment, v: &ForwardViolation) -> Value {
    json!({
        "h": env.forest().name(v.h),
        "hprime": env.forest().name(v.h_prime),
        "s": env.states().name(v.s),
        "lhs": rat(&v.lhs),
        "rhs": rat(&v.rhs),
    })
}

pub fn belief_violations_to_json(violations: &[BeliefViolation]) -> Value {
    Value::from(
        violations
            .iter()
            .map(|v| json!({"h": v.contingency, "reason": v.kind.to_string()}))
            .collect::<Vec<_>>(),
    )
}

pub fn cps_violation_to_json(states: &StateSpace, v: &CpsViolation) -> Value {
    match v {
        CpsViolation::Support { event, mass_inside } => json!({
            "kind": "support",
            "c": event_key(states, *event),
            "mass": rat(mass_inside),
        }),
        CpsViolation::ChainRule { c, d, state, lhs, rhs } => json!({
            "kind": "chain-rule",
            "c": event_key(states, *c),
            "d": event_key(states, *d),
            "e": states.name(*state),
            "lhs": rat(lhs),
            "rhs": rat(rhs),
        }),
    }
}

pub fn siniscalchi_violation_to_json(env: &LearningEnvironment, v: &SiniscalchiViolation) -> Value {
    json!({
        "sequence": v.sequence.iter().map(|&h| env.forest().name(h)).collect::<Vec<_>>(),
        "event": v.event.iter().map(|&s| env.states().name(s)).collect::<Vec<_>>(),
        "lhs": rat(&v.lhs),
        "rhs": rat(&v.rhs),
    })
}

fn per_state_map(env: &LearningEnvironment, values: &[Rational]) -> Value {
    let mut m = Map::new();
    for s in env.states().ids() {
        m.insert(env.states().name(s).to_string(), rat(&values[s.0]));
    }
    Value::Object(m)
}

pub fn acceptance_to_json(env: &LearningEnvironment, report: &AcceptanceReport) -> Value {
    let mut m = Map::new();
    for h in env.forest().ids() {
        let c = &report.per_contingency[h.0];
        m.insert(
            env.forest().name(h).to_string(),
            json!({"expectation": rat(&c.expectation), "accepted": c.accepted}),
        );
    }
    Value::Object(m)
}

pub fn book_verdict_to_json(env: &LearningEnvironment, v: &BookVerdict) -> Value {
    json!({"perState": per_state_map(env, &v.per_state), "isDutchBook": v.is_dutch_book})
}

pub fn deterministic_verdict_to_json(env: &LearningEnvironment, v: &DeterministicVerdict) -> Value {
    let per_path: Vec<Value> = v
        .per_path
        .iter()
        .map(|p| {
            json!({
                "state": env.states().name(p.state),
                "path": env.forest().name(env.forest().paths()[p.path].leaf),
                "sum": rat(&p.sum),
            })
        })
        .collect();
    json!({"perPath": per_path, "isDeterministicDB": v.is_deterministic})
}

pub fn sim_report_to_json(env: &LearningEnvironment, report: &SimReport, deviations: &[Deviation]) -> Value {
    let mut m = Map::new();
    for r in &report.per_state {
        let dev = deviations.iter().find(|d| d.state == r.state);
        m.insert(
            env.states().name(r.state).to_string(),
            json!({
                "count": r.count,
                "empiricalMean": r.empirical_mean.as_ref().map(rat),
                "empiricalMeanDecimal": r.empirical_mean_f64,
                "exactExpectation": rat(&r.exact_expectation),
                "ungatedEmpiricalMean": r.ungated_empirical_mean.as_ref().map(rat),
                "ungatedExpectation": rat(&r.ungated_expectation),
                "sampleStdDev": r.sample_std_dev,
                "standardErrors": dev.map(|d| if d.standard_errors.is_finite() { json!(d.standard_errors) } else { json!("inf") }),
                "flagged": dev.map(|d| d.flagged),
            }),
        );
    }
    json!({"rounds": report.rounds, "seed": report.seed, "perState": m})
}

/// Pretty JSON with a trailing newline.
pub fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn state_by_name(env: &LearningEnvironment, name: &str) -> Result<StateId, DocError> {
    env.states()
        .id(name)
        .ok_or_else(|| DocError::new("unknown-state", format!("unknown state {name:?}"), "--state"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::q;

    const LARRY: &str = r#"{
        "states": ["sq", "ma", "pa"],
        "contingencies": [
            {"id": "sq", "parent": null}, {"id": "ma", "parent": null}, {"id": "pa", "parent": null},
            {"id": "sm", "parent": null}, {"id": "mp", "parent": null}, {"id": "ps", "parent": null}
        ],
        "eta": {
            "sq": {"sq": "1/3", "sm": "1/3", "ps": "1/3"},
            "ma": {"ma": "1/3", "sm": "1/3", "mp": "1/3"},
            "pa": {"pa": "1/3", "mp": "1/3", "ps": "1/3"}
        }
    }"#;

    #[test]
    fn environment_round_trip() {
        let doc: EnvironmentDoc = parse_doc(LARRY, "larry.json").unwrap();
        let env = environment_from_doc(&doc).unwrap();
        assert_eq!(env, fixtures::env_larry());
        let again: EnvironmentDoc = serde_json::from_value(environment_to_json(&env)).unwrap();
        assert_eq!(environment_from_doc(&again).unwrap(), env);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = LARRY.replacen("\"states\"", "\"extra\": 1, \"states\"", 1);
        let err = parse_doc::<EnvironmentDoc>(&bad, "x").unwrap_err();
        assert_eq!(err.code, "parse");
        assert!(err.message.contains("unknown field"));
    }

    #[test]
    fn bad_eta_is_located() {
        let bad = LARRY.replacen("\"sq\": \"1/3\", \"sm\"", "\"zz\": \"1/3\", \"sm\"", 1);
        let err = environment_from_doc(&parse_doc(&bad, "x").unwrap()).unwrap_err();
        assert_eq!(err.location, "eta.sq.zz");
    }

    #[test]
    fn beliefs_round_trip_and_violations() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let doc: BeliefsDoc = serde_json::from_value(beliefs_to_json(&env, &mu)).unwrap();
        assert_eq!(beliefs_from_doc(&env, &doc).unwrap(), mu);

        let mut doc = doc;
        doc.beliefs.shift_remove("mp");
        doc.beliefs.get_mut("sq").unwrap().insert("ma".into(), q(1, 2));
        doc.beliefs.get_mut("sq").unwrap().insert("sq".into(), q(1, 2));
        let v = beliefs_from_doc(&env, &doc).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, BeliefViolationKind::Undefined);
        doc.beliefs.insert("mp".into(), [("ma".to_string(), q(1, 1))].into_iter().collect());
        let v = beliefs_from_doc(&env, &doc).unwrap_err();
        assert!(matches!(v[0].kind, BeliefViolationKind::MassOutsideSupport { .. }));
    }

    #[test]
    fn cps_and_lcps_documents() {
        let env = fixtures::env_larry();
        let lcps = fixtures::lcps_lex();
        let text = render(&lcps_to_json(env.states(), &lcps));
        assert_eq!(lcps_from_doc(env.states(), &parse_doc(&text, "x").unwrap()).unwrap(), lcps);
        let cps = crate::cps::lcps_to_cps(&lcps).unwrap();
        let value = cps_to_json(env.states(), &cps);
        assert_eq!(value["conditionals"]["ma,pa"], json!({"ma": "2/3", "pa": "1/3"}));
        let back = cps_from_doc(env.states(), &serde_json::from_value(value.clone()).unwrap()).unwrap();
        assert_eq!(back, cps);
        let mut missing: CpsDoc = serde_json::from_value(value).unwrap();
        missing.conditionals.shift_remove("sq,ma");
        assert_eq!(cps_from_doc(env.states(), &missing).unwrap_err().location, "conditionals.sq,ma");
    }

    #[test]
    fn witness_rendering() {
        let env = fixtures::env_larry();
        let mu = fixtures::bel_regret(&env);
        let crate::odds::Coherence::Violation(v) =
            crate::odds::check_coherence(&crate::odds::build_coherence_graph(&env, &mu))
        else {
            panic!()
        };
        let j = witness_to_json(&env, &v);
        assert_eq!(j["product"], "1/27");
        assert_eq!(j["cycle"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn gambles_round_trip() {
        let env = fixtures::env_larry();
        let book = fixtures::larry_book(&env);
        let doc: GamblesDoc = serde_json::from_value(gambles_to_json(&env, &book)).unwrap();
        assert_eq!(gambles_from_doc(&env, &doc).unwrap(), book);
    }
}
