//! `dutchbook`: check belief systems for consistency and build or verify
//! Dutch books from JSON documents.
//!
//! Exit codes: 0 positive verdict, 1 negative verdict, 2 input or usage
//! error. The verdict is printed as JSON on stdout (or written to `--out`);
//! diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dutchbook::consistency::{
    check_complete_consistency, check_forward_consistency, derive_beliefs, CompleteConsistency, ConsistencyError,
};
use dutchbook::cps::{check_siniscalchi, cps_to_lcps, lcps_to_cps, validate_complete_cps, SiniscalchiError};
use dutchbook::dutchbook::{
    accepts_system, classify_deterministic, classify_dutch_book, synthesize_deterministic_db, synthesize_dutch_book,
    SynthesisError, SynthesisParams,
};
use dutchbook::io::{self, DocError};
use dutchbook::model::{BeliefSystem, Distribution, LearningEnvironment};
use dutchbook::rational::Rational;
use dutchbook::simulate::{compare_to_exact, run_rounds, SimConfig, SimMode};

#[derive(Parser)]
#[command(name = "dutchbook", version, about = "Consistency checks and Dutch books for belief systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnvArg {
    /// Learning environment document.
    #[arg(long, value_name = "FILE")]
    env: PathBuf,
}

#[derive(Args)]
struct OutArg {
    /// Write the JSON verdict here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnvBeliefs {
    #[command(flatten)]
    env: EnvArg,
    /// Belief system document.
    #[arg(long, value_name = "FILE")]
    beliefs: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct BookArgs {
    #[command(flatten)]
    env: EnvArg,
    /// Gamble system document.
    #[arg(long, value_name = "FILE")]
    book: PathBuf,
    /// Also check that these beliefs accept every gamble.
    #[arg(long, value_name = "FILE")]
    beliefs: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    inputs: EnvBeliefs,
    /// Starting ε, as "p/q".
    #[arg(long, value_name = "RATIONAL")]
    epsilon: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an environment and, optionally, a belief system on it.
    Validate {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long, value_name = "FILE")]
        beliefs: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check that beliefs update by conditioning along every path.
    CheckForward(EnvBeliefs),
    /// Check complete consistency; prints an LCPS or a violating odds cycle.
    CheckComplete(EnvBeliefs),
    /// Print the LCPS that generates the beliefs.
    ExtractLcps(EnvBeliefs),
    /// Derive beliefs from an LCPS.
    DeriveBeliefs {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long, value_name = "FILE")]
        lcps: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Convert an LCPS to a complete conditional probability system.
    ToCps {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long, value_name = "FILE")]
        lcps: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Convert a complete conditional probability system to an LCPS.
    ToLcps {
        #[command(flatten)]
        env: EnvArg,
        #[arg(long, value_name = "FILE")]
        cps: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Siniscalchi's consistency condition (uniform-reach environments only).
    CheckSiniscalchi {
        #[command(flatten)]
        inputs: EnvBeliefs,
        /// Longest contingency sequence to check; defaults to the number of
        /// contingencies.
        #[arg(long, value_name = "N")]
        max_len: Option<usize>,
    },
    /// Classify a gamble system as an expected-terms Dutch book.
    VerifyBook(BookArgs),
    /// Classify a gamble system as a deterministic Dutch book.
    VerifyDeterministic(BookArgs),
    /// Build a Dutch book against completely inconsistent beliefs.
    SynthBook(SynthArgs),
    /// Build a deterministic Dutch book against beliefs that fail conditioning.
    SynthDeterministic(SynthArgs),
    /// Replay a gamble system over sampled learning paths.
    Simulate {
        #[command(flatten)]
        inputs: EnvBeliefs,
        #[arg(long, value_name = "FILE")]
        book: PathBuf,
        #[arg(long, value_name = "N")]
        seed: u64,
        #[arg(long, value_name = "N", default_value_t = 100_000)]
        rounds: u64,
        /// Fix the true state; otherwise states are drawn uniformly.
        #[arg(long, value_name = "NAME")]
        state: Option<String>,
    },
}

struct Outcome {
    exit: u8,
    payload: Value,
}

fn verdict(positive: bool, payload: Value) -> Outcome {
    Outcome {
        exit: if positive { 0 } else { 1 },
        payload,
    }
}

fn read(path: &Path) -> Result<String, DocError> {
    fs::read_to_string(path).map_err(|e| DocError::new("io", e.to_string(), path.display().to_string()))
}

fn load_env(arg: &EnvArg) -> Result<LearningEnvironment, DocError> {
    let loc = arg.env.display().to_string();
    io::environment_from_doc(&io::parse_doc(&read(&arg.env)?, &loc)?).map_err(|e| at_file(e, &loc))
}

fn at_file(mut e: DocError, file: &str) -> DocError {
    e.location = format!("{file}:{}", e.location);
    e
}

fn load_beliefs(env: &LearningEnvironment, path: &Path) -> Result<BeliefSystem, DocError> {
    let loc = path.display().to_string();
    let doc = io::parse_doc(&read(path)?, &loc)?;
    io::beliefs_from_doc(env, &doc).map_err(|v| {
        let message = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
        let first = v.first().map(|x| x.contingency.clone()).unwrap_or_default();
        DocError::new("invalid-beliefs", message, format!("{loc}:beliefs.{first}"))
    })
}

fn load_lcps(env: &LearningEnvironment, path: &Path) -> Result<dutchbook::Lcps, DocError> {
    let loc = path.display().to_string();
    io::lcps_from_doc(env.states(), &io::parse_doc(&read(path)?, &loc)?).map_err(|e| at_file(e, &loc))
}

fn load_book(env: &LearningEnvironment, path: &Path) -> Result<dutchbook::GambleSystem, DocError> {
    let loc = path.display().to_string();
    io::gambles_from_doc(env, &io::parse_doc(&read(path)?, &loc)?).map_err(|e| at_file(e, &loc))
}

fn parse_epsilon(raw: &Option<String>) -> Result<SynthesisParams, DocError> {
    let epsilon = raw
        .as_deref()
        .map(|s| s.parse::<Rational>().map_err(|e| DocError::new("usage", e.to_string(), "--epsilon")))
        .transpose()?;
    if epsilon.as_ref().is_some_and(|e| !e.is_positive()) {
        return Err(DocError::new("usage", "epsilon must be positive", "--epsilon"));
    }
    Ok(SynthesisParams {
        epsilon,
        ..SynthesisParams::default()
    })
}

fn consistency_error(e: ConsistencyError) -> DocError {
    match e {
        ConsistencyError::InvalidBeliefs(_) => DocError::new("invalid-beliefs", e.to_string(), "beliefs"),
        other => DocError::new("internal", other.to_string(), "check-complete"),
    }
}

fn synthesis_failure(e: SynthesisError) -> Result<Outcome, DocError> {
    match e {
        SynthesisError::PreconditionViolation(p) => Ok(verdict(false, json!({"synthesized": false, "reason": p.to_string()}))),
        SynthesisError::UnsupportedEnvironment => Err(DocError::new("unsupported-environment", e.to_string(), "env")),
        SynthesisError::InvalidBeliefs(_) => Err(DocError::new("invalid-beliefs", e.to_string(), "beliefs")),
        SynthesisError::Internal(_) => Err(DocError::new("internal", e.to_string(), "synthesis")),
    }
}

fn run(command: &Command) -> Result<Outcome, DocError> {
    match command {
        Command::Validate { env, beliefs, .. } => {
            let env = load_env(env)?;
            let mut payload = json!({
                "valid": true,
                "states": env.num_states(),
                "contingencies": env.num_contingencies(),
                "uniformReach": env.is_uniform_reach(),
                "deterministicContinuation": env.has_deterministic_continuation(),
            });
            if let Some(path) = beliefs {
                let loc = path.display().to_string();
                let doc = io::parse_doc(&read(path)?, &loc)?;
                if let Err(v) = io::beliefs_from_doc(&env, &doc) {
                    payload["valid"] = json!(false);
                    payload["violations"] = io::belief_violations_to_json(&v);
                    return Ok(verdict(false, payload));
                }
            }
            Ok(verdict(true, payload))
        }
        Command::CheckForward(a) => {
            let env = load_env(&a.env)?;
            let mu = load_beliefs(&env, &a.beliefs)?;
            Ok(match check_forward_consistency(&env, &mu) {
                Ok(()) => verdict(true, json!({"forwardConsistent": true})),
                Err(v) => verdict(
                    false,
                    json!({"forwardConsistent": false, "violation": io::forward_violation_to_json(&env, &v)}),
                ),
            })
        }
        Command::CheckComplete(a) => {
            let env = load_env(&a.env)?;
            let mu = load_beliefs(&env, &a.beliefs)?;
            Ok(match check_complete_consistency(&env, &mu).map_err(consistency_error)? {
                CompleteConsistency::Consistent { lcps, certificate } => verdict(
                    true,
                    json!({
                        "consistent": true,
                        "lcps": io::lcps_to_json(env.states(), &lcps),
                        "certificate": io::certificate_to_json(&env, &certificate),
                    }),
                ),
                CompleteConsistency::Inconsistent(w) => {
                    verdict(false, json!({"consistent": false, "witness": io::witness_to_json(&env, &w)}))
                }
            })
        }
        Command::ExtractLcps(a) => {
            let env = load_env(&a.env)?;
            let mu = load_beliefs(&env, &a.beliefs)?;
            Ok(match check_complete_consistency(&env, &mu).map_err(consistency_error)? {
                CompleteConsistency::Consistent { lcps, .. } => verdict(true, io::lcps_to_json(env.states(), &lcps)),
                CompleteConsistency::Inconsistent(w) => {
                    verdict(false, json!({"consistent": false, "witness": io::witness_to_json(&env, &w)}))
                }
            })
        }
        Command::DeriveBeliefs { env, lcps, .. } => {
            let env = load_env(env)?;
            let lcps = load_lcps(&env, lcps)?;
            let mu = derive_beliefs(&env, &lcps).map_err(consistency_error)?;
            Ok(verdict(true, io::beliefs_to_json(&env, &mu)))
        }
        Command::ToCps { env, lcps, .. } => {
            let env = load_env(env)?;
            let lcps = load_lcps(&env, lcps)?;
            let cps = lcps_to_cps(&lcps).map_err(|e| DocError::new("cps", e.to_string(), "states"))?;
            if let Err(v) = validate_complete_cps(&cps) {
                return Err(DocError::new("internal", format!("converted CPS is invalid: {v:?}"), "to-cps"));
            }
            Ok(verdict(true, io::cps_to_json(env.states(), &cps)))
        }
        Command::ToLcps { env, cps, .. } => {
            let env = load_env(env)?;
            let loc = cps.display().to_string();
            let cps = io::cps_from_doc(env.states(), &io::parse_doc(&read(cps)?, &loc)?).map_err(|e| at_file(e, &loc))?;
            Ok(match validate_complete_cps(&cps) {
                Ok(()) => verdict(true, io::lcps_to_json(env.states(), &cps_to_lcps(&cps))),
                Err(v) => verdict(
                    false,
                    json!({"valid": false, "violation": io::cps_violation_to_json(env.states(), &v)}),
                ),
            })
        }
        Command::CheckSiniscalchi { inputs, max_len } => {
            let env = load_env(&inputs.env)?;
            let mu = load_beliefs(&env, &inputs.beliefs)?;
            let max_len = max_len.unwrap_or(env.num_contingencies().max(2));
            match check_siniscalchi(&env, &mu, max_len) {
                Ok(Ok(())) => Ok(verdict(true, json!({"consistent": true, "maxLen": max_len}))),
                Ok(Err(v)) => Ok(verdict(
                    false,
                    json!({"consistent": false, "maxLen": max_len, "violation": io::siniscalchi_violation_to_json(&env, &v)}),
                )),
                Err(e @ SiniscalchiError::NonUniformReach) => Err(DocError::new("non-uniform-reach", e.to_string(), "env")),
                Err(e) => Err(DocError::new("usage", e.to_string(), "--max-len")),
            }
        }
        Command::VerifyBook(a) | Command::VerifyDeterministic(a) => {
            let deterministic = matches!(command, Command::VerifyDeterministic(_));
            let env = load_env(&a.env)?;
            let g = load_book(&env, &a.book)?;
            let (mut payload, is_book) = if deterministic {
                let v = classify_deterministic(&env, &g);
                (io::deterministic_verdict_to_json(&env, &v), v.is_deterministic)
            } else {
                let v = classify_dutch_book(&env, &g);
                (io::book_verdict_to_json(&env, &v), v.is_dutch_book)
            };
            let mut positive = is_book;
            if let Some(path) = &a.beliefs {
                let mu = load_beliefs(&env, path)?;
                let report = accepts_system(&env, &mu, &g).map_err(|e| DocError::new("gamble", e.to_string(), "book"))?;
                payload["acceptsAll"] = json!(report.accepts_all());
                payload["acceptance"] = io::acceptance_to_json(&env, &report);
                positive &= report.accepts_all();
            }
            Ok(verdict(positive, payload))
        }
        Command::SynthBook(a) => {
            let env = load_env(&a.inputs.env)?;
            let mu = load_beliefs(&env, &a.inputs.beliefs)?;
            let params = parse_epsilon(&a.epsilon)?;
            let book = match synthesize_dutch_book(&env, &mu, &params) {
                Ok(b) => b,
                Err(e) => return synthesis_failure(e),
            };
            let accepted = accepts_system(&env, &mu, &book.gambles).is_ok_and(|r| r.accepts_all());
            let verdict_ = classify_dutch_book(&env, &book.gambles);
            if !accepted || !verdict_.is_dutch_book {
                return Err(DocError::new("internal", "synthesized book failed re-verification", "synth-book"));
            }
            Ok(verdict(
                true,
                json!({
                    "synthesized": true,
                    "gambles": io::gambles_to_json(&env, &book.gambles)["gambles"],
                    "witness": io::witness_to_json(&env, &book.witness),
                    "epsilon": book.epsilon.to_string(),
                    "shrinks": book.shrinks,
                    "telescoping": book.telescoping.to_string(),
                    "verdict": io::book_verdict_to_json(&env, &verdict_),
                    "acceptance": io::acceptance_to_json(&env, &book.acceptance),
                }),
            ))
        }
        Command::SynthDeterministic(a) => {
            let env = load_env(&a.inputs.env)?;
            let mu = load_beliefs(&env, &a.inputs.beliefs)?;
            let params = parse_epsilon(&a.epsilon)?;
            let book = match synthesize_deterministic_db(&env, &mu, &params) {
                Ok(b) => b,
                Err(e) => return synthesis_failure(e),
            };
            let accepted = accepts_system(&env, &mu, &book.gambles).is_ok_and(|r| r.accepts_all());
            let verdict_ = classify_deterministic(&env, &book.gambles);
            if !accepted || !verdict_.is_deterministic {
                return Err(DocError::new("internal", "synthesized book failed re-verification", "synth-deterministic"));
            }
            Ok(verdict(
                true,
                json!({
                    "synthesized": true,
                    "gambles": io::gambles_to_json(&env, &book.gambles)["gambles"],
                    "h": env.forest().name(book.h),
                    "hprime": env.forest().name(book.h_prime),
                    "s": env.states().name(book.s),
                    "sprime": env.states().name(book.s_prime),
                    "x": book.x.to_string(),
                    "y": book.y.to_string(),
                    "epsilon": book.epsilon.to_string(),
                    "variant": book.variant.to_string(),
                    "verdict": io::deterministic_verdict_to_json(&env, &verdict_),
                    "acceptance": io::acceptance_to_json(&env, &book.acceptance),
                }),
            ))
        }
        Command::Simulate { inputs, book, seed, rounds, state } => {
            let env = load_env(&inputs.env)?;
            let mu = load_beliefs(&env, &inputs.beliefs)?;
            let g = load_book(&env, book)?;
            let mode = match state {
                Some(name) => SimMode::FixedState(io::state_by_name(&env, name)?),
                None => SimMode::Prior(
                    Distribution::from_weights(vec![Rational::one(); env.num_states()]).expect("states are nonempty"),
                ),
            };
            let cfg = SimConfig {
                rounds: *rounds,
                seed: *seed,
                mode,
            };
            let report = run_rounds(&env, &mu, &g, &cfg).map_err(|e| DocError::new("usage", e.to_string(), "--rounds"))?;
            let deviations = compare_to_exact(&report);
            let flagged = deviations.iter().any(|d| d.flagged);
            Ok(verdict(!flagged, io::sim_report_to_json(&env, &report, &deviations)))
        }
    }
}

fn out_path(command: &Command) -> Option<&Path> {
    let out = match command {
        Command::Validate { out, .. }
        | Command::DeriveBeliefs { out, .. }
        | Command::ToCps { out, .. }
        | Command::ToLcps { out, .. } => out,
        Command::CheckForward(a) | Command::CheckComplete(a) | Command::ExtractLcps(a) => &a.out,
        Command::CheckSiniscalchi { inputs, .. } | Command::Simulate { inputs, .. } => &inputs.out,
        Command::VerifyBook(a) | Command::VerifyDeterministic(a) => &a.out,
        Command::SynthBook(a) | Command::SynthDeterministic(a) => &a.inputs.out,
    };
    out.out.as_deref()
}

fn fail(e: &DocError) -> ExitCode {
    eprintln!("error: {e}");
    print!("{}", io::render(&e.to_json()));
    ExitCode::from(2)
}

fn configure_threads() -> Result<(), DocError> {
    let Ok(raw) = std::env::var("DUTCHBOOK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| DocError::new("usage", format!("invalid thread count {raw:?}"), "DUTCHBOOK_THREADS"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| DocError::new("usage", e.to_string(), "DUTCHBOOK_THREADS"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let message = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return fail(&DocError::new("usage", message, "argv"));
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let outcome = match run(&cli.command) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let text = io::render(&outcome.payload);
    match out_path(&cli.command) {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                return fail(&DocError::new("io", e.to_string(), path.display().to_string()));
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(outcome.exit)
}
