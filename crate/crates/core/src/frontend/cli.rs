//! Command-line interface. Exit codes: 0 = success (or "yes" for query
//! commands), 1 = negative answer (no match, no witness, unconcretizable),
//! 2 = usage or input error.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::dot;
use super::dsl;
use super::format::{Model, ModelFile, PosetFile, TraceFile};
use crate::concretize::{concretize, default_budget, ConcretizeError};
use crate::influence::{negative_influences, positive_influences};
use crate::logic::{
    evaluate, free_variables, parse_formula, rule_names, scenario, Polarity, Sort, Universe,
    Valuation, Value,
};
use crate::poset::{abstract_trace, Poset};
use crate::rewrite::applications;

#[derive(Parser)]
#[command(name = "sitelogic", version, about = "Site-graph rewriting and causal poset analysis")]
struct Cli {
    /// Emit machine-readable JSON on stdout (including errors).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Prevention,
    Enablement,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file (and optionally a trace or posets) for validity.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long = "poset")]
        posets: Vec<PathBuf>,
    },
    /// Apply one rewrite step to a mixture.
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        rule: String,
        /// Mixture pattern; defaults to the model's initial mixture.
        #[arg(long)]
        state: Option<String>,
        /// Which match to apply (matches are enumerated deterministically).
        #[arg(long, default_value_t = 0)]
        match_index: usize,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Static influence between every ordered pair of rules.
    Influence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Enablement and prevention relations of a trace.
    Causality {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Abstract a trace into its poset of events.
    Abstract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Search for traces realizing a poset.
    Concretize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        poset: PathBuf,
        /// Report every trace found instead of the first.
        #[arg(long)]
        all: bool,
    },
    /// Evaluate a closed formula over named posets.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Poset bindings, `name=path`; free poset variables resolve by name.
        #[arg(long = "poset")]
        posets: Vec<String>,
        #[arg(long)]
        formula: String,
    },
    /// Search for a scenario graph witnessing interference of two events.
    Scenario {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        poset1: PathBuf,
        #[arg(long)]
        event1: String,
        #[arg(long)]
        poset2: PathBuf,
        #[arg(long)]
        event2: String,
        #[arg(long)]
        mode: Mode,
        /// Write the scenario graph(s) as DOT to this path.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Collect all scenario graphs up to isomorphism.
        #[arg(long)]
        all: bool,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Out = Result<(i32, String, Option<serde_json::Value>), Failure>;

fn load_model(path: &PathBuf) -> Result<Model, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(format!("{}: {}", path.display(), e)))?;
    Ok(ModelFile::parse(&text)?.load()?)
}

fn load_poset(path: &PathBuf, model: &Model) -> Result<(Poset, Vec<String>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(format!("{}: {}", path.display(), e)))?;
    let pf = PosetFile::parse(&text)?;
    let (poset, _) = pf.load(Some(model))?;
    Ok((poset, pf.events.iter().map(|e| e.id.clone()).collect()))
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure(format!("{}: {}", path.display(), e)))?;
    Ok(())
}

/// Run the CLI on the given arguments (excluding the binary name handled by
/// clap); returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are successes, not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.json;
    match dispatch(cli.command) {
        Ok((code, text, payload)) => {
            if json {
                if let Some(p) = payload {
                    println!("{}", serde_json::to_string_pretty(&p).unwrap());
                }
            } else if !text.is_empty() {
                println!("{}", text.trim_end());
            }
            code
        }
        Err(Failure(msg)) => {
            if json {
                println!("{}", json!({ "error": msg }));
            } else {
                eprintln!("error: {}", msg);
            }
            2
        }
    }
}

fn dispatch(cmd: Command) -> Out {
    match cmd {
        Command::Validate { model, trace, posets } => {
            let m = load_model(&model)?;
            if let Some(t) = &trace {
                let text = fs::read_to_string(t).map_err(|e| Failure(e.to_string()))?;
                TraceFile::parse(&text)?.load(&m)?;
            }
            for p in &posets {
                load_poset(p, &m)?;
            }
            Ok((0, "ok".into(), Some(json!({ "ok": true }))))
        }
        Command::Apply { model, rule, state, match_index, dot } => {
            let m = load_model(&model)?;
            let r = m.rule(&rule).ok_or_else(|| Failure(format!("unknown rule `{}`", rule)))?;
            let g = match &state {
                Some(text) => dsl::parse_mixture(text, &m.signature)?,
                None => m
                    .init
                    .clone()
                    .ok_or_else(|| Failure("no --state and the model has no init".into()))?,
            };
            let mut apps = applications(r, &g);
            if apps.is_empty() {
                return Ok((
                    1,
                    format!("rule `{}` does not apply", rule),
                    Some(json!({ "applies": false })),
                ));
            }
            if match_index >= apps.len() {
                return Err(Failure(format!(
                    "match index {} out of range ({} matches)",
                    match_index,
                    apps.len()
                )));
            }
            let t = apps.remove(match_index);
            if let Some(path) = &dot {
                write_file(path, &dot::graph_dot(t.target()))?;
            }
            Ok((
                0,
                format!("{:?}", t.target()),
                Some(json!({
                    "applies": true,
                    "matches": apps.len() + 1,
                    "target": super::format::GraphJson::from_graph(t.target()),
                })),
            ))
        }
        Command::Influence { model, dot } => {
            let m = load_model(&model)?;
            let mut pos = vec![];
            let mut neg = vec![];
            let mut lines = vec![];
            for (i, r1) in m.rules.iter().enumerate() {
                for (j, r2) in m.rules.iter().enumerate() {
                    let p = positive_influences(r1, r2).len();
                    let n = negative_influences(r1, r2).len();
                    if p > 0 {
                        pos.push((i, j));
                        lines.push(format!("{} +> {} ({} spans)", r1.name, r2.name, p));
                    }
                    if n > 0 {
                        neg.push((i, j));
                        lines.push(format!("{} -> {} ({} spans)", r1.name, r2.name, n));
                    }
                }
            }
            if let Some(path) = &dot {
                write_file(path, &dot::influence_dot(&m.rules, &pos, &neg))?;
            }
            let name = |v: &Vec<(usize, usize)>| -> Vec<(String, String)> {
                v.iter()
                    .map(|&(i, j)| (m.rules[i].name.clone(), m.rules[j].name.clone()))
                    .collect()
            };
            Ok((
                0,
                lines.join("\n"),
                Some(json!({ "positive": name(&pos), "negative": name(&neg) })),
            ))
        }
        Command::Causality { model, trace } => {
            let m = load_model(&model)?;
            let text = fs::read_to_string(&trace).map_err(|e| Failure(e.to_string()))?;
            let t = TraceFile::parse(&text)?.load(&m)?;
            let en = crate::causality::enablements(&t);
            let pr = crate::causality::preventions(&t);
            let ev = |i: usize| format!("e{}", i + 1);
            let mut lines = vec![];
            for &(i, j) in &en {
                lines.push(format!("{} enables {}", ev(i), ev(j)));
            }
            for p in &pr {
                lines.push(format!("{} prevents {}", ev(p.preventer), ev(p.prevented)));
            }
            Ok((
                0,
                lines.join("\n"),
                Some(json!({
                    "enables": en.iter().map(|&(i, j)| (ev(i), ev(j))).collect::<Vec<_>>(),
                    "prevents": pr
                        .iter()
                        .map(|p| (ev(p.preventer), ev(p.prevented)))
                        .collect::<Vec<_>>(),
                })),
            ))
        }
        Command::Abstract { model, trace, dot } => {
            let m = load_model(&model)?;
            let text = fs::read_to_string(&trace).map_err(|e| Failure(e.to_string()))?;
            let t = TraceFile::parse(&text)?.load(&m)?;
            let p = abstract_trace(&t);
            let pf = PosetFile::from_poset(&p);
            if let Some(path) = &dot {
                write_file(path, &dot::poset_dot(&p, None))?;
            }
            let payload = serde_json::to_value(&pf).map_err(|e| Failure(e.to_string()))?;
            Ok((0, serde_json::to_string_pretty(&pf).unwrap(), Some(payload)))
        }
        Command::Concretize { model, poset, all } => {
            let m = load_model(&model)?;
            let (p, ids) = load_poset(&poset, &m)?;
            let rules: Vec<_> = m.rules.clone();
            match concretize(&p, &m.signature, &rules, default_budget()) {
                Ok(sols) => {
                    let take = if all { sols.len() } else { 1 };
                    let files: Vec<_> = sols
                        .iter()
                        .take(take)
                        .map(|c| {
                            json!({
                                "trace": TraceFile::from_trace(&c.trace),
                                "events": c
                                    .event_of_position
                                    .iter()
                                    .map(|&e| ids[e].clone())
                                    .collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    let text = serde_json::to_string_pretty(&files).unwrap();
                    Ok((0, text, Some(json!({ "found": sols.len(), "traces": files }))))
                }
                Err(ConcretizeError::Unconcretizable) => Ok((
                    1,
                    "poset is not concretizable".into(),
                    Some(json!({ "found": 0, "reason": "unconcretizable" })),
                )),
                Err(e) => Err(e.into()),
            }
        }
        Command::Check { model, posets, formula } => {
            let m = load_model(&model)?;
            let f = parse_formula(&formula)?;
            for r in rule_names(&f) {
                if m.rule(r).is_none() {
                    return Err(Failure(format!("unknown rule name `{}` in formula", r)));
                }
            }
            let mut named = BTreeMap::new();
            let mut loaded = vec![];
            for binding in &posets {
                let (name, path) = binding
                    .split_once('=')
                    .ok_or_else(|| Failure(format!("poset binding `{}` is not name=path", binding)))?;
                let (p, _) = load_poset(&PathBuf::from(path), &m)?;
                named.insert(name.to_string(), loaded.len());
                loaded.push(p);
            }
            let mut valuation = Valuation::new();
            for (var, sort) in free_variables(&f) {
                match sort {
                    Sort::Poset => {
                        let idx = named.get(&var).ok_or_else(|| {
                            Failure(format!("free poset variable `{}` has no --poset binding", var))
                        })?;
                        valuation.insert(var, Value::Poset(*idx));
                    }
                    Sort::Event => {
                        return Err(Failure(format!(
                            "formula has a free event variable `{}`",
                            var
                        )))
                    }
                }
            }
            let u = Universe {
                sig: &m.signature,
                rules: &m.rules,
                posets: &loaded,
                budget: default_budget(),
            };
            let verdict = evaluate(&f, &u, &mut valuation);
            Ok((
                if verdict { 0 } else { 1 },
                if verdict { "true".into() } else { "false".into() },
                Some(json!({ "holds": verdict })),
            ))
        }
        Command::Scenario { model, poset1, event1, poset2, event2, mode, dot, all } => {
            let m = load_model(&model)?;
            let (p1, ids1) = load_poset(&poset1, &m)?;
            let (p2, ids2) = load_poset(&poset2, &m)?;
            let e1 = ids1
                .iter()
                .position(|i| *i == event1)
                .ok_or_else(|| Failure(format!("unknown event id `{}`", event1)))?;
            let e2 = ids2
                .iter()
                .position(|i| *i == event2)
                .ok_or_else(|| Failure(format!("unknown event id `{}`", event2)))?;
            let polarity = match mode {
                Mode::Prevention => Polarity::Prevention,
                Mode::Enablement => Polarity::Enablement,
            };
            let result =
                scenario(e1, &p1, e2, &p2, polarity, &m.signature, &m.rules, default_budget())?;
            if result.exists() {
                let take = if all { result.scenarios.len() } else { 1 };
                if let Some(path) = &dot {
                    let dots: Vec<String> = result
                        .scenarios
                        .iter()
                        .take(take)
                        .map(|s| dot::graph_dot(&s.graph))
                        .collect();
                    write_file(path, &dots.join("\n"))?;
                }
                let graphs: Vec<_> = result
                    .scenarios
                    .iter()
                    .take(take)
                    .map(|s| super::format::GraphJson::from_graph(&s.graph))
                    .collect();
                Ok((
                    0,
                    format!(
                        "{} scenario graph(s) found\n{}",
                        result.scenarios.len(),
                        result
                            .scenarios
                            .iter()
                            .take(take)
                            .map(|s| format!("{:?}", s.graph))
                            .collect::<Vec<_>>()
                            .join("\n")
                    ),
                    Some(json!({ "exists": true, "count": result.scenarios.len(), "graphs": graphs })),
                ))
            } else {
                let reason = if result.no_influence {
                    "no influence between the rules".to_string()
                } else {
                    result
                        .obstructions
                        .iter()
                        .map(|o| format!("pushout obstruction: {}", o))
                        .collect::<Vec<_>>()
                        .join("\n")
                };
                let reason = if reason.is_empty() {
                    "no compatible occurrence contexts".to_string()
                } else {
                    reason
                };
                Ok((1, reason.clone(), Some(json!({ "exists": false, "reason": reason }))))
            }
        }
    }
}
