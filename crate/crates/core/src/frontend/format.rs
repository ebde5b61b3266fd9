//! JSON file formats: models, posets, and traces. JSON is the canonical
//! interchange; the rule DSL is accepted inside model files as sugar.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dsl::{self, DslError};
use crate::morphism::{Morphism, Span};
use crate::poset::Poset;
use crate::rewrite::{apply_dpo, Rule, RuleError, Trace, Transition};
use crate::sitegraph::{AgentId, Node, Signature, SiteGraph};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dsl: {0}")]
    Dsl(#[from] DslError),
    #[error("rule: {0}")]
    Rule(#[from] RuleError),
    #[error("duplicate rule name `{0}`")]
    DuplicateRule(String),
    #[error("duplicate event id `{0}`")]
    DuplicateEvent(String),
    #[error("unknown event id `{0}`")]
    UnknownEvent(String),
    #[error("event `{event}` has label `{label}` naming no rule")]
    UnknownLabel { event: String, label: String },
    #[error("unknown rule name `{0}` in trace")]
    UnknownRule(String),
    #[error("graph invalid against signature: {0}")]
    InvalidGraph(String),
    #[error("invalid morphism in file: {0}")]
    BadMorphism(String),
    #[error("transition {index} does not certify: {msg}")]
    BadTransition { index: usize, msg: String },
    #[error("poset: {0}")]
    Poset(#[from] crate::poset::PosetError),
}

// ---------------------------------------------------------------------
// Graph JSON
// ---------------------------------------------------------------------

/// External JSON form of a site-graph. Site indices are 1-based here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub agents: Vec<AgentJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentJson {
    pub id: u32,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<SiteJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteJson {
    pub site: u32,
    /// Absent: site mentioned but unconstrained. `"free"`: explicitly free.
    /// Object: bound to the given site of the given agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkJson {
    Free(String),
    Bond { agent: u32, site: u32 },
}

impl GraphJson {
    pub fn from_graph(g: &SiteGraph) -> GraphJson {
        let agents = g
            .agents()
            .map(|(id, ty)| {
                let mut sites = vec![];
                for (a, s) in g.nodes() {
                    if a != id {
                        continue;
                    }
                    let link = match g.edge_at(Node::Site(a, s)) {
                        None => None,
                        Some(e) => match e.other(Node::Site(a, s)).unwrap() {
                            Node::Free => Some(LinkJson::Free("free".into())),
                            Node::Site(b, t) => {
                                Some(LinkJson::Bond { agent: b.0, site: t + 1 })
                            }
                        },
                    };
                    sites.push(SiteJson { site: s + 1, link });
                }
                AgentJson { id: id.0, ty: ty.name().to_string(), sites }
            })
            .collect();
        GraphJson { agents }
    }

    pub fn to_graph(&self, sig: &Signature) -> Result<SiteGraph, FormatError> {
        let mut g = SiteGraph::default();
        for a in &self.agents {
            let ty = sig
                .resolve(&a.ty)
                .ok_or_else(|| FormatError::InvalidGraph(format!("unknown type {}", a.ty)))?;
            g.add_agent(AgentId(a.id), ty);
            for s in &a.sites {
                if s.site == 0 {
                    return Err(FormatError::InvalidGraph("site indices are 1-based".into()));
                }
                g.add_node(AgentId(a.id), s.site - 1);
            }
        }
        for a in &self.agents {
            for s in &a.sites {
                let here = Node::Site(AgentId(a.id), s.site - 1);
                match &s.link {
                    None => {}
                    Some(LinkJson::Free(word)) => {
                        if word != "free" {
                            return Err(FormatError::InvalidGraph(format!(
                                "unknown link keyword `{}`",
                                word
                            )));
                        }
                        if g.edge_at(here).is_none() {
                            g.add_edge(here, Node::Free);
                        }
                    }
                    Some(LinkJson::Bond { agent, site }) => {
                        if *site == 0 {
                            return Err(FormatError::InvalidGraph(
                                "site indices are 1-based".into(),
                            ));
                        }
                        let there = Node::Site(AgentId(*agent), site - 1);
                        if !g.has_node(AgentId(*agent), site - 1) {
                            return Err(FormatError::InvalidGraph(format!(
                                "bond endpoint agent {} site {} is not declared",
                                agent, site
                            )));
                        }
                        if g.edge_at(here).is_none() {
                            g.add_edge(here, there);
                        }
                    }
                }
            }
        }
        g.validate(sig).map_err(|errs| {
            FormatError::InvalidGraph(
                errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
            )
        })?;
        Ok(g)
    }
}

fn map_to_pairs(m: &Morphism) -> Vec<(u32, u32)> {
    m.source().agent_ids().map(|a| (a.0, m.apply(a).unwrap().0)).collect()
}

fn pairs_to_morphism(
    source: SiteGraph,
    target: SiteGraph,
    pairs: &[(u32, u32)],
) -> Result<Morphism, FormatError> {
    let map: BTreeMap<AgentId, AgentId> =
        pairs.iter().map(|&(a, b)| (AgentId(a), AgentId(b))).collect();
    Morphism::new(source, target, map).map_err(|e| FormatError::BadMorphism(e.to_string()))
}

// ---------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    /// Agent type name -> number of sites.
    pub signature: BTreeMap<String, u32>,
    pub rules: Vec<RuleEntry>,
    /// Optional initial mixture, as a DSL pattern (completed to a mixture).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub name: String,
    pub rule: RuleSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleSpec {
    /// `"A(1[.]) , X(1[.]) -> A(1[x.1]) , X(1[a.1])"`
    Dsl(String),
    /// Normalized form: the three graphs of the span, interface included in
    /// both sides under identical agent ids.
    Structured { left: GraphJson, interface: GraphJson, right: GraphJson },
}

/// A loaded model: signature, named rules, optional initial mixture.
#[derive(Clone, Debug)]
pub struct Model {
    pub signature: Signature,
    pub rules: Vec<Rule>,
    pub init: Option<SiteGraph>,
}

impl Model {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<ModelFile, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(&self) -> Result<Model, FormatError> {
        let mut sig = Signature::new();
        for (name, count) in &self.signature {
            sig = sig.with_type(name, *count);
        }
        let mut rules = vec![];
        for entry in &self.rules {
            if rules.iter().any(|r: &Rule| r.name == entry.name) {
                return Err(FormatError::DuplicateRule(entry.name.clone()));
            }
            let rule = match &entry.rule {
                RuleSpec::Dsl(text) => dsl::parse_rule(&entry.name, text, &sig)?,
                RuleSpec::Structured { left, interface, right } => {
                    let l = left.to_graph(&sig)?;
                    let k = interface.to_graph(&sig)?;
                    let r = right.to_graph(&sig)?;
                    let to_left = Morphism::inclusion(&k, &l)
                        .map_err(|e| FormatError::BadMorphism(e.to_string()))?;
                    let to_right = Morphism::inclusion(&k, &r)
                        .map_err(|e| FormatError::BadMorphism(e.to_string()))?;
                    Rule::new(&entry.name, Span::new(to_left, to_right))?
                }
            };
            rule.left().validate(&sig).map_err(|errs| {
                FormatError::InvalidGraph(
                    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
                )
            })?;
            rules.push(rule);
        }
        let init = match &self.init {
            Some(text) => Some(dsl::parse_mixture(text, &sig)?),
            None => None,
        };
        Ok(Model { signature: sig, rules, init })
    }

    /// Normalize a model: every DSL rule becomes its structured form.
    pub fn normalized(&self) -> Result<ModelFile, FormatError> {
        let model = self.load()?;
        let rules = model
            .rules
            .iter()
            .map(|r| RuleEntry {
                name: r.name.clone(),
                rule: RuleSpec::Structured {
                    left: GraphJson::from_graph(r.left()),
                    interface: GraphJson::from_graph(r.interface()),
                    right: GraphJson::from_graph(r.right()),
                },
            })
            .collect();
        Ok(ModelFile { signature: self.signature.clone(), rules, init: self.init.clone() })
    }
}

// ---------------------------------------------------------------------
// Poset files
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosetFile {
    pub events: Vec<EventJson>,
    /// Pre-closure `<` edges, by event id; the closure is computed on load.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub precedence: Vec<(String, String)>,
    /// Pre-closure `|-` edges (prevented event first, preventer second).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstruction: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventJson {
    pub id: String,
    pub label: String,
}

impl PosetFile {
    pub fn parse(text: &str) -> Result<PosetFile, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolve into a poset plus the event-id -> index map. If a model is
    /// given, labels must name its rules.
    pub fn load(
        &self,
        model: Option<&Model>,
    ) -> Result<(Poset, BTreeMap<String, usize>), FormatError> {
        let mut index = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if index.insert(e.id.clone(), i).is_some() {
                return Err(FormatError::DuplicateEvent(e.id.clone()));
            }
            if let Some(m) = model {
                if m.rule(&e.label).is_none() {
                    return Err(FormatError::UnknownLabel {
                        event: e.id.clone(),
                        label: e.label.clone(),
                    });
                }
            }
        }
        let resolve = |id: &String| {
            index.get(id).copied().ok_or_else(|| FormatError::UnknownEvent(id.clone()))
        };
        let mut precedence = std::collections::BTreeSet::new();
        for (a, b) in &self.precedence {
            precedence.insert((resolve(a)?, resolve(b)?));
        }
        let mut obstruction = std::collections::BTreeSet::new();
        for (a, b) in &self.obstruction {
            obstruction.insert((resolve(a)?, resolve(b)?));
        }
        let poset = Poset {
            labels: self.events.iter().map(|e| e.label.clone()).collect(),
            precedence,
            obstruction,
        };
        poset.validate()?;
        Ok((poset, index))
    }

    /// Render a poset with generated ids `e1..en`.
    pub fn from_poset(p: &Poset) -> PosetFile {
        let id = |i: usize| format!("e{}", i + 1);
        PosetFile {
            events: p
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| EventJson { id: id(i), label: l.clone() })
                .collect(),
            precedence: p.precedence.iter().map(|&(a, b)| (id(a), id(b))).collect(),
            obstruction: p.obstruction.iter().map(|&(a, b)| (id(a), id(b))).collect(),
        }
    }
}

// ---------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------

/// Self-certifying trace format: each transition records the full context
/// and target graphs plus both matchings, and is re-verified on load by
/// replaying the rewrite.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    pub initial: GraphJson,
    pub transitions: Vec<TransitionJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub rule: String,
    /// Left-hand-side agent id -> source-state agent id.
    pub matching: Vec<(u32, u32)>,
    /// Right-hand-side agent id -> target-state agent id.
    pub comatching: Vec<(u32, u32)>,
    pub context: GraphJson,
    pub target: GraphJson,
}

impl TraceFile {
    pub fn parse(text: &str) -> Result<TraceFile, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_trace(t: &Trace) -> TraceFile {
        TraceFile {
            initial: GraphJson::from_graph(&t.initial),
            transitions: t
                .transitions
                .iter()
                .map(|tr| TransitionJson {
                    rule: tr.rule.name.clone(),
                    matching: map_to_pairs(&tr.matching),
                    comatching: map_to_pairs(&tr.comatching),
                    context: GraphJson::from_graph(&tr.context),
                    target: GraphJson::from_graph(tr.target()),
                })
                .collect(),
        }
    }

    /// Reconstruct the trace against a model, re-running every rewrite and
    /// checking it reproduces the recorded context and target.
    pub fn load(&self, model: &Model) -> Result<Trace, FormatError> {
        let sig = &model.signature;
        let mut state = self.initial.to_graph(sig)?;
        let mut transitions: Vec<Transition> = vec![];
        for (index, tj) in self.transitions.iter().enumerate() {
            let rule = model
                .rule(&tj.rule)
                .ok_or_else(|| FormatError::UnknownRule(tj.rule.clone()))?;
            let matching = pairs_to_morphism(rule.left().clone(), state.clone(), &tj.matching)?;
            let t = apply_dpo(rule, &matching).map_err(|e| FormatError::BadTransition {
                index,
                msg: e.to_string(),
            })?;
            let context = tj.context.to_graph(sig)?;
            let target = tj.target.to_graph(sig)?;
            let comatching =
                pairs_to_morphism(rule.right().clone(), target.clone(), &tj.comatching)?;
            if t.context != context
                || *t.target() != target
                || t.comatching != comatching
            {
                return Err(FormatError::BadTransition {
                    index,
                    msg: "recorded context/target/comatching disagree with the rewrite".into(),
                });
            }
            state = target;
            transitions.push(t);
        }
        let initial = self.initial.to_graph(sig)?;
        Ok(Trace::new(initial, transitions).expect("replayed states chain"))
    }
}
