//! A first-order logic over event posets: formulas quantify over events and
//! posets, with causal predicates decided by scenario construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catops::{pushout, NoPushout};
use crate::concretize::{concretize, ConcretizeError};
use crate::influence::{negative_influences, positive_influences};
use crate::morphism::{Morphism, Span};
use crate::poset::Poset;
use crate::rewrite::Rule;
use crate::sitegraph::{canonical_with_annotations, AgentId, Signature, SiteGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sort {
    Event,
    Poset,
}

/// Formula AST. Disjunction is parsed as sugar for `!(!a & !b)` and never
/// appears here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formula {
    Exists(String, Sort, Box<Formula>),
    Forall(String, Sort, Box<Formula>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    /// `e in s`
    In(String, String),
    /// `label(e) = name`
    LabelIs(String, String),
    /// `e1 <=[s] e2`
    Leq(String, String, String),
    /// `e1 |-[s] e2`
    Proves(String, String, String),
    /// `enables(e1 in s1, e2 in s2)`
    Enables(String, String, String, String),
    /// `prevents(e1 in s1, e2 in s2)`
    Prevents(String, String, String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {at}: {msg}")]
    Syntax { at: usize, msg: String },
    #[error("sort error: {0}")]
    Sort(String),
}

// ---------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Comma,
    Amp,
    Pipe,
    Bang,
    Eq,
    LeqOp,
    TurnOp,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = vec![];
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Some((1, Tok::LParen)),
            ')' => Some((1, Tok::RParen)),
            '[' => Some((1, Tok::LBracket)),
            ']' => Some((1, Tok::RBracket)),
            '.' => Some((1, Tok::Dot)),
            ',' => Some((1, Tok::Comma)),
            '&' => Some((1, Tok::Amp)),
            '!' => Some((1, Tok::Bang)),
            '=' => Some((1, Tok::Eq)),
            '<' => {
                if b.get(i + 1) == Some(&b'=') {
                    Some((2, Tok::LeqOp))
                } else {
                    None
                }
            }
            '|' => {
                if b.get(i + 1) == Some(&b'-') {
                    Some((2, Tok::TurnOp))
                } else {
                    Some((1, Tok::Pipe))
                }
            }
            _ => None,
        };
        match tok {
            Some((w, t)) => {
                out.push((i, t));
                i += w;
            }
            None => {
                if c.is_ascii_alphanumeric() || c == '_' {
                    let start = i;
                    while i < b.len() {
                        let d = b[i] as char;
                        if d.is_ascii_alphanumeric() || d == '_' || d == '\'' {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    out.push((start, Tok::Ident(src[start..i].to_string())));
                } else {
                    return Err(ParseError::Syntax {
                        at: i,
                        msg: format!("unexpected character {:?}", c),
                    });
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Parser: quantifiers scope as far right as possible, so a quantifier in a
// conjunction binds the rest of the conjunction.
// ---------------------------------------------------------------------

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map_or(usize::MAX, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn err<T>(&self, msg: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax { at: self.at(), msg: msg.to_string() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected {}", what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                self.err(&format!("expected {}", what))
            }
        }
    }

    fn formula(&mut self) -> Result<RawFormula, ParseError> {
        self.or()
    }

    fn starts_quantifier(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == "exists" || s == "forall")
    }

    fn quantified(&mut self) -> Result<RawFormula, ParseError> {
        let kw = self.ident("quantifier")?;
        let var = self.ident("variable name")?;
        self.expect(Tok::Dot, "'.' after quantified variable")?;
        let body = self.formula()?;
        Ok(if kw == "exists" {
            RawFormula::Exists(var, Box::new(body))
        } else {
            RawFormula::Forall(var, Box::new(body))
        })
    }

    fn or(&mut self) -> Result<RawFormula, ParseError> {
        if self.starts_quantifier() {
            return self.quantified();
        }
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = if self.starts_quantifier() { self.quantified()? } else { self.formula_rest_or()? };
            lhs = RawFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // After `|`, parse the remaining disjunct without re-entering the
    // left-recursive loop.
    fn formula_rest_or(&mut self) -> Result<RawFormula, ParseError> {
        self.and()
    }

    fn and(&mut self) -> Result<RawFormula, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            if self.starts_quantifier() {
                let rhs = self.quantified()?;
                lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
                break;
            }
            let rhs = self.unary()?;
            lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawFormula, ParseError> {
        if self.peek() == Some(&Tok::Bang) {
            self.pos += 1;
            return Ok(RawFormula::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn arrow_args(&mut self) -> Result<(String, String, String, String), ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let e1 = self.ident("event variable")?;
        self.keyword("in")?;
        let s1 = self.ident("poset variable")?;
        self.expect(Tok::Comma, "','")?;
        let e2 = self.ident("event variable")?;
        self.keyword("in")?;
        let s2 = self.ident("poset variable")?;
        self.expect(Tok::RParen, "')'")?;
        Ok((e1, s1, e2, s2))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some(Tok::Ident(s)) if s == kw => Ok(()),
            _ => {
                self.pos -= 1;
                self.err(&format!("expected '{}'", kw))
            }
        }
    }

    fn atom(&mut self) -> Result<RawFormula, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Some(Tok::Ident(s)) if s == "label" => {
                self.pos += 1;
                self.expect(Tok::LParen, "'('")?;
                let e = self.ident("event variable")?;
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::Eq, "'='")?;
                let r = self.ident("rule name")?;
                Ok(RawFormula::LabelIs(e, r))
            }
            Some(Tok::Ident(s)) if s == "enables" || s == "prevents" => {
                let which = s.clone();
                self.pos += 1;
                let (e1, s1, e2, s2) = self.arrow_args()?;
                Ok(if which == "enables" {
                    RawFormula::Enables(e1, s1, e2, s2)
                } else {
                    RawFormula::Prevents(e1, s1, e2, s2)
                })
            }
            Some(Tok::Ident(_)) => {
                let x = self.ident("variable")?;
                match self.peek() {
                    Some(Tok::Ident(s)) if s == "in" => {
                        self.pos += 1;
                        let p = self.ident("poset variable")?;
                        Ok(RawFormula::In(x, p))
                    }
                    Some(Tok::LeqOp) | Some(Tok::TurnOp) => {
                        let leq = self.peek() == Some(&Tok::LeqOp);
                        self.pos += 1;
                        let sub = if self.peek() == Some(&Tok::LBracket) {
                            self.pos += 1;
                            let p = self.ident("poset variable")?;
                            self.expect(Tok::RBracket, "']'")?;
                            Some(p)
                        } else {
                            None
                        };
                        let y = self.ident("event variable")?;
                        Ok(if leq {
                            RawFormula::Leq(x, sub, y)
                        } else {
                            RawFormula::Proves(x, sub, y)
                        })
                    }
                    _ => self.err("expected 'in', '<=[...]' or '|-[...]'"),
                }
            }
            _ => self.err("expected a formula"),
        }
    }
}

/// Pre-sort-check AST; `Or` and missing subscripts still present.
#[derive(Clone, Debug)]
enum RawFormula {
    Exists(String, Box<RawFormula>),
    Forall(String, Box<RawFormula>),
    Not(Box<RawFormula>),
    And(Box<RawFormula>, Box<RawFormula>),
    Or(Box<RawFormula>, Box<RawFormula>),
    In(String, String),
    LabelIs(String, String),
    Leq(String, Option<String>, String),
    Proves(String, Option<String>, String),
    Enables(String, String, String, String),
    Prevents(String, String, String, String),
}

fn infer(
    f: &RawFormula,
    sorts: &mut BTreeMap<String, Sort>,
) -> Result<Formula, ParseError> {
    let demand = |sorts: &mut BTreeMap<String, Sort>, v: &str, s: Sort| {
        match sorts.get(v) {
            Some(&t) if t != s => Err(ParseError::Sort(format!(
                "variable {} used as both an event and a poset",
                v
            ))),
            _ => {
                sorts.insert(v.to_string(), s);
                Ok(())
            }
        }
    };
    Ok(match f {
        RawFormula::Exists(v, b) | RawFormula::Forall(v, b) => {
            let shadowed = sorts.remove(v);
            let body = infer(b, sorts)?;
            let sort = sorts.remove(v).unwrap_or(Sort::Event);
            if let Some(s) = shadowed {
                sorts.insert(v.clone(), s);
            }
            if matches!(f, RawFormula::Exists(..)) {
                Formula::Exists(v.clone(), sort, Box::new(body))
            } else {
                Formula::Forall(v.clone(), sort, Box::new(body))
            }
        }
        RawFormula::Not(b) => Formula::Not(Box::new(infer(b, sorts)?)),
        RawFormula::And(a, b) => {
            Formula::And(Box::new(infer(a, sorts)?), Box::new(infer(b, sorts)?))
        }
        RawFormula::Or(a, b) => {
            // a | b  ==  !(!a & !b)
            let a = infer(a, sorts)?;
            let b = infer(b, sorts)?;
            Formula::Not(Box::new(Formula::And(
                Box::new(Formula::Not(Box::new(a))),
                Box::new(Formula::Not(Box::new(b))),
            )))
        }
        RawFormula::In(e, s) => {
            demand(sorts, e, Sort::Event)?;
            demand(sorts, s, Sort::Poset)?;
            Formula::In(e.clone(), s.clone())
        }
        RawFormula::LabelIs(e, r) => {
            demand(sorts, e, Sort::Event)?;
            Formula::LabelIs(e.clone(), r.clone())
        }
        RawFormula::Leq(a, sub, b) | RawFormula::Proves(a, sub, b) => {
            let s = sub.clone().ok_or_else(|| {
                ParseError::Sort("precedence predicate needs a poset subscript".into())
            })?;
            demand(sorts, a, Sort::Event)?;
            demand(sorts, b, Sort::Event)?;
            demand(sorts, &s, Sort::Poset)?;
            if matches!(f, RawFormula::Leq(..)) {
                Formula::Leq(a.clone(), s, b.clone())
            } else {
                Formula::Proves(a.clone(), s, b.clone())
            }
        }
        RawFormula::Enables(e1, s1, e2, s2) | RawFormula::Prevents(e1, s1, e2, s2) => {
            demand(sorts, e1, Sort::Event)?;
            demand(sorts, s1, Sort::Poset)?;
            demand(sorts, e2, Sort::Event)?;
            demand(sorts, s2, Sort::Poset)?;
            if matches!(f, RawFormula::Enables(..)) {
                Formula::Enables(e1.clone(), s1.clone(), e2.clone(), s2.clone())
            } else {
                Formula::Prevents(e1.clone(), s1.clone(), e2.clone(), s2.clone())
            }
        }
    })
}

/// Parse the ASCII formula syntax into a sorted AST.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let raw = p.formula()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input after formula");
    }
    let mut sorts = BTreeMap::new();
    let f = infer(&raw, &mut sorts)?;
    Ok(f)
}

/// Rule names mentioned in `label(_) = r` predicates.
pub fn rule_names(f: &Formula) -> Vec<&str> {
    match f {
        Formula::Exists(_, _, b) | Formula::Forall(_, _, b) | Formula::Not(b) => rule_names(b),
        Formula::And(a, b) => {
            let mut v = rule_names(a);
            v.extend(rule_names(b));
            v
        }
        Formula::LabelIs(_, r) => vec![r],
        _ => vec![],
    }
}

/// Free variables of the formula, with their sorts.
pub fn free_variables(f: &Formula) -> BTreeMap<String, Sort> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeMap<String, Sort>) {
        let var = |v: &str, s: Sort, bound: &Vec<String>, out: &mut BTreeMap<String, Sort>| {
            if !bound.iter().any(|b| b == v) {
                out.insert(v.to_string(), s);
            }
        };
        match f {
            Formula::Exists(v, _, b) | Formula::Forall(v, _, b) => {
                bound.push(v.clone());
                go(b, bound, out);
                bound.pop();
            }
            Formula::Not(b) => go(b, bound, out),
            Formula::And(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::In(e, s) => {
                var(e, Sort::Event, bound, out);
                var(s, Sort::Poset, bound, out);
            }
            Formula::LabelIs(e, _) => var(e, Sort::Event, bound, out),
            Formula::Leq(a, s, b) | Formula::Proves(a, s, b) => {
                var(a, Sort::Event, bound, out);
                var(b, Sort::Event, bound, out);
                var(s, Sort::Poset, bound, out);
            }
            Formula::Enables(e1, s1, e2, s2) | Formula::Prevents(e1, s1, e2, s2) => {
                var(e1, Sort::Event, bound, out);
                var(s1, Sort::Poset, bound, out);
                var(e2, Sort::Event, bound, out);
                var(s2, Sort::Poset, bound, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    go(f, &mut vec![], &mut out);
    out
}

// ---------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------

/// A value a variable can take: an event of some poset, or a poset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    /// (poset index, event index within that poset)
    Event(usize, usize),
    Poset(usize),
}

pub type Valuation = BTreeMap<String, Value>;

/// Everything needed to interpret a formula: the poset universe and the
/// model behind the causal predicates.
pub struct Universe<'a> {
    pub sig: &'a Signature,
    pub rules: &'a [Rule],
    pub posets: &'a [Poset],
    pub budget: u64,
}

impl Universe<'_> {
    fn events(&self) -> Vec<Value> {
        self.posets
            .iter()
            .enumerate()
            .flat_map(|(p, s)| s.events().map(move |e| Value::Event(p, e)))
            .collect()
    }
}

/// Evaluate a formula under a valuation covering its free variables.
/// Concretization failures under causal predicates count as "no scenario".
pub fn evaluate(f: &Formula, u: &Universe, v: &mut Valuation) -> bool {
    match f {
        Formula::Exists(x, sort, b) => {
            let domain: Vec<Value> = match sort {
                Sort::Event => u.events(),
                Sort::Poset => (0..u.posets.len()).map(Value::Poset).collect(),
            };
            let saved = v.get(x).copied();
            let mut ok = false;
            for val in domain {
                v.insert(x.clone(), val);
                if evaluate(b, u, v) {
                    ok = true;
                    break;
                }
            }
            restore(v, x, saved);
            ok
        }
        Formula::Forall(x, sort, b) => {
            let inner = Formula::Exists(
                x.clone(),
                *sort,
                Box::new(Formula::Not(b.clone())),
            );
            !evaluate(&inner, u, v)
        }
        Formula::Not(b) => !evaluate(b, u, v),
        Formula::And(a, b) => evaluate(a, u, v) && evaluate(b, u, v),
        Formula::In(e, s) => match (v.get(e), v.get(s)) {
            (Some(&Value::Event(p, _)), Some(&Value::Poset(q))) => p == q,
            _ => false,
        },
        Formula::LabelIs(e, r) => match v.get(e) {
            Some(&Value::Event(p, i)) => u.posets[p].labels[i] == *r,
            _ => false,
        },
        Formula::Leq(a, s, b) | Formula::Proves(a, s, b) => {
            match (v.get(a), v.get(s), v.get(b)) {
                (Some(&Value::Event(p, i)), Some(&Value::Poset(q)), Some(&Value::Event(r, j))) => {
                    p == q
                        && r == q
                        && if matches!(f, Formula::Leq(..)) {
                            u.posets[q].leq(i, j)
                        } else {
                            u.posets[q].proves(i, j)
                        }
                }
                _ => false,
            }
        }
        Formula::Enables(e1, s1, e2, s2) | Formula::Prevents(e1, s1, e2, s2) => {
            let polarity = if matches!(f, Formula::Enables(..)) {
                Polarity::Enablement
            } else {
                Polarity::Prevention
            };
            match (v.get(e1), v.get(s1), v.get(e2), v.get(s2)) {
                (
                    Some(&Value::Event(p1, i1)),
                    Some(&Value::Poset(q1)),
                    Some(&Value::Event(p2, i2)),
                    Some(&Value::Poset(q2)),
                ) if p1 == q1 && p2 == q2 => scenario(
                    i1,
                    &u.posets[q1],
                    i2,
                    &u.posets[q2],
                    polarity,
                    u.sig,
                    u.rules,
                    u.budget,
                )
                .map(|r| r.exists())
                .unwrap_or(false),
                _ => false,
            }
        }
    }
}

fn restore(v: &mut Valuation, x: &str, saved: Option<Value>) {
    match saved {
        Some(val) => {
            v.insert(x.to_string(), val);
        }
        None => {
            v.remove(x);
        }
    }
}

// ---------------------------------------------------------------------
// Occurrence contexts and scenarios
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextKind {
    /// The matching of the event's left-hand side into its source state.
    Matching,
    /// The comatching of the right-hand side into the target state.
    Comatching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Enablement,
    Prevention,
}

/// The contexts in which an event occurs: concretize its causal past and
/// collect the (co)matching of the event's transition, deduplicated up to
/// isomorphism of the pair (state, embedding).
pub fn occurrence_contexts(
    e: usize,
    s: &Poset,
    kind: ContextKind,
    sig: &Signature,
    rules: &[Rule],
    budget: u64,
) -> Result<Vec<Morphism>, ConcretizeError> {
    let past = s.causal_past(e).map_err(ConcretizeError::InvalidPoset)?;
    let sols = concretize(&past.poset, sig, rules, budget)?;
    let idx = past.events.iter().position(|&x| x == e).expect("past contains its event");
    let mut seen: BTreeMap<(SiteGraph, Vec<Option<AgentId>>), Morphism> = BTreeMap::new();
    for sol in sols {
        let k = sol
            .event_of_position
            .iter()
            .position(|&ev| ev == idx)
            .expect("every event is realized");
        let t = &sol.trace.transitions[k];
        let m = match kind {
            ContextKind::Matching => t.matching.clone(),
            ContextKind::Comatching => t.comatching.clone(),
        };
        // Key: the state up to iso, with agents annotated by the pattern
        // agent embedded onto them.
        let (g, _, anns) = canonical_with_annotations(m.target(), |a| m.preimage(a));
        seen.entry((g, anns)).or_insert(m);
    }
    Ok(seen.into_values().collect())
}

/// One successful gluing of two occurrence contexts over an influence span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: SiteGraph,
    /// Embedding of the first event's occurrence state into `graph`.
    pub left_context: Morphism,
    /// Embedding of the second event's occurrence state into `graph`.
    pub right_context: Morphism,
    pub overlap: Span,
}

/// Outcome of a scenario search: the scenario graphs found (up to iso), or
/// the pushout obstructions explaining why none exists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenarios: Vec<Scenario>,
    pub obstructions: Vec<NoPushout>,
    /// True when the two rules have no influence of the right polarity at
    /// all, so no gluing was even attempted.
    pub no_influence: bool,
}

impl ScenarioResult {
    pub fn exists(&self) -> bool {
        !self.scenarios.is_empty()
    }
}

/// Search for scenario graphs witnessing that `e1` (in `s1`) prevents or
/// enables `e2` (in `s2`): glue the occurrence contexts of the two events
/// over each influence span of their rules.
#[allow(clippy::too_many_arguments)]
pub fn scenario(
    e1: usize,
    s1: &Poset,
    e2: usize,
    s2: &Poset,
    polarity: Polarity,
    sig: &Signature,
    rules: &[Rule],
    budget: u64,
) -> Result<ScenarioResult, ConcretizeError> {
    let find = |label: &str| rules.iter().find(|r| r.name == label);
    let r1 = find(&s1.labels[e1]).ok_or_else(|| ConcretizeError::UnknownLabel(s1.labels[e1].clone()))?;
    let r2 = find(&s2.labels[e2]).ok_or_else(|| ConcretizeError::UnknownLabel(s2.labels[e2].clone()))?;
    let (witnesses, kind1) = match polarity {
        Polarity::Prevention => (negative_influences(r1, r2), ContextKind::Matching),
        Polarity::Enablement => (positive_influences(r1, r2), ContextKind::Comatching),
    };
    if witnesses.is_empty() {
        return Ok(ScenarioResult { scenarios: vec![], obstructions: vec![], no_influence: true });
    }
    let ctx1 = occurrence_contexts(e1, s1, kind1, sig, rules, budget)?;
    let ctx2 = occurrence_contexts(e2, s2, ContextKind::Matching, sig, rules, budget)?;
    let mut scenarios: BTreeMap<SiteGraph, Scenario> = BTreeMap::new();
    let mut obstructions = vec![];
    for m1 in &ctx1 {
        for m2 in &ctx2 {
            for w in &witnesses {
                let g1 = w.overlap.left.then(m1).expect("overlap foot composes with context");
                let g2 = w.overlap.right.then(m2).expect("overlap foot composes with context");
                match pushout(&Span::new(g1, g2)) {
                    Ok(cospan) => {
                        let graph = cospan.target().clone();
                        let key = crate::sitegraph::iso_canonical(&graph).0;
                        scenarios.entry(key).or_insert(Scenario {
                            graph,
                            left_context: cospan.left,
                            right_context: cospan.right,
                            overlap: w.overlap.clone(),
                        });
                    }
                    Err(np) => {
                        if !obstructions.contains(&np) {
                            obstructions.push(np);
                        }
                    }
                }
            }
        }
    }
    Ok(ScenarioResult {
        scenarios: scenarios.into_values().collect(),
        obstructions,
        no_influence: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poset(labels: &[&str], prec: &[(usize, usize)], obs: &[(usize, usize)]) -> Poset {
        Poset {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            precedence: prec.iter().copied().collect(),
            obstruction: obs.iter().copied().collect(),
        }
    }

    #[test]
    fn parses_simple_query() {
        let f = parse_formula("exists e1. e1 in s1 & label(e1) = rAX").unwrap();
        match f {
            Formula::Exists(v, Sort::Event, _) => assert_eq!(v, "e1"),
            other => panic!("unexpected shape: {:?}", other),
        }
    }

    #[test]
    fn quantifier_scopes_over_the_whole_conjunction() {
        let f = parse_formula(
            "exists e1.(e1 in s1 & label(e1)=rAX) & exists e2.(e2 in s2 & label(e2)=rAY) \
             & prevents(e1 in s1, e2 in s2)",
        )
        .unwrap();
        // e2 is used after its parenthesized group; whole-conjunction
        // scoping keeps the formula closed except for the posets.
        let fv = free_variables(&f);
        assert_eq!(
            fv.keys().cloned().collect::<Vec<_>>(),
            vec!["s1".to_string(), "s2".to_string()]
        );
    }

    #[test]
    fn missing_subscript_is_a_sort_error() {
        assert!(matches!(parse_formula("e1 <= e2"), Err(ParseError::Sort(_))));
    }

    #[test]
    fn conflicting_sorts_are_rejected() {
        assert!(matches!(
            parse_formula("exists x. x in s & s in x"),
            Err(ParseError::Sort(_))
        ));
    }

    #[test]
    fn disjunction_desugars_to_negated_conjunction() {
        let f = parse_formula("e in s | label(e) = r").unwrap();
        assert!(matches!(f, Formula::Not(_)));
    }

    #[test]
    fn evaluates_membership_and_order() {
        let sig = Signature::new();
        let posets = [poset(&["a", "b"], &[(0, 1)], &[]), poset(&["a"], &[], &[])];
        let u = Universe { sig: &sig, rules: &[], posets: &posets, budget: 1000 };
        let f = parse_formula("exists s. exists e1. exists e2. e1 in s & e2 in s & e1 <=[s] e2 & label(e2) = b").unwrap();
        assert!(evaluate(&f, &u, &mut Valuation::new()));
        let g = parse_formula("exists e. e in s & label(e) = c").unwrap();
        let mut v = Valuation::new();
        v.insert("s".into(), Value::Poset(0));
        assert!(!evaluate(&g, &u, &mut v));
    }

    #[test]
    fn negation_and_conjunction_are_compositional() {
        let sig = Signature::new();
        let posets = [poset(&["a"], &[], &[])];
        let u = Universe { sig: &sig, rules: &[], posets: &posets, budget: 1000 };
        let t = parse_formula("exists e. e in s").unwrap();
        let nt = Formula::Not(Box::new(t.clone()));
        let mut v = Valuation::new();
        v.insert("s".into(), Value::Poset(0));
        assert_eq!(evaluate(&t, &u, &mut v), !evaluate(&nt, &u, &mut v.clone()));
        let conj = Formula::And(Box::new(t.clone()), Box::new(nt.clone()));
        assert!(!evaluate(&conj, &u, &mut v));
    }
}
