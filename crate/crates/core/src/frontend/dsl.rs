//! Compact text syntax for site-graph patterns and rules.
//!
//! A pattern is a comma-separated agent list. Sites are referenced by their
//! 1-based index; `1[.]` is explicitly free, `1[b.2]` is bound to site 2 of
//! a B agent (partner types are matched case-insensitively and bonds are
//! paired in order of occurrence), and a bare `1` mentions the site without
//! constraining it. A rule is `LHS -> RHS`; either side may be empty.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::morphism::{Morphism, Span};
use crate::rewrite::{Rule, RuleError};
use crate::sitegraph::{AgentId, AgentType, Node, Signature, SiteGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("syntax error at byte {at}: {msg}")]
    Syntax { at: usize, msg: String },
    #[error("unknown agent type `{0}`")]
    UnknownType(String),
    #[error("no agent type matches partner reference `{0}`")]
    UnknownPartnerType(String),
    #[error("site {site} out of range for agent type {ty} ({count} sites)")]
    SiteOutOfRange { ty: String, site: u32, count: u32 },
    #[error("site {site} of agent occurrence {occurrence} mentioned twice")]
    DuplicateSite { occurrence: usize, site: u32 },
    #[error("bond on site {site} of {ty} occurrence {occurrence} has no matching partner")]
    DanglingBond { ty: String, occurrence: usize, site: u32 },
    #[error(
        "preserved {ty} occurrence {occurrence} mentions different sites on the two sides"
    )]
    UnbalancedSites { ty: String, occurrence: usize },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

struct ParsedSite {
    index: u32,
    link: Link,
}

enum Link {
    Unconstrained,
    Free,
    Bond { partner_type: String, partner_site: u32 },
}

struct ParsedAgent {
    ty: String,
    sites: Vec<ParsedSite>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(DslError::Syntax { at: self.pos, msg: format!("expected '{}'", c) })
        }
    }

    fn word(&mut self) -> Result<String, DslError> {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..]
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(DslError::Syntax { at: start, msg: "expected a name".into() });
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<u32, DslError> {
        self.skip_ws();
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(DslError::Syntax { at: start, msg: "expected a site index".into() });
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| DslError::Syntax { at: start, msg: "site index too large".into() })
    }
}

fn parse_agents(cur: &mut Cursor) -> Result<Vec<ParsedAgent>, DslError> {
    let mut agents = vec![];
    if cur.peek().is_none() || cur.peek() == Some('-') {
        return Ok(agents);
    }
    loop {
        let ty = cur.word()?;
        let mut sites = vec![];
        if cur.eat('(') {
            if !cur.eat(')') {
                loop {
                    let index = cur.number()?;
                    let link = if cur.eat('[') {
                        let l = if cur.eat('.') {
                            Link::Free
                        } else {
                            let partner_type = cur.word()?;
                            cur.expect('.')?;
                            let partner_site = cur.number()?;
                            Link::Bond { partner_type, partner_site }
                        };
                        cur.expect(']')?;
                        l
                    } else {
                        Link::Unconstrained
                    };
                    sites.push(ParsedSite { index, link });
                    if !cur.eat(',') {
                        break;
                    }
                }
                cur.expect(')')?;
            }
        }
        agents.push(ParsedAgent { ty, sites });
        if !cur.eat(',') {
            break;
        }
    }
    Ok(agents)
}

fn resolve_partner(sig: &Signature, name: &str) -> Result<AgentType, DslError> {
    if let Some(t) = sig.resolve(name) {
        return Ok(t);
    }
    let lower = name.to_lowercase();
    let mut hits: Vec<AgentType> = sig
        .types()
        .filter(|(t, _)| t.name().to_lowercase() == lower)
        .map(|(t, _)| t.clone())
        .collect();
    match hits.len() {
        1 => Ok(hits.remove(0)),
        _ => Err(DslError::UnknownPartnerType(name.to_string())),
    }
}

/// Build a site-graph from parsed agents, assigning ids `first_id..`.
fn build_graph(
    parsed: &[ParsedAgent],
    sig: &Signature,
    ids: &[AgentId],
) -> Result<SiteGraph, DslError> {
    let mut g = SiteGraph::default();
    for (k, pa) in parsed.iter().enumerate() {
        let ty = sig.resolve(&pa.ty).ok_or_else(|| DslError::UnknownType(pa.ty.clone()))?;
        let count = sig.site_count(&ty).unwrap();
        g.add_agent(ids[k], ty.clone());
        for s in &pa.sites {
            if s.index == 0 || s.index > count {
                return Err(DslError::SiteOutOfRange {
                    ty: pa.ty.clone(),
                    site: s.index,
                    count,
                });
            }
            if g.has_node(ids[k], s.index - 1) {
                return Err(DslError::DuplicateSite { occurrence: k, site: s.index });
            }
            g.add_node(ids[k], s.index - 1);
        }
    }
    // Pair half-bonds in order of occurrence.
    struct Half {
        agent: usize,
        site: u32,
        partner_type: AgentType,
        partner_site: u32,
        done: bool,
    }
    let mut halves = vec![];
    for (k, pa) in parsed.iter().enumerate() {
        for s in &pa.sites {
            match &s.link {
                Link::Unconstrained => {}
                Link::Free => g.add_edge(Node::Site(ids[k], s.index - 1), Node::Free),
                Link::Bond { partner_type, partner_site } => halves.push(Half {
                    agent: k,
                    site: s.index - 1,
                    partner_type: resolve_partner(sig, partner_type)?,
                    partner_site: *partner_site - 1,
                    done: false,
                }),
            }
        }
    }
    for i in 0..halves.len() {
        if halves[i].done {
            continue;
        }
        let me_ty = g.agent_type(ids[halves[i].agent]).unwrap().clone();
        let mate = (i + 1..halves.len()).find(|&j| {
            let h = &halves[j];
            !h.done
                && *g.agent_type(ids[h.agent]).unwrap() == halves[i].partner_type
                && h.site == halves[i].partner_site
                && h.partner_type == me_ty
                && h.partner_site == halves[i].site
        });
        match mate {
            Some(j) => {
                g.add_edge(
                    Node::Site(ids[halves[i].agent], halves[i].site),
                    Node::Site(ids[halves[j].agent], halves[j].site),
                );
                halves[j].done = true;
                halves[i].done = true;
            }
            None => {
                return Err(DslError::DanglingBond {
                    ty: parsed[halves[i].agent].ty.clone(),
                    occurrence: halves[i].agent,
                    site: halves[i].site + 1,
                })
            }
        }
    }
    Ok(g)
}

/// Parse a pattern expression into a site-graph with ids `0..n`.
pub fn parse_graph(text: &str, sig: &Signature) -> Result<SiteGraph, DslError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let parsed = parse_agents(&mut cur)?;
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(DslError::Syntax { at: cur.pos, msg: "trailing input".into() });
    }
    let ids: Vec<AgentId> = (0..parsed.len() as u32).map(AgentId).collect();
    build_graph(&parsed, sig, &ids)
}

/// Parse a pattern and complete it into a mixture: every site of every
/// agent becomes a declared node, explicitly free unless the pattern bound
/// it.
pub fn parse_mixture(text: &str, sig: &Signature) -> Result<SiteGraph, DslError> {
    let mut g = parse_graph(text, sig)?;
    for id in g.agent_ids().collect::<Vec<_>>() {
        let count = sig.site_count(g.agent_type(id).unwrap()).unwrap();
        for site in 0..count {
            if !g.has_node(id, site) {
                g.add_node(id, site);
            }
            if g.edge_at(Node::Site(id, site)).is_none() {
                g.add_edge(Node::Site(id, site), Node::Free);
            }
        }
    }
    Ok(g)
}

/// Parse `LHS -> RHS` into a rule. Agents are paired across the arrow by
/// type and order of occurrence; paired agents are preserved and must
/// mention the same sites on both sides. Preserved bonds (same endpoints on
/// both sides, including freeness) land in the interface.
pub fn parse_rule(name: &str, text: &str, sig: &Signature) -> Result<Rule, DslError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let lhs = parse_agents(&mut cur)?;
    cur.expect('-')?;
    cur.expect('>')?;
    let rhs = parse_agents(&mut cur)?;
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(DslError::Syntax { at: cur.pos, msg: "trailing input".into() });
    }

    // Pair agents by (type, occurrence within type).
    let mut left_of_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, pa) in lhs.iter().enumerate() {
        left_of_type.entry(pa.ty.as_str()).or_default().push(k);
    }
    let mut pair_of_right: Vec<Option<usize>> = vec![None; rhs.len()];
    let mut taken: BTreeMap<&str, usize> = BTreeMap::new();
    for (k, pa) in rhs.iter().enumerate() {
        let n = taken.entry(pa.ty.as_str()).or_insert(0);
        if let Some(list) = left_of_type.get(pa.ty.as_str()) {
            if *n < list.len() {
                pair_of_right[k] = Some(list[*n]);
                *n += 1;
            }
        }
    }

    let left_ids: Vec<AgentId> = (0..lhs.len() as u32).map(AgentId).collect();
    let mut next = lhs.len() as u32;
    let right_ids: Vec<AgentId> = pair_of_right
        .iter()
        .map(|p| match p {
            Some(l) => left_ids[*l],
            None => {
                next += 1;
                AgentId(next - 1)
            }
        })
        .collect();

    let left = build_graph(&lhs, sig, &left_ids)?;
    let right = build_graph(&rhs, sig, &right_ids)?;

    // Interface: preserved agents with their mentioned sites and bonds that
    // look the same on both sides.
    let mut interface = SiteGraph::default();
    for (k, p) in pair_of_right.iter().enumerate() {
        let Some(l) = p else { continue };
        let id = left_ids[*l];
        let lsites: Vec<u32> =
            left.nodes().filter(|&(a, _)| a == id).map(|(_, s)| s).collect();
        let rsites: Vec<u32> =
            right.nodes().filter(|&(a, _)| a == id).map(|(_, s)| s).collect();
        if lsites != rsites {
            return Err(DslError::UnbalancedSites {
                ty: rhs[k].ty.clone(),
                occurrence: *l,
            });
        }
        interface.add_agent(id, left.agent_type(id).unwrap().clone());
        for s in lsites {
            interface.add_node(id, s);
        }
    }
    for e in left.edges() {
        let (n1, n2) = e.endpoints();
        let in_interface = |n: Node| match n {
            Node::Free => true,
            Node::Site(a, s) => interface.has_node(a, s),
        };
        if in_interface(n1) && in_interface(n2) && right.has_edge(e) {
            interface.add_edge(n1, n2);
        }
    }

    let to_left = Morphism::inclusion(&interface, &left).expect("interface embeds in lhs");
    let to_right = Morphism::inclusion(&interface, &right).expect("interface embeds in rhs");
    Ok(Rule::new(name, Span::new(to_left, to_right))?)
}
