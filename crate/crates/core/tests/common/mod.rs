//! Shared helpers for the integration tests: fixture loading, exhaustive
//! site-graph enumeration, independent brute-force oracles, and a seeded
//! random trace generator.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sitelogic::frontend::dsl::{parse_mixture, parse_rule};
use sitelogic::frontend::format::{ModelFile, PosetFile};
use sitelogic::morphism::Morphism;
use sitelogic::rewrite::{applications, Rule, Trace, Transition};
use sitelogic::sitegraph::{
    iso_canonical, AgentId, AgentType, Edge, Node, Signature, SiteGraph,
};

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub struct Model {
    pub signature: Signature,
    pub rules: Vec<Rule>,
    pub init: Option<SiteGraph>,
}

pub fn load_model(name: &str) -> Model {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let m = ModelFile::parse(&text).unwrap().load().unwrap();
    Model { signature: m.signature, rules: m.rules, init: m.init }
}

/// Loads a poset fixture and returns it with the event-id -> index map.
pub fn load_poset(name: &str) -> (sitelogic::poset::Poset, BTreeMap<String, usize>) {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    PosetFile::parse(&text).unwrap().load(None).unwrap()
}

// ---------------------------------------------------------------------------
// Exhaustive site-graph enumeration
// ---------------------------------------------------------------------------

/// Every site-graph over `sig` with at most `max_agents` agents, up to
/// isomorphism. Agents may lack sites (unconstrained), sites may carry a
/// free edge, or be bonded to another site.
pub fn enumerate_graphs(sig: &Signature, max_agents: usize) -> Vec<SiteGraph> {
    let types: Vec<(AgentType, u32)> =
        sig.types().map(|(t, n)| (t.clone(), n)).collect();
    let mut by_canon: BTreeMap<SiteGraph, SiteGraph> = BTreeMap::new();
    // Multisets of agent types of each size up to the bound.
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(tys) = stack.pop() {
        for base in agent_graphs(&types, &tys) {
            let (c, _) = iso_canonical(&base);
            by_canon.entry(c).or_insert(base);
        }
        if tys.len() < max_agents {
            let lo = tys.last().copied().unwrap_or(0);
            for t in lo..types.len() {
                let mut next = tys.clone();
                next.push(t);
                stack.push(next);
            }
        }
    }
    by_canon.into_values().collect()
}

/// All graphs on a fixed agent list: every node subset, and every way of
/// wiring present nodes (no edge, free, or a bond to another present node).
fn agent_graphs(types: &[(AgentType, u32)], tys: &[usize]) -> Vec<SiteGraph> {
    let mut skeleton = SiteGraph::empty();
    let mut all_nodes = vec![];
    for (i, &t) in tys.iter().enumerate() {
        let id = AgentId(i as u32);
        skeleton.add_agent(id, types[t].0.clone());
        for s in 0..types[t].1 {
            all_nodes.push(Node::Site(id, s));
        }
    }
    let mut out = vec![];
    // Node subsets.
    for mask in 0..(1u32 << all_nodes.len()) {
        let present: Vec<Node> = all_nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, n)| *n)
            .collect();
        let mut g = skeleton.clone();
        for n in &present {
            if let Node::Site(a, s) = n {
                g.add_node(*a, *s);
            }
        }
        wire(&g, &present, 0, &mut vec![], &mut out);
    }
    out
}

fn wire(g: &SiteGraph, nodes: &[Node], i: usize, used: &mut Vec<Node>, out: &mut Vec<SiteGraph>) {
    if i == nodes.len() {
        out.push(g.clone());
        return;
    }
    let n = nodes[i];
    if used.contains(&n) {
        wire(g, nodes, i + 1, used, out);
        return;
    }
    // Unconstrained.
    wire(g, nodes, i + 1, used, out);
    // Explicitly free.
    let mut f = g.clone();
    f.add_edge(n, Node::Free);
    wire(&f, nodes, i + 1, used, out);
    // Bonded to a later unused node.
    for j in i + 1..nodes.len() {
        if used.contains(&nodes[j]) {
            continue;
        }
        let mut b = g.clone();
        b.add_edge(n, nodes[j]);
        used.push(nodes[j]);
        wire(&b, nodes, i + 1, used, out);
        used.pop();
    }
}

// ---------------------------------------------------------------------------
// Independent gluing oracle
// ---------------------------------------------------------------------------

/// Glues `g1` and `g2`, identifying agents per `pairing` (g1 agent ->
/// g2 agent, injective). Returns the glued graph and the two legs, or None
/// when some site would need two distinct edges at once.
pub fn glue_quotient(
    g1: &SiteGraph,
    g2: &SiteGraph,
    pairing: &BTreeMap<AgentId, AgentId>,
) -> Option<(SiteGraph, Morphism, Morphism)> {
    // g1's agents keep their ids; unpaired g2 agents are appended.
    let mut map2: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    for (a, b) in pairing {
        if g1.agent_type(*a) != g2.agent_type(*b) {
            return None;
        }
        map2.insert(*b, *a);
    }
    let mut next = g1.max_agent_id().map_or(0, |m| m + 1);
    for a in g2.agent_ids() {
        map2.entry(a).or_insert_with(|| {
            let id = AgentId(next);
            next += 1;
            id
        });
    }
    let mut glued = g1.clone();
    for (a, ty) in g2.agents() {
        // Paired agents already exist in the g1 copy under their g1 id.
        if !pairing.values().any(|b| *b == a) {
            glued.add_agent(map2[&a], ty.clone());
        }
    }
    for (a, s) in g2.nodes() {
        glued.add_node(map2[&a], s);
    }
    let tr = |n: Node| match n {
        Node::Free => Node::Free,
        Node::Site(a, s) => Node::Site(map2[&a], s),
    };
    for e in g2.edges() {
        let (x, y) = e.endpoints();
        let e = Edge::new(tr(x), tr(y));
        // A site may carry one edge at most; an equal edge is shared.
        let (x, y) = e.endpoints();
        for n in [x, y] {
            if n != Node::Free {
                match glued.edge_at(n) {
                    Some(old) if old != e => return None,
                    _ => {}
                }
            }
        }
        let (x, y) = e.endpoints();
        glued.add_edge(x, y);
    }
    if !glued.is_conflict_free() {
        return None;
    }
    let id1: BTreeMap<AgentId, AgentId> = g1.agent_ids().map(|a| (a, a)).collect();
    let leg1 = Morphism::new(g1.clone(), glued.clone(), id1).ok()?;
    let leg2 = Morphism::new(g2.clone(), glued.clone(), map2).ok()?;
    Some((glued, leg1, leg2))
}

/// All injective partial pairings between the agents of two graphs.
pub fn all_pairings(g1: &SiteGraph, g2: &SiteGraph) -> Vec<BTreeMap<AgentId, AgentId>> {
    let left: Vec<AgentId> = g1.agent_ids().collect();
    let mut out = vec![BTreeMap::new()];
    for a in left {
        let mut grown = vec![];
        for p in &out {
            for b in g2.agent_ids() {
                if g1.agent_type(a) == g2.agent_type(b) && !p.values().any(|v| *v == b) {
                    let mut q = p.clone();
                    q.insert(a, b);
                    grown.push(q);
                }
            }
        }
        out.extend(grown);
    }
    out
}

// ---------------------------------------------------------------------------
// Element-level causality oracle (adjacent transitions)
// ---------------------------------------------------------------------------

#[derive(Default, PartialEq)]
pub struct Elements {
    pub agents: Vec<AgentId>,
    pub nodes: Vec<(AgentId, u32)>,
    pub edges: Vec<Edge>,
}

impl Elements {
    pub fn intersects(&self, other: &Elements) -> bool {
        self.agents.iter().any(|a| other.agents.contains(a))
            || self.nodes.iter().any(|n| other.nodes.contains(n))
            || self.edges.iter().any(|e| other.edges.contains(e))
    }
}

/// Elements present in `b` but not in `a` (by identity).
pub fn diff(b: &SiteGraph, a: &SiteGraph) -> Elements {
    Elements {
        agents: b.agent_ids().filter(|x| !a.has_agent(*x)).collect(),
        nodes: b.nodes().filter(|(x, s)| !a.has_node(*x, *s)).collect(),
        edges: b.edges().filter(|e| !a.has_edge(*e)).collect(),
    }
}

/// The elements of the host graph touched by a matching.
pub fn matched_elements(m: &Morphism) -> Elements {
    let l = m.source();
    Elements {
        agents: l.agent_ids().filter_map(|a| m.apply(a)).collect(),
        nodes: l
            .nodes()
            .filter_map(|(a, s)| m.apply(a).map(|b| (b, s)))
            .collect(),
        edges: l.edges().filter_map(|e| m.apply_edge(e)).collect(),
    }
}

/// Sequential dependence: the second transition reads something the first
/// one created.
pub fn element_enables(t1: &Transition, t2: &Transition) -> bool {
    diff(t1.target(), t1.source()).intersects(&matched_elements(&t2.matching))
}

/// Critical overlap: the second transition destroys something the first
/// one had matched.
pub fn element_prevents(t2: &Transition, t1: &Transition) -> bool {
    diff(t2.source(), t2.target()).intersects(&matched_elements(&t1.matching))
}

// ---------------------------------------------------------------------------
// Random traces over a fixed 3-type signature
// ---------------------------------------------------------------------------

pub fn random_signature() -> Signature {
    Signature::new().with_type("A", 2).with_type("B", 2).with_type("C", 1)
}

/// A pool of well-formed rules over [`random_signature`]: binds, unbinds,
/// creations, deletions, and a couple of context-sensitive variants.
pub fn rule_pool() -> (Signature, Vec<Rule>) {
    let sig = random_signature();
    let sites: [(&str, u32); 5] = [("a", 1), ("a", 2), ("b", 1), ("b", 2), ("c", 1)];
    let mut texts: Vec<(String, String)> = vec![];
    for (i, (t1, s1)) in sites.iter().enumerate() {
        for (t2, s2) in sites.iter().skip(i) {
            let (u1, u2) = (t1.to_uppercase(), t2.to_uppercase());
            let lhs = format!("{u1}({s1}[.]) , {u2}({s2}[.])");
            let rhs = format!("{u1}({s1}[{t2}.{s2}]) , {u2}({s2}[{t1}.{s1}])");
            texts.push((format!("bind_{t1}{s1}_{t2}{s2}"), format!("{lhs} -> {rhs}")));
            texts.push((format!("unbind_{t1}{s1}_{t2}{s2}"), format!("{rhs} -> {lhs}")));
        }
    }
    for t in ["A", "B", "C"] {
        texts.push((format!("mk{t}"), format!("-> {t}()")));
    }
    texts.push(("rmC".into(), "C(1[.]) ->".into()));
    // Context-sensitive: fire only in the presence of an existing bond.
    texts.push((
        "ctx_bind".into(),
        "A(1[b.1],2[.]) , B(1[a.1]) , C(1[.]) -> A(1[b.1],2[c.1]) , B(1[a.1]) , C(1[a.2])".into(),
    ));
    texts.push((
        "ctx_free".into(),
        "A(1[.],2[c.1]) , C(1[a.2]) -> A(1[.],2[.]) , C(1[.])".into(),
    ));
    let rules = texts
        .iter()
        .map(|(name, text)| parse_rule(name, text, &sig).unwrap_or_else(|e| panic!("{name}: {e}")))
        .collect();
    (sig, rules)
}

/// A random valid trace: a random fully-free initial mixture and up to
/// `max_steps` uniformly chosen applicable transitions, keeping the agent
/// count at `max_agents` or below.
pub fn random_trace(
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    rules: &[Rule],
    max_steps: usize,
    max_agents: usize,
) -> Trace {
    let names = ["A", "B", "C"];
    let n = rng.gen_range(1..=4.min(max_agents));
    let init_text = (0..n)
        .map(|_| format!("{}()", names[rng.gen_range(0..names.len())]))
        .collect::<Vec<_>>()
        .join(" , ");
    let init = parse_mixture(&init_text, sig).unwrap();
    let mut state = init.clone();
    let mut transitions = vec![];
    for _ in 0..max_steps {
        let mut options: Vec<Transition> = vec![];
        for r in rules {
            let grows = r.right().agent_count() > r.left().agent_count();
            if grows && state.agent_count() >= max_agents {
                continue;
            }
            options.extend(applications(r, &state));
        }
        if options.is_empty() {
            break;
        }
        let t = options.swap_remove(rng.gen_range(0..options.len()));
        state = t.target().clone();
        transitions.push(t);
    }
    Trace::new(init, transitions).unwrap()
}
