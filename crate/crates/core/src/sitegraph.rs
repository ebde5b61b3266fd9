//! Site-graphs: typed agents with numbered sites, symmetric conflict-free
//! edges, and a distinguished `free` endpoint marking explicitly unbound
//! sites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An agent type name, e.g. `A`. Cheap to clone, compared by content.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentType(Arc<str>);

impl AgentType {
    pub fn new(name: &str) -> Self {
        AgentType(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for AgentType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AgentType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(AgentType::new(&s))
    }
}

/// The signature fixes the agent types and how many sites each type carries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    site_count: BTreeMap<AgentType, u32>,
}

impl Signature {
    pub fn new() -> Self {
        Signature::default()
    }

    /// Declare a type; `sites` must be positive.
    pub fn with_type(mut self, name: &str, sites: u32) -> Self {
        assert!(sites > 0, "agent type must have at least one site");
        self.site_count.insert(AgentType::new(name), sites);
        self
    }

    pub fn site_count(&self, ty: &AgentType) -> Option<u32> {
        self.site_count.get(ty).copied()
    }

    pub fn types(&self) -> impl Iterator<Item = (&AgentType, u32)> {
        self.site_count.iter().map(|(t, n)| (t, *n))
    }

    pub fn resolve(&self, name: &str) -> Option<AgentType> {
        let probe = AgentType::new(name);
        self.site_count.get_key_value(&probe).map(|(t, _)| t.clone())
    }
}

/// Opaque agent identifier. Equality of graphs is decided by canonical form,
/// never by raw ids.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A node is either a (agent, site) pair or the distinguished free endpoint.
/// Site indices are 0-based internally.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Node {
    Free,
    Site(AgentId, u32),
}

impl Node {
    pub fn agent(&self) -> Option<AgentId> {
        match self {
            Node::Free => None,
            Node::Site(a, _) => Some(*a),
        }
    }
}

/// Unordered edge, stored with endpoints sorted.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Edge(Node, Node);

impl Edge {
    pub fn new(a: Node, b: Node) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn endpoints(&self) -> (Node, Node) {
        (self.0, self.1)
    }

    pub fn other(&self, n: Node) -> Option<Node> {
        if self.0 == n {
            Some(self.1)
        } else if self.1 == n {
            Some(self.0)
        } else {
            None
        }
    }

    pub fn touches(&self, n: Node) -> bool {
        self.0 == n || self.1 == n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown agent type `{0}`")]
    UnknownType(String),
    #[error("site index {site} out of range for agent {agent:?} of type {ty} ({count} sites)")]
    SiteIndexOutOfRange {
        agent: AgentId,
        ty: AgentType,
        site: u32,
        count: u32,
    },
    #[error("node {node:?} occurs in two distinct edges")]
    ConflictingEdges { node: Node },
    #[error("edge endpoint {node:?} is not a declared node")]
    DanglingEdgeEndpoint { node: Node },
    #[error("edge must connect two distinct nodes, at least one of them a site")]
    DegenerateEdge,
    #[error("node references undeclared agent {0:?}")]
    UnknownAgent(AgentId),
}

/// A site-graph. All fields are kept consistent by construction; `validate`
/// re-checks every invariant against a signature.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteGraph {
    agents: BTreeMap<AgentId, AgentType>,
    nodes: BTreeSet<(AgentId, u32)>,
    edges: BTreeSet<Edge>,
}

impl fmt::Debug for SiteGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SiteGraph{{")?;
        let mut first = true;
        for (id, ty) in &self.agents {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{ty}{:?}(", id)?;
            let mut sites = vec![];
            for &(a, i) in &self.nodes {
                if a == *id {
                    let state = match self.edge_at(Node::Site(a, i)) {
                        None => format!("{}", i + 1),
                        Some(e) if e.other(Node::Site(a, i)) == Some(Node::Free) => {
                            format!("{}[.]", i + 1)
                        }
                        Some(e) => match e.other(Node::Site(a, i)).unwrap() {
                            Node::Site(b, j) => format!("{}[{:?}.{}]", i + 1, b, j + 1),
                            Node::Free => unreachable!(),
                        },
                    };
                    sites.push(state);
                }
            }
            write!(f, "{})", sites.join(","))?;
        }
        write!(f, "}}")
    }
}

impl SiteGraph {
    /// The empty graph.
    pub fn empty() -> Self {
        SiteGraph::default()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = (AgentId, &AgentType)> {
        self.agents.iter().map(|(id, ty)| (*id, ty))
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.keys().copied()
    }

    pub fn agent_type(&self, a: AgentId) -> Option<&AgentType> {
        self.agents.get(&a)
    }

    pub fn has_agent(&self, a: AgentId) -> bool {
        self.agents.contains_key(&a)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (AgentId, u32)> + '_ {
        self.nodes.iter().copied()
    }

    pub fn has_node(&self, a: AgentId, site: u32) -> bool {
        self.nodes.contains(&(a, site))
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        self.edges.contains(&e)
    }

    /// The unique edge at a non-free node, if any.
    pub fn edge_at(&self, n: Node) -> Option<Edge> {
        debug_assert!(n != Node::Free);
        self.edges.iter().copied().find(|e| e.touches(n))
    }

    pub fn max_agent_id(&self) -> Option<u32> {
        self.agents.keys().map(|a| a.0).max()
    }

    pub fn add_agent(&mut self, id: AgentId, ty: AgentType) {
        let prev = self.agents.insert(id, ty);
        debug_assert!(prev.is_none(), "duplicate agent id {id:?}");
    }

    pub fn add_node(&mut self, a: AgentId, site: u32) {
        debug_assert!(self.agents.contains_key(&a));
        self.nodes.insert((a, site));
    }

    /// Adds an edge; endpoints must already be declared nodes (or free).
    pub fn add_edge(&mut self, n1: Node, n2: Node) {
        for n in [n1, n2] {
            if let Node::Site(a, i) = n {
                debug_assert!(self.nodes.contains(&(a, i)), "undeclared endpoint {n:?}");
            }
        }
        self.edges.insert(Edge::new(n1, n2));
        debug_assert!(self.is_conflict_free(), "edge insertion broke conflict-freeness");
    }

    pub fn remove_edge(&mut self, e: Edge) {
        self.edges.remove(&e);
    }

    pub fn remove_node(&mut self, a: AgentId, site: u32) {
        self.nodes.remove(&(a, site));
    }

    pub fn remove_agent(&mut self, a: AgentId) {
        self.agents.remove(&a);
        self.nodes.retain(|&(b, _)| b != a);
    }

    /// Conflict-freeness: no non-free node occurs in two distinct edges.
    pub fn is_conflict_free(&self) -> bool {
        self.conflict_node().is_none()
    }

    /// The first node breaking conflict-freeness, if any.
    pub fn conflict_node(&self) -> Option<Node> {
        let mut seen: BTreeMap<Node, Edge> = BTreeMap::new();
        for &e in &self.edges {
            let (n1, n2) = e.endpoints();
            for n in [n1, n2] {
                if n == Node::Free {
                    continue;
                }
                if let Some(prev) = seen.insert(n, e) {
                    if prev != e {
                        return Some(n);
                    }
                }
            }
        }
        None
    }

    /// Full invariant check against a signature. Returns all violations.
    pub fn validate(&self, sig: &Signature) -> Result<(), Vec<GraphError>> {
        let mut errs = vec![];
        for (id, ty) in &self.agents {
            if sig.site_count(ty).is_none() {
                errs.push(GraphError::UnknownType(ty.name().to_string()));
                let _ = id;
            }
        }
        for &(a, i) in &self.nodes {
            match self.agents.get(&a) {
                None => errs.push(GraphError::UnknownAgent(a)),
                Some(ty) => {
                    if let Some(count) = sig.site_count(ty) {
                        if i >= count {
                            errs.push(GraphError::SiteIndexOutOfRange {
                                agent: a,
                                ty: ty.clone(),
                                site: i,
                                count,
                            });
                        }
                    }
                }
            }
        }
        for &e in &self.edges {
            let (n1, n2) = e.endpoints();
            if n1 == n2 || (n1 == Node::Free && n2 == Node::Free) {
                errs.push(GraphError::DegenerateEdge);
            }
            for n in [n1, n2] {
                if let Node::Site(a, i) = n {
                    if !self.nodes.contains(&(a, i)) {
                        errs.push(GraphError::DanglingEdgeEndpoint { node: n });
                    }
                }
            }
        }
        if let Some(node) = self.conflict_node() {
            errs.push(GraphError::ConflictingEdges { node });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Builds a validated graph from raw parts.
    pub fn validated(
        agents: Vec<(AgentId, AgentType)>,
        nodes: Vec<(AgentId, u32)>,
        edges: Vec<(Node, Node)>,
        sig: &Signature,
    ) -> Result<SiteGraph, Vec<GraphError>> {
        let mut g = SiteGraph::default();
        for (id, ty) in agents {
            g.agents.insert(id, ty);
        }
        for n in nodes {
            g.nodes.insert(n);
        }
        for (n1, n2) in edges {
            g.edges.insert(Edge::new(n1, n2));
        }
        g.validate(sig)?;
        Ok(g)
    }

    /// Relabels every agent through `map`; ids not in the map are kept.
    /// The caller must ensure the result has no id collisions.
    pub fn relabeled(&self, map: &BTreeMap<AgentId, AgentId>) -> SiteGraph {
        let tr = |a: AgentId| map.get(&a).copied().unwrap_or(a);
        let trn = |n: Node| match n {
            Node::Free => Node::Free,
            Node::Site(a, i) => Node::Site(tr(a), i),
        };
        let mut g = SiteGraph::default();
        for (id, ty) in &self.agents {
            let prev = g.agents.insert(tr(*id), ty.clone());
            assert!(prev.is_none(), "relabeling collided on {:?}", tr(*id));
        }
        for &(a, i) in &self.nodes {
            g.nodes.insert((tr(a), i));
        }
        for &e in &self.edges {
            let (n1, n2) = e.endpoints();
            g.edges.insert(Edge::new(trn(n1), trn(n2)));
        }
        g
    }

    /// True if `self` is an honest subgraph of `other` (same ids).
    pub fn is_subgraph_of(&self, other: &SiteGraph) -> bool {
        self.agents
            .iter()
            .all(|(id, ty)| other.agents.get(id) == Some(ty))
            && self.nodes.is_subset(&other.nodes)
            && self.edges.is_subset(&other.edges)
    }
}

/// Canonical form: a relabeling of `g` onto ids `0..n` such that two graphs
/// are isomorphic iff their canonical forms are equal. The certificate maps
/// original ids to canonical ids.
pub fn iso_canonical(g: &SiteGraph) -> (SiteGraph, BTreeMap<AgentId, AgentId>) {
    let (graph, cert, _) = canonical_with_annotations(g, |_| 0u64);
    (graph, cert)
}

/// Canonical form where agents additionally carry an annotation that the
/// relabeling must respect (used to canonicalize graphs with pinned
/// morphism images). Returns the relabeled graph, the certificate, and the
/// annotation sequence in canonical id order.
pub fn canonical_with_annotations<A: Ord + Clone>(
    g: &SiteGraph,
    ann: impl Fn(AgentId) -> A,
) -> (SiteGraph, BTreeMap<AgentId, AgentId>, Vec<A>) {
    let ids: Vec<AgentId> = g.agent_ids().collect();
    if ids.is_empty() {
        return (g.clone(), BTreeMap::new(), vec![]);
    }
    // Candidate orderings must list (type, annotation) classes in sorted
    // order; permute only within classes.
    let mut classes: BTreeMap<(AgentType, A), Vec<AgentId>> = BTreeMap::new();
    for &id in &ids {
        classes
            .entry((g.agent_type(id).unwrap().clone(), ann(id)))
            .or_default()
            .push(id);
    }
    let class_lists: Vec<Vec<AgentId>> = classes.into_values().collect();

    let mut best: Option<(SiteGraph, BTreeMap<AgentId, AgentId>)> = None;
    let mut perm: Vec<AgentId> = Vec::with_capacity(ids.len());
    fn rec(
        class_lists: &[Vec<AgentId>],
        class_idx: usize,
        used: &mut BTreeSet<AgentId>,
        perm: &mut Vec<AgentId>,
        g: &SiteGraph,
        best: &mut Option<(SiteGraph, BTreeMap<AgentId, AgentId>)>,
    ) {
        if class_idx == class_lists.len() {
            let map: BTreeMap<AgentId, AgentId> = perm
                .iter()
                .enumerate()
                .map(|(new, old)| (*old, AgentId(new as u32)))
                .collect();
            let candidate = g.relabeled(&map);
            match best {
                None => *best = Some((candidate, map)),
                Some((b, _)) if candidate < *b => *best = Some((candidate, map)),
                _ => {}
            }
            return;
        }
        let class = &class_lists[class_idx];
        if class.iter().all(|a| used.contains(a)) {
            rec(class_lists, class_idx + 1, used, perm, g, best);
            return;
        }
        for &a in class {
            if used.contains(&a) {
                continue;
            }
            used.insert(a);
            perm.push(a);
            rec(class_lists, class_idx, used, perm, g, best);
            perm.pop();
            used.remove(&a);
        }
    }
    let mut used = BTreeSet::new();
    rec(&class_lists, 0, &mut used, &mut perm, g, &mut best);
    let (graph, cert) = best.unwrap();
    let mut anns: Vec<(AgentId, A)> = cert.iter().map(|(old, new)| (*new, ann(*old))).collect();
    anns.sort();
    let anns = anns.into_iter().map(|(_, a)| a).collect();
    (graph, cert, anns)
}

/// True iff the two graphs are isomorphic.
pub fn are_isomorphic(a: &SiteGraph, b: &SiteGraph) -> bool {
    if a.agent_count() != b.agent_count()
        || a.nodes.len() != b.nodes.len()
        || a.edges.len() != b.edges.len()
    {
        return false;
    }
    iso_canonical(a).0 == iso_canonical(b).0
}
