//! Morphisms between site-graphs, spans, cospans, and the matching engine
//! (enumeration of monos and of general morphisms).

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sitegraph::{AgentId, Edge, Node, SiteGraph};

/// A type-preserving structure map between site-graphs. The node and edge
/// maps are the canonical extension of the agent map: v(a,i) = (v(a),i) and
/// v(free) = free.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Morphism {
    source: SiteGraph,
    target: SiteGraph,
    map: BTreeMap<AgentId, AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("agent {0:?} of the source is not mapped")]
    UnmappedAgent(AgentId),
    #[error("map does not preserve the type of agent {0:?}")]
    TypeNotPreserved(AgentId),
    #[error("node ({0:?},{1}) has no counterpart in the target")]
    NodeNotPreserved(AgentId, u32),
    #[error("edge {0:?} has no counterpart in the target")]
    EdgeNotPreserved(Edge),
    #[error("morphisms are not composable: codomain/domain mismatch")]
    NotComposable,
}

impl Morphism {
    /// Builds and checks a morphism from an agent map.
    pub fn new(
        source: SiteGraph,
        target: SiteGraph,
        map: BTreeMap<AgentId, AgentId>,
    ) -> Result<Morphism, MorphismError> {
        let m = Morphism { source, target, map };
        m.check()?;
        Ok(m)
    }

    /// Identity morphism on `g`.
    pub fn identity(g: &SiteGraph) -> Morphism {
        let map = g.agent_ids().map(|a| (a, a)).collect();
        Morphism {
            source: g.clone(),
            target: g.clone(),
            map,
        }
    }

    /// Inclusion of a subgraph (same agent ids) into a larger graph.
    pub fn inclusion(sub: &SiteGraph, sup: &SiteGraph) -> Result<Morphism, MorphismError> {
        let map = sub.agent_ids().map(|a| (a, a)).collect();
        Morphism::new(sub.clone(), sup.clone(), map)
    }

    pub fn source(&self) -> &SiteGraph {
        &self.source
    }

    pub fn target(&self) -> &SiteGraph {
        &self.target
    }

    pub fn agent_map(&self) -> &BTreeMap<AgentId, AgentId> {
        &self.map
    }

    pub fn apply(&self, a: AgentId) -> Option<AgentId> {
        self.map.get(&a).copied()
    }

    pub fn apply_node(&self, n: Node) -> Option<Node> {
        match n {
            Node::Free => Some(Node::Free),
            Node::Site(a, i) => self.apply(a).map(|b| Node::Site(b, i)),
        }
    }

    pub fn apply_edge(&self, e: Edge) -> Option<Edge> {
        let (n1, n2) = e.endpoints();
        Some(Edge::new(self.apply_node(n1)?, self.apply_node(n2)?))
    }

    /// Verifies every morphism invariant.
    pub fn check(&self) -> Result<(), MorphismError> {
        for (a, ty) in self.source.agents() {
            let b = self.apply(a).ok_or(MorphismError::UnmappedAgent(a))?;
            if self.target.agent_type(b) != Some(ty) {
                return Err(MorphismError::TypeNotPreserved(a));
            }
        }
        for (a, i) in self.source.nodes() {
            let b = self.apply(a).ok_or(MorphismError::UnmappedAgent(a))?;
            if !self.target.has_node(b, i) {
                return Err(MorphismError::NodeNotPreserved(a, i));
            }
        }
        for e in self.source.edges() {
            let img = self.apply_edge(e).ok_or(MorphismError::EdgeNotPreserved(e))?;
            if !self.target.has_edge(img) {
                return Err(MorphismError::EdgeNotPreserved(e));
            }
        }
        Ok(())
    }

    /// Injective on agents (hence on nodes and, by conflict-freeness, edges).
    pub fn is_mono(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.map.values().all(|b| seen.insert(*b))
    }

    pub fn is_iso(&self) -> bool {
        self.is_mono()
            && self.map.len() == self.target.agent_count()
            && self.source.nodes().count() == self.target.nodes().count()
            && self.source.edges().count() == self.target.edges().count()
    }

    /// `other ∘ self` fails unless `self.target == other.source`.
    pub fn then(&self, other: &Morphism) -> Result<Morphism, MorphismError> {
        if self.target != other.source {
            return Err(MorphismError::NotComposable);
        }
        let map = self
            .map
            .iter()
            .map(|(a, b)| (*a, other.apply(*b).expect("composable")))
            .collect();
        Ok(Morphism {
            source: self.source.clone(),
            target: other.target.clone(),
            map,
        })
    }

    /// Image of the source inside the target, as a subgraph of the target.
    pub fn image(&self) -> SiteGraph {
        let mut g = SiteGraph::empty();
        for (a, _) in self.source.agents() {
            let b = self.apply(a).unwrap();
            if !g.has_agent(b) {
                g.add_agent(b, self.target.agent_type(b).unwrap().clone());
            }
        }
        for (a, i) in self.source.nodes() {
            g.add_node(self.apply(a).unwrap(), i);
        }
        for e in self.source.edges() {
            let (n1, n2) = self.apply_edge(e).unwrap().endpoints();
            g.add_edge(n1, n2);
        }
        g
    }

    /// Unique preimage of a target agent (only meaningful for monos).
    pub fn preimage(&self, b: AgentId) -> Option<AgentId> {
        self.map.iter().find(|(_, v)| **v == b).map(|(k, _)| *k)
    }
}

/// Span G1 <- O -> G2; both legs share the apex as their source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub left: Morphism,
    pub right: Morphism,
}

impl Span {
    pub fn new(left: Morphism, right: Morphism) -> Span {
        assert_eq!(left.source(), right.source(), "span legs must share the apex");
        Span { left, right }
    }

    pub fn apex(&self) -> &SiteGraph {
        self.left.source()
    }

    pub fn identity(g: &SiteGraph) -> Span {
        Span {
            left: Morphism::identity(g),
            right: Morphism::identity(g),
        }
    }
}

/// Cospan G1 -> M <- G2; both legs share the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cospan {
    pub left: Morphism,
    pub right: Morphism,
}

impl Cospan {
    pub fn new(left: Morphism, right: Morphism) -> Cospan {
        assert_eq!(left.target(), right.target(), "cospan legs must share the target");
        Cospan { left, right }
    }

    pub fn target(&self) -> &SiteGraph {
        self.left.target()
    }
}

/// All morphisms G -> H (monos only when `mono` is set), in the
/// deterministic order induced by sorted agent ids and candidates.
pub fn enumerate_morphisms(g: &SiteGraph, h: &SiteGraph, mono: bool) -> Vec<Morphism> {
    let src: Vec<AgentId> = g.agent_ids().collect();
    let mut out = vec![];
    let mut map: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut used: BTreeSet<AgentId> = BTreeSet::new();

    fn consistent(g: &SiteGraph, h: &SiteGraph, map: &BTreeMap<AgentId, AgentId>, a: AgentId) -> bool {
        let b = map[&a];
        for (x, i) in g.nodes() {
            if x != a {
                continue;
            }
            if !h.has_node(b, i) {
                return false;
            }
        }
        for e in g.edges() {
            let (n1, n2) = e.endpoints();
            if n1.agent() != Some(a) && n2.agent() != Some(a) {
                continue;
            }
            let tr = |n: Node| match n {
                Node::Free => Some(Node::Free),
                Node::Site(x, i) => map.get(&x).map(|y| Node::Site(*y, i)),
            };
            if let (Some(m1), Some(m2)) = (tr(n1), tr(n2)) {
                if !h.has_edge(Edge::new(m1, m2)) {
                    return false;
                }
            }
        }
        true
    }

    fn rec(
        src: &[AgentId],
        idx: usize,
        g: &SiteGraph,
        h: &SiteGraph,
        mono: bool,
        map: &mut BTreeMap<AgentId, AgentId>,
        used: &mut BTreeSet<AgentId>,
        out: &mut Vec<Morphism>,
    ) {
        if idx == src.len() {
            out.push(Morphism {
                source: g.clone(),
                target: h.clone(),
                map: map.clone(),
            });
            return;
        }
        let a = src[idx];
        let ty = g.agent_type(a).unwrap();
        for (b, tyb) in h.agents() {
            if tyb != ty || (mono && used.contains(&b)) {
                continue;
            }
            map.insert(a, b);
            used.insert(b);
            if consistent(g, h, map, a) {
                rec(src, idx + 1, g, h, mono, map, used, out);
            }
            map.remove(&a);
            used.remove(&b);
        }
    }

    rec(&src, 0, g, h, mono, &mut map, &mut used, &mut out);
    out
}

/// All injective type-, node- and edge-preserving agent maps G -> H.
/// An explicitly free site in G must be explicitly free in H as well,
/// which is edge preservation applied to the free endpoint.
pub fn enumerate_monos(g: &SiteGraph, h: &SiteGraph) -> Vec<Morphism> {
    enumerate_morphisms(g, h, true)
}
