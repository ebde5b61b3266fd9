//! Categorical constructions on site-graphs: pullbacks, pushouts of spans
//! of monos, multisums (minimal gluings), span composition and partial
//! morphisms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphism::{Cospan, Morphism, Span};
use crate::sitegraph::{AgentId, AgentType, Edge, Node, SiteGraph};

/// What a site was asked to be bound to when a gluing failed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartnerDesc {
    Free,
    Bond(AgentType, u32),
}

impl std::fmt::Display for PartnerDesc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartnerDesc::Free => write!(f, "free"),
            PartnerDesc::Bond(ty, site) => write!(f, "bound to {}.{}", ty, site + 1),
        }
    }
}

/// A site that would have to carry two distinct edges in the glued graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PushoutObstruction {
    pub agent_type: AgentType,
    /// 0-based site index.
    pub site: u32,
    pub partners: Vec<PartnerDesc>,
}

impl PushoutObstruction {
    /// True when the clash is between an explicit bond and explicit freeness.
    pub fn is_bound_vs_free(&self) -> bool {
        self.partners.contains(&PartnerDesc::Free)
            && self.partners.iter().any(|p| matches!(p, PartnerDesc::Bond(..)))
    }
}

impl std::fmt::Display for PushoutObstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let descs: Vec<String> = self.partners.iter().map(|p| p.to_string()).collect();
        write!(
            f,
            "site {} of agent {} has to be {} at the same time",
            self.site + 1,
            self.agent_type,
            descs.join(" and ")
        )
    }
}

/// The glued object would violate conflict-freeness: some site is forced to
/// be simultaneously bound twice, or bound and free.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("no pushout: {}", .obstructions.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("; "))]
pub struct NoPushout {
    pub obstructions: Vec<PushoutObstruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatError {
    #[error("left leg of the span is not a mono")]
    LeftLegNotMono,
}

/// Pullback of a cospan: the apex collects the coincidences of both legs.
/// Always exists.
pub fn pullback(c: &Cospan) -> Span {
    let f1 = &c.left;
    let f2 = &c.right;
    let g1 = f1.source();
    let g2 = f2.source();

    let mut apex = SiteGraph::empty();
    let mut to_g1: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut to_g2: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut pair_id: BTreeMap<(AgentId, AgentId), AgentId> = BTreeMap::new();

    let mut next = 0u32;
    for (a1, ty) in g1.agents() {
        for (a2, _) in g2.agents() {
            if f1.apply(a1) == f2.apply(a2) {
                let id = AgentId(next);
                next += 1;
                apex.add_agent(id, ty.clone());
                to_g1.insert(id, a1);
                to_g2.insert(id, a2);
                pair_id.insert((a1, a2), id);
            }
        }
    }
    let pairs: Vec<(AgentId, (AgentId, AgentId))> =
        pair_id.iter().map(|(p, id)| (*id, *p)).collect();
    for &(id, (a1, a2)) in &pairs {
        let ty = apex.agent_type(id).unwrap().clone();
        let _ = ty;
        let sites: Vec<u32> = g1
            .nodes()
            .filter(|&(x, _)| x == a1)
            .map(|(_, i)| i)
            .filter(|&i| g2.has_node(a2, i))
            .collect();
        for i in sites {
            apex.add_node(id, i);
        }
    }
    // Candidate apex edges: pairs of apex nodes (or free) whose images are
    // edges on both sides. Conflict-freeness of the legs' sources keeps the
    // apex conflict-free.
    let apex_nodes: Vec<Node> = apex
        .nodes()
        .map(|(a, i)| Node::Site(a, i))
        .chain(std::iter::once(Node::Free))
        .collect();
    let proj = |n: Node, side1: bool| -> Node {
        match n {
            Node::Free => Node::Free,
            Node::Site(o, i) => {
                let a = if side1 { to_g1[&o] } else { to_g2[&o] };
                Node::Site(a, i)
            }
        }
    };
    for (k, &n1) in apex_nodes.iter().enumerate() {
        for &n2 in apex_nodes.iter().skip(k) {
            if n1 == n2 {
                continue;
            }
            let e1 = Edge::new(proj(n1, true), proj(n2, true));
            let e2 = Edge::new(proj(n1, false), proj(n2, false));
            if g1.has_edge(e1) && g2.has_edge(e2) {
                apex.add_edge(n1, n2);
            }
        }
    }

    let left = Morphism::new(apex.clone(), g1.clone(), to_g1).expect("pullback left leg");
    let right = Morphism::new(apex, g2.clone(), to_g2).expect("pullback right leg");
    Span::new(left, right)
}

/// Pushout of a span of monos: glues the two targets along the apex. Fails
/// when the gluing is not a site-graph.
pub fn pushout(s: &Span) -> Result<Cospan, NoPushout> {
    assert!(s.left.is_mono() && s.right.is_mono(), "pushout requires a span of monos");
    let g1 = s.left.target();
    let g2 = s.right.target();

    let mut m = SiteGraph::empty();
    let mut f1_map: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut f2_map: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    let mut next = 0u32;

    for (a1, ty) in g1.agents() {
        let id = AgentId(next);
        next += 1;
        m.add_agent(id, ty.clone());
        f1_map.insert(a1, id);
    }
    // Agents of G2 in the image of the apex merge with their G1 partner.
    for (o, _) in s.apex().agents() {
        let a1 = s.left.apply(o).unwrap();
        let a2 = s.right.apply(o).unwrap();
        f2_map.insert(a2, f1_map[&a1]);
    }
    for (a2, ty) in g2.agents() {
        if !f2_map.contains_key(&a2) {
            let id = AgentId(next);
            next += 1;
            m.add_agent(id, ty.clone());
            f2_map.insert(a2, id);
        }
    }

    for (a, i) in g1.nodes() {
        m.add_node(f1_map[&a], i);
    }
    for (a, i) in g2.nodes() {
        if !m.has_node(f2_map[&a], i) {
            m.add_node(f2_map[&a], i);
        }
    }
    let tr = |map: &BTreeMap<AgentId, AgentId>, n: Node| match n {
        Node::Free => Node::Free,
        Node::Site(a, i) => Node::Site(map[&a], i),
    };
    let mut edges: Vec<Edge> = vec![];
    for e in g1.edges() {
        let (n1, n2) = e.endpoints();
        edges.push(Edge::new(tr(&f1_map, n1), tr(&f1_map, n2)));
    }
    for e in g2.edges() {
        let (n1, n2) = e.endpoints();
        edges.push(Edge::new(tr(&f2_map, n1), tr(&f2_map, n2)));
    }
    // Collect edges per site first so a conflict is reported, not asserted.
    let mut per_node: BTreeMap<Node, Vec<Edge>> = BTreeMap::new();
    for &e in &edges {
        let (n1, n2) = e.endpoints();
        for n in [n1, n2] {
            if n == Node::Free {
                continue;
            }
            let v = per_node.entry(n).or_default();
            if !v.contains(&e) {
                v.push(e);
            }
        }
    }
    let mut obstructions = vec![];
    for (n, es) in &per_node {
        if es.len() > 1 {
            let (a, i) = match n {
                Node::Site(a, i) => (*a, *i),
                Node::Free => unreachable!(),
            };
            let partners = es
                .iter()
                .map(|e| match e.other(*n).unwrap() {
                    Node::Free => PartnerDesc::Free,
                    Node::Site(b, j) => {
                        PartnerDesc::Bond(m.agent_type(b).unwrap().clone(), j)
                    }
                })
                .collect();
            obstructions.push(PushoutObstruction {
                agent_type: m.agent_type(a).unwrap().clone(),
                site: i,
                partners,
            });
        }
    }
    if !obstructions.is_empty() {
        return Err(NoPushout { obstructions });
    }
    for e in edges {
        let (n1, n2) = e.endpoints();
        m.add_edge(n1, n2);
    }

    let left = Morphism::new(g1.clone(), m.clone(), f1_map).expect("pushout left leg");
    let right = Morphism::new(g2.clone(), m, f2_map).expect("pushout right leg");
    Ok(Cospan::new(left, right))
}

/// The multisum of two graphs: one cospan of monos per minimal gluing,
/// computed by enumerating partial injective type-preserving agent
/// identifications and dropping gluings that are not site-graphs.
pub fn multisum(g1: &SiteGraph, g2: &SiteGraph) -> Vec<Cospan> {
    let a1: Vec<AgentId> = g1.agent_ids().collect();
    let mut out = vec![];
    let mut sigma: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    rec_multisum(g1, g2, &a1, 0, &mut sigma, &mut out);
    out
}

fn rec_multisum(
    g1: &SiteGraph,
    g2: &SiteGraph,
    a1: &[AgentId],
    idx: usize,
    sigma: &mut BTreeMap<AgentId, AgentId>,
    out: &mut Vec<Cospan>,
) {
    if idx == a1.len() {
        // Glue along sigma via a pushout over a bare-agent apex.
        let mut apex = SiteGraph::empty();
        let mut l: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        let mut r: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        for (k, (x, y)) in sigma.iter().enumerate() {
            let id = AgentId(k as u32);
            apex.add_agent(id, g1.agent_type(*x).unwrap().clone());
            l.insert(id, *x);
            r.insert(id, *y);
        }
        let left = Morphism::new(apex.clone(), g1.clone(), l).expect("multisum apex leg");
        let right = Morphism::new(apex, g2.clone(), r).expect("multisum apex leg");
        if let Ok(cospan) = pushout(&Span::new(left, right)) {
            out.push(cospan);
        }
        return;
    }
    let a = a1[idx];
    // Leave `a` unidentified.
    rec_multisum(g1, g2, a1, idx + 1, sigma, out);
    let ty = g1.agent_type(a).unwrap();
    for (b, tyb) in g2.agents() {
        if tyb != ty || sigma.values().any(|v| *v == b) {
            continue;
        }
        sigma.insert(a, b);
        rec_multisum(g1, g2, a1, idx + 1, sigma, out);
        sigma.remove(&a);
    }
}

/// Span composition via the pullback of the shared middle cospan.
pub fn compose_spans(f: &Span, g: &Span) -> Span {
    assert_eq!(
        f.right.target(),
        g.left.target(),
        "spans are not composable"
    );
    let h = pullback(&Cospan::new(f.right.clone(), g.left.clone()));
    Span::new(
        h.left.then(&f.left).expect("composable"),
        h.right.then(&g.right).expect("composable"),
    )
}

/// A partial morphism: a total morphism from an honest subgraph of the
/// source into the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialMorphism {
    pub source: SiteGraph,
    pub target: SiteGraph,
    pub domain: SiteGraph,
    pub total_part: Morphism,
}

impl PartialMorphism {
    pub fn defined_on(&self, a: AgentId) -> bool {
        self.domain.has_agent(a)
    }

    pub fn apply(&self, a: AgentId) -> Option<AgentId> {
        self.total_part.apply(a)
    }

    pub fn apply_edge(&self, e: Edge) -> Option<Edge> {
        if !self.domain.has_edge(e) {
            return None;
        }
        self.total_part.apply_edge(e)
    }
}

/// The partial morphism of a span whose left leg is a mono: defined on the
/// left image, mapping through the apex to the right.
pub fn span_to_partial(s: &Span) -> Result<PartialMorphism, CatError> {
    if !s.left.is_mono() {
        return Err(CatError::LeftLegNotMono);
    }
    let domain = s.left.image();
    let map: BTreeMap<AgentId, AgentId> = domain
        .agent_ids()
        .map(|a| {
            let o = s.left.preimage(a).expect("domain is the left image");
            (a, s.right.apply(o).unwrap())
        })
        .collect();
    let total_part =
        Morphism::new(domain.clone(), s.right.target().clone(), map).expect("partial morphism");
    Ok(PartialMorphism {
        source: s.left.target().clone(),
        target: s.right.target().clone(),
        domain,
        total_part,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sitegraph::AgentType;

    fn bond_graph() -> SiteGraph {
        // A.0 bound to B.0
        let mut g = SiteGraph::empty();
        g.add_agent(AgentId(0), AgentType::new("A"));
        g.add_agent(AgentId(1), AgentType::new("B"));
        g.add_node(AgentId(0), 0);
        g.add_node(AgentId(1), 0);
        g.add_edge(Node::Site(AgentId(0), 0), Node::Site(AgentId(1), 0));
        g
    }

    #[test]
    fn pullback_of_identities_is_identity() {
        let g = bond_graph();
        let id = Morphism::identity(&g);
        let pb = pullback(&Cospan::new(id.clone(), id));
        assert!(crate::sitegraph::are_isomorphic(pb.apex(), &g));
        assert_eq!(pb.left, pb.right);
    }

    #[test]
    fn pullback_of_disjoint_images_is_empty() {
        let mut a = SiteGraph::empty();
        a.add_agent(AgentId(0), AgentType::new("A"));
        let mut b = SiteGraph::empty();
        b.add_agent(AgentId(0), AgentType::new("B"));
        let mut m = SiteGraph::empty();
        m.add_agent(AgentId(0), AgentType::new("A"));
        m.add_agent(AgentId(1), AgentType::new("B"));
        let fa = crate::morphism::enumerate_monos(&a, &m).remove(0);
        let fb = crate::morphism::enumerate_monos(&b, &m).remove(0);
        let pb = pullback(&Cospan::new(fa, fb));
        assert!(pb.apex().is_empty());
    }

    #[test]
    fn pushout_over_empty_apex_is_disjoint_union() {
        let g = bond_graph();
        let e = SiteGraph::empty();
        let l = Morphism::new(e.clone(), g.clone(), BTreeMap::new()).unwrap();
        let r = Morphism::new(e, g.clone(), BTreeMap::new()).unwrap();
        let po = pushout(&Span::new(l, r)).unwrap();
        assert_eq!(po.target().agent_count(), 2 * g.agent_count());
    }

    #[test]
    fn pushout_detects_bound_vs_free() {
        // G1: A.0 free; G2: A.0 bound to B.0; glued over the shared A.
        let mut g1 = SiteGraph::empty();
        g1.add_agent(AgentId(0), AgentType::new("A"));
        g1.add_node(AgentId(0), 0);
        g1.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        let g2 = bond_graph();
        let mut apex = SiteGraph::empty();
        apex.add_agent(AgentId(0), AgentType::new("A"));
        let l = Morphism::new(apex.clone(), g1, [(AgentId(0), AgentId(0))].into()).unwrap();
        let r = Morphism::new(apex, g2, [(AgentId(0), AgentId(0))].into()).unwrap();
        let err = pushout(&Span::new(l, r)).unwrap_err();
        assert_eq!(err.obstructions.len(), 1);
        assert!(err.obstructions[0].is_bound_vs_free());
        assert_eq!(err.obstructions[0].site, 0);
    }

    #[test]
    fn multisum_empty_left_gives_single_member() {
        let g = bond_graph();
        let ms = multisum(&SiteGraph::empty(), &g);
        assert_eq!(ms.len(), 1);
        assert!(crate::sitegraph::are_isomorphic(ms[0].target(), &g));
    }

    #[test]
    fn multisum_distinct_types_cannot_merge() {
        let mut a = SiteGraph::empty();
        a.add_agent(AgentId(0), AgentType::new("A"));
        let mut b = SiteGraph::empty();
        b.add_agent(AgentId(0), AgentType::new("B"));
        assert_eq!(multisum(&a, &b).len(), 1);
    }

    #[test]
    fn multisum_same_type_merges_or_not() {
        let mut a = SiteGraph::empty();
        a.add_agent(AgentId(0), AgentType::new("A"));
        let ms = multisum(&a, &a);
        assert_eq!(ms.len(), 2);
    }

    #[test]
    fn identity_span_is_composition_unit() {
        let g = bond_graph();
        let s = Span::identity(&g);
        let c = compose_spans(&s, &s);
        assert!(crate::sitegraph::are_isomorphic(c.apex(), &g));
    }

    #[test]
    fn span_to_partial_requires_mono_left_leg() {
        let mut two = SiteGraph::empty();
        two.add_agent(AgentId(0), AgentType::new("A"));
        two.add_agent(AgentId(1), AgentType::new("A"));
        let mut one = SiteGraph::empty();
        one.add_agent(AgentId(0), AgentType::new("A"));
        let collapse = Morphism::new(
            two.clone(),
            one.clone(),
            [(AgentId(0), AgentId(0)), (AgentId(1), AgentId(0))].into(),
        )
        .unwrap();
        let id = Morphism::new(two.clone(), two.clone(), [(AgentId(0), AgentId(0)), (AgentId(1), AgentId(1))].into()).unwrap();
        assert_eq!(
            span_to_partial(&Span::new(collapse, id)),
            Err(CatError::LeftLegNotMono)
        );
    }

    #[test]
    fn nowhere_defined_partial_morphism() {
        let g = bond_graph();
        let e = SiteGraph::empty();
        let l = Morphism::new(e.clone(), g.clone(), BTreeMap::new()).unwrap();
        let r = Morphism::new(e, g.clone(), BTreeMap::new()).unwrap();
        let p = span_to_partial(&Span::new(l, r)).unwrap();
        assert!(p.domain.is_empty());
    }
}
