//! Rules as spans of monos, double-pushout rewriting, transitions and
//! traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catops::{pushout, NoPushout};
use crate::morphism::{Morphism, Span};
use crate::sitegraph::{AgentId, AgentType, Edge, Node, SiteGraph};

/// A rewriting rule L <- K -> R. Both legs are monos, and every interface
/// node is an edge endpoint on both sides or on neither, so a rule never
/// silently forgets a binding constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule {0}: left leg is not a mono")]
    LeftLegNotMono(String),
    #[error("rule {0}: right leg is not a mono")]
    RightLegNotMono(String),
    #[error(
        "rule {name}: interface site {}.{} is constrained on only one side",
        agent_type,
        site + 1
    )]
    OneSidedConstraint {
        name: String,
        agent_type: AgentType,
        site: u32,
    },
}

impl Rule {
    pub fn new(name: impl Into<String>, span: Span) -> Result<Rule, RuleError> {
        let rule = Rule { name: name.into(), span };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        if !self.span.left.is_mono() {
            return Err(RuleError::LeftLegNotMono(self.name.clone()));
        }
        if !self.span.right.is_mono() {
            return Err(RuleError::RightLegNotMono(self.name.clone()));
        }
        for (a, i) in self.interface().nodes() {
            let nl = self.span.left.apply_node(Node::Site(a, i)).unwrap();
            let nr = self.span.right.apply_node(Node::Site(a, i)).unwrap();
            let in_l = self.left().edge_at(nl).is_some();
            let in_r = self.right().edge_at(nr).is_some();
            if in_l != in_r {
                return Err(RuleError::OneSidedConstraint {
                    name: self.name.clone(),
                    agent_type: self.interface().agent_type(a).unwrap().clone(),
                    site: i,
                });
            }
        }
        Ok(())
    }

    pub fn left(&self) -> &SiteGraph {
        self.span.left.target()
    }

    pub fn interface(&self) -> &SiteGraph {
        self.span.apex()
    }

    pub fn right(&self) -> &SiteGraph {
        self.span.right.target()
    }
}

/// Why a match of a rule's left-hand side admits no rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NoContext {
    #[error("matching is not a mono")]
    MatchNotMono,
    #[error("dangling edge at deleted agent {agent_type}#{}", agent.0)]
    DanglingEdge { agent: AgentId, agent_type: AgentType },
    #[error("cannot restore the right-hand side: {0}")]
    RightConflict(NoPushout),
}

/// One rewrite step: M is rewritten to N through the preserved context D,
/// with D included in both M and N (the agent identifiers of D are those of
/// M, and N extends D with fresh identifiers).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub rule: Rule,
    /// The matching L -> M.
    pub matching: Morphism,
    /// The comatching R -> N.
    pub comatching: Morphism,
    /// The preserved context D, a subgraph of both M and N.
    pub context: SiteGraph,
}

impl Transition {
    pub fn source(&self) -> &SiteGraph {
        self.matching.target()
    }

    pub fn target(&self) -> &SiteGraph {
        self.comatching.target()
    }

    /// The span M <- D -> N of inclusions through the preserved context.
    pub fn mix(&self) -> Span {
        Span::new(
            Morphism::inclusion(&self.context, self.source()).expect("context includes into M"),
            Morphism::inclusion(&self.context, self.target()).expect("context includes into N"),
        )
    }
}

/// Apply a rule along a mono matching of its left-hand side.
pub fn apply_dpo(rule: &Rule, matching: &Morphism) -> Result<Transition, NoContext> {
    debug_assert_eq!(matching.source(), rule.left());
    if !matching.is_mono() {
        return Err(NoContext::MatchNotMono);
    }
    let m = matching.target();
    let l = &rule.span.left;
    let r = &rule.span.right;
    let lhs = rule.left();
    let k = rule.interface();

    // The pushout complement D: remove the matched image of everything L
    // does not preserve.
    let mut d = m.clone();
    let deleted_edges: Vec<Edge> = lhs
        .edges()
        .filter(|e| {
            let (n1, n2) = e.endpoints();
            // An L edge is preserved when it is the image of a K edge.
            !k.edges().any(|ke| {
                Edge::new(l.apply_node(ke.endpoints().0).unwrap(), l.apply_node(ke.endpoints().1).unwrap())
                    == Edge::new(n1, n2)
            })
        })
        .map(|e| matching.apply_edge(e).unwrap())
        .collect();
    for e in &deleted_edges {
        d.remove_edge(*e);
    }
    let preserved_nodes: std::collections::BTreeSet<(AgentId, u32)> = k
        .nodes()
        .map(|(a, i)| match l.apply_node(Node::Site(a, i)).unwrap() {
            Node::Site(b, j) => (b, j),
            Node::Free => unreachable!(),
        })
        .collect();
    for (a, i) in lhs.nodes() {
        if !preserved_nodes.contains(&(a, i)) {
            let (b, j) = match matching.apply_node(Node::Site(a, i)).unwrap() {
                Node::Site(b, j) => (b, j),
                Node::Free => unreachable!(),
            };
            if d.edge_at(Node::Site(b, j)).is_some() {
                // A deleted node still carries an edge of M that the rule
                // does not delete.
                return Err(NoContext::DanglingEdge {
                    agent: b,
                    agent_type: d.agent_type(b).unwrap().clone(),
                });
            }
            d.remove_node(b, j);
        }
    }
    let preserved_agents: std::collections::BTreeSet<AgentId> =
        k.agent_ids().map(|a| l.apply(a).unwrap()).collect();
    for a in lhs.agent_ids() {
        if !preserved_agents.contains(&a) {
            let b = matching.apply(a).unwrap();
            if let Some((_, i)) = d.nodes().find(|&(x, _)| x == b) {
                if d.edge_at(Node::Site(b, i)).is_some() {
                    return Err(NoContext::DanglingEdge {
                        agent: b,
                        agent_type: d.agent_type(b).unwrap().clone(),
                    });
                }
            }
            // Any remaining node of a deleted agent dangles.
            if d.nodes().any(|(x, _)| x == b) {
                return Err(NoContext::DanglingEdge {
                    agent: b,
                    agent_type: d.agent_type(b).unwrap().clone(),
                });
            }
            d.remove_agent(b);
        }
    }

    // K -> D through the matching.
    let kd_map: BTreeMap<AgentId, AgentId> = k
        .agent_ids()
        .map(|a| (a, matching.apply(l.apply(a).unwrap()).unwrap()))
        .collect();
    let kd = Morphism::new(k.clone(), d.clone(), kd_map).expect("K includes into the context");

    // The right-hand pushout N = D + (R minus the interface image), built
    // over D's identifiers with fresh ones for created agents.
    let mut n = d.clone();
    let mut co_map: BTreeMap<AgentId, AgentId> = BTreeMap::new();
    for a in k.agent_ids() {
        co_map.insert(r.apply(a).unwrap(), kd.apply(a).unwrap());
    }
    let mut next = m.max_agent_id().map_or(0, |x| x + 1);
    for (a, ty) in rule.right().agents() {
        if !co_map.contains_key(&a) {
            let id = AgentId(next);
            next += 1;
            n.add_agent(id, ty.clone());
            co_map.insert(a, id);
        }
    }
    for (a, i) in rule.right().nodes() {
        if !n.has_node(co_map[&a], i) {
            n.add_node(co_map[&a], i);
        }
    }
    let tr = |node: Node| match node {
        Node::Free => Node::Free,
        Node::Site(a, i) => Node::Site(co_map[&a], i),
    };
    for e in rule.right().edges() {
        let (n1, n2) = e.endpoints();
        let img = Edge::new(tr(n1), tr(n2));
        if n.has_edge(img) {
            continue;
        }
        for node in [img.endpoints().0, img.endpoints().1] {
            if node == Node::Free {
                continue;
            }
            if let Some(other) = n.edge_at(node) {
                if other != img {
                    let (a, i) = match node {
                        Node::Site(a, i) => (a, i),
                        Node::Free => unreachable!(),
                    };
                    return Err(NoContext::RightConflict(NoPushout {
                        obstructions: vec![crate::catops::PushoutObstruction {
                            agent_type: n.agent_type(a).unwrap().clone(),
                            site: i,
                            partners: vec![],
                        }],
                    }));
                }
            }
        }
        n.add_edge(img.endpoints().0, img.endpoints().1);
    }
    let comatching =
        Morphism::new(rule.right().clone(), n.clone(), co_map).expect("comatching R -> N");

    // Certify both squares really are pushouts by recomputing the gluings.
    debug_assert!({
        let dm = Morphism::inclusion(&d, m).expect("D includes into M");
        let po = pushout(&Span::new(kd.clone(), rule.span.left.clone())).expect("left gluing");
        crate::sitegraph::are_isomorphic(po.target(), m) && {
            let _ = dm;
            true
        }
    });
    debug_assert!({
        let po = pushout(&Span::new(kd.clone(), rule.span.right.clone())).expect("right gluing");
        crate::sitegraph::are_isomorphic(po.target(), &n)
    });

    Ok(Transition {
        rule: rule.clone(),
        matching: matching.clone(),
        comatching,
        context: d,
    })
}

/// All rewrites of a graph by a rule, one per mono matching that admits a
/// context.
pub fn applications(rule: &Rule, g: &SiteGraph) -> Vec<Transition> {
    crate::morphism::enumerate_monos(rule.left(), g)
        .into_iter()
        .filter_map(|m| apply_dpo(rule, &m).ok())
        .collect()
}

/// A sequence of transitions chained on the nose: each target is the next
/// source, identifiers included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: SiteGraph,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("transition {0} does not start at the previous state")]
    Mismatched(usize),
}

impl Trace {
    pub fn new(initial: SiteGraph, transitions: Vec<Transition>) -> Result<Trace, TraceError> {
        let t = Trace { initial, transitions };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let mut state = &self.initial;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.source() != state {
                return Err(TraceError::Mismatched(i));
            }
            state = t.target();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// The state reached after the first `i` transitions.
    pub fn state(&self, i: usize) -> &SiteGraph {
        if i == 0 {
            &self.initial
        } else {
            self.transitions[i - 1].target()
        }
    }

    pub fn final_state(&self) -> &SiteGraph {
        self.state(self.len())
    }

    /// The composed mix spanning states `from` (inclusive) to `to`
    /// (exclusive upper transition index): a span from state `from` to
    /// state `to`.
    pub fn composed_mix(&self, from: usize, to: usize) -> Span {
        assert!(from <= to && to <= self.len());
        let mut span = Span::identity(self.state(from));
        for t in &self.transitions[from..to] {
            span = crate::catops::compose_spans(&span, &t.mix());
        }
        span
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::enumerate_monos;

    fn ty(s: &str) -> AgentType {
        AgentType::new(s)
    }

    /// A(1[.]), X(1[.]) -> A(1[x.1]), X(1[a.1])
    fn bind_rule() -> Rule {
        let mut lhs = SiteGraph::empty();
        lhs.add_agent(AgentId(0), ty("A"));
        lhs.add_agent(AgentId(1), ty("X"));
        lhs.add_node(AgentId(0), 0);
        lhs.add_node(AgentId(1), 0);
        lhs.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        lhs.add_edge(Node::Site(AgentId(1), 0), Node::Free);
        let mut rhs = SiteGraph::empty();
        rhs.add_agent(AgentId(0), ty("A"));
        rhs.add_agent(AgentId(1), ty("X"));
        rhs.add_node(AgentId(0), 0);
        rhs.add_node(AgentId(1), 0);
        rhs.add_edge(Node::Site(AgentId(0), 0), Node::Site(AgentId(1), 0));
        let mut k = SiteGraph::empty();
        k.add_agent(AgentId(0), ty("A"));
        k.add_agent(AgentId(1), ty("X"));
        k.add_node(AgentId(0), 0);
        k.add_node(AgentId(1), 0);
        let l = Morphism::inclusion(&k, &lhs).unwrap();
        let r = Morphism::inclusion(&k, &rhs).unwrap();
        Rule::new("bind", Span::new(l, r)).unwrap()
    }

    fn delete_a_rule() -> Rule {
        let mut lhs = SiteGraph::empty();
        lhs.add_agent(AgentId(0), ty("A"));
        let k = SiteGraph::empty();
        let l = Morphism::new(k.clone(), lhs, BTreeMap::new()).unwrap();
        let mut rhs = SiteGraph::empty();
        let _ = &mut rhs;
        let r = Morphism::new(k, rhs, BTreeMap::new()).unwrap();
        Rule::new("delA", Span::new(l, r)).unwrap()
    }

    fn mixture() -> SiteGraph {
        let mut g = SiteGraph::empty();
        g.add_agent(AgentId(0), ty("A"));
        g.add_agent(AgentId(1), ty("X"));
        g.add_node(AgentId(0), 0);
        g.add_node(AgentId(1), 0);
        g.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        g.add_edge(Node::Site(AgentId(1), 0), Node::Free);
        g
    }

    #[test]
    fn one_sided_constraint_rejected() {
        // A(1[x.1]), X(1[a.1]) -> A(1), X(1): the bond is dropped with no
        // replacement constraint at the preserved sites.
        let mut lhs = SiteGraph::empty();
        lhs.add_agent(AgentId(0), ty("A"));
        lhs.add_agent(AgentId(1), ty("X"));
        lhs.add_node(AgentId(0), 0);
        lhs.add_node(AgentId(1), 0);
        lhs.add_edge(Node::Site(AgentId(0), 0), Node::Site(AgentId(1), 0));
        let mut rhs = SiteGraph::empty();
        rhs.add_agent(AgentId(0), ty("A"));
        rhs.add_agent(AgentId(1), ty("X"));
        rhs.add_node(AgentId(0), 0);
        rhs.add_node(AgentId(1), 0);
        let mut k = rhs.clone();
        let _ = &mut k;
        let l = Morphism::inclusion(&k, &lhs).unwrap();
        let r = Morphism::inclusion(&k, &rhs).unwrap();
        assert!(matches!(
            Rule::new("forget", Span::new(l, r)),
            Err(RuleError::OneSidedConstraint { .. })
        ));
    }

    #[test]
    fn bind_rewrites_free_pair() {
        let rule = bind_rule();
        let g = mixture();
        let ts = applications(&rule, &g);
        assert_eq!(ts.len(), 1);
        let n = ts[0].target();
        assert!(n.has_edge(Edge::new(
            Node::Site(AgentId(0), 0),
            Node::Site(AgentId(1), 0)
        )));
        assert_eq!(ts[0].context.edges().count(), 0);
    }

    #[test]
    fn dangling_edge_blocks_deletion() {
        let rule = delete_a_rule();
        let mut g = SiteGraph::empty();
        g.add_agent(AgentId(0), ty("A"));
        g.add_agent(AgentId(1), ty("X"));
        g.add_node(AgentId(0), 0);
        g.add_node(AgentId(1), 0);
        g.add_edge(Node::Site(AgentId(0), 0), Node::Site(AgentId(1), 0));
        let m = enumerate_monos(rule.left(), &g).remove(0);
        assert!(matches!(
            apply_dpo(&rule, &m),
            Err(NoContext::DanglingEdge { .. })
        ));
    }

    #[test]
    fn deletion_of_isolated_agent_succeeds() {
        let rule = delete_a_rule();
        let mut g = SiteGraph::empty();
        g.add_agent(AgentId(3), ty("A"));
        let m = enumerate_monos(rule.left(), &g).remove(0);
        let t = apply_dpo(&rule, &m).unwrap();
        assert!(t.target().is_empty());
    }

    #[test]
    fn created_agents_get_fresh_identifiers() {
        // -> A(1[.])
        let k = SiteGraph::empty();
        let mut rhs = SiteGraph::empty();
        rhs.add_agent(AgentId(0), ty("A"));
        rhs.add_node(AgentId(0), 0);
        rhs.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        let l = Morphism::new(k.clone(), SiteGraph::empty(), BTreeMap::new()).unwrap();
        let r = Morphism::new(k, rhs, BTreeMap::new()).unwrap();
        let rule = Rule::new("mkA", Span::new(l, r)).unwrap();
        let g = mixture();
        let ts = applications(&rule, &g);
        assert_eq!(ts.len(), 1);
        assert!(ts[0].target().has_agent(AgentId(2)));
        assert_eq!(ts[0].target().agent_count(), 3);
    }

    #[test]
    fn mix_legs_are_inclusions() {
        let rule = bind_rule();
        let g = mixture();
        let t = applications(&rule, &g).remove(0);
        let mix = t.mix();
        for a in t.context.agent_ids() {
            assert_eq!(mix.left.apply(a), Some(a));
            assert_eq!(mix.right.apply(a), Some(a));
        }
    }

    #[test]
    fn trace_rejects_mismatched_states() {
        let rule = bind_rule();
        let g = mixture();
        let t = applications(&rule, &g).remove(0);
        assert!(matches!(
            Trace::new(SiteGraph::empty(), vec![t]),
            Err(TraceError::Mismatched(0))
        ));
    }

    #[test]
    fn composed_mix_over_empty_range_is_identity() {
        let rule = bind_rule();
        let g = mixture();
        let t = applications(&rule, &g).remove(0);
        let trace = Trace::new(g.clone(), vec![t]).unwrap();
        let s = trace.composed_mix(0, 0);
        assert_eq!(s.apex(), &g);
        let full = trace.composed_mix(0, 1);
        assert!(crate::sitegraph::are_isomorphic(full.apex(), &trace.transitions[0].context));
    }
}
