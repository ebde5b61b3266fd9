//! Causal analysis of traces: independence of rewrites, and the enablement
//! and prevention relations between the events of a trace.

use serde::{Deserialize, Serialize};

use crate::catops::span_to_partial;
use crate::influence::InfluenceWitness;
use crate::morphism::{Morphism, Span};
use crate::rewrite::{Trace, Transition};
use crate::sitegraph::{AgentId, Edge, SiteGraph};

/// A piece of structure matched by a rule: used to report why two events
/// are causally related.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Item {
    Agent(AgentId),
    Node(AgentId, u32),
    Edge(Edge),
}

fn image_items(m: &Morphism) -> Vec<Item> {
    let img = m.image();
    let mut items: Vec<Item> = img.agent_ids().map(Item::Agent).collect();
    items.extend(img.nodes().map(|(a, i)| Item::Node(a, i)));
    items.extend(img.edges().map(Item::Edge));
    items
}

fn contains(g: &SiteGraph, item: Item) -> bool {
    match item {
        Item::Agent(a) => g.has_agent(a),
        Item::Node(a, i) => g.has_node(a, i),
        Item::Edge(e) => g.has_edge(e),
    }
}

fn transport(p: &crate::catops::PartialMorphism, item: Item) -> Option<Item> {
    match item {
        Item::Agent(a) => p.apply(a).map(Item::Agent),
        Item::Node(a, i) => {
            if p.domain.has_node(a, i) {
                p.apply(a).map(|b| Item::Node(b, i))
            } else {
                None
            }
        }
        Item::Edge(e) => p.apply_edge(e).map(Item::Edge),
    }
}

/// Two consecutive transitions commute when neither needs what the other
/// touches: the second matching lands in the first context, and the first
/// comatching lands in the second context.
pub fn sequentially_independent(t1: &Transition, t2: &Transition) -> bool {
    assert_eq!(t1.target(), t2.source(), "transitions are not consecutive");
    image_items(&t2.matching).iter().all(|&x| contains(&t1.context, x))
        && image_items(&t1.comatching).iter().all(|&x| contains(&t2.context, x))
}

/// Two transitions from the same state are parallel independent when each
/// matching lands in the other's preserved context.
pub fn parallel_independent(t1: &Transition, t2: &Transition) -> bool {
    assert_eq!(t1.source(), t2.source(), "transitions have different sources");
    image_items(&t1.matching).iter().all(|&x| contains(&t2.context, x))
        && image_items(&t2.matching).iter().all(|&x| contains(&t1.context, x))
}

/// Does the square built from an influence overlap commute? `early` and
/// `late` embed the overlap's two feet into the states bridged by the
/// partial morphism; every agent, node and edge of the overlap must
/// transport through it and agree with the late embedding.
fn overlap_commutes(
    overlap: &Span,
    early: &Morphism,
    late: &Morphism,
    through: &crate::catops::PartialMorphism,
) -> bool {
    let apex = overlap.apex();
    let to_early = |a: AgentId| early.apply(overlap.left.apply(a).unwrap()).unwrap();
    let to_late = |a: AgentId| late.apply(overlap.right.apply(a).unwrap()).unwrap();
    for a in apex.agent_ids() {
        if through.apply(to_early(a)) != Some(to_late(a)) {
            return false;
        }
    }
    for (a, i) in apex.nodes() {
        if transport(through, Item::Node(to_early(a), i)) != Some(Item::Node(to_late(a), i)) {
            return false;
        }
    }
    for e in apex.edges() {
        let tr = |n: crate::sitegraph::Node, f: &dyn Fn(AgentId) -> AgentId| match n {
            crate::sitegraph::Node::Free => crate::sitegraph::Node::Free,
            crate::sitegraph::Node::Site(a, i) => crate::sitegraph::Node::Site(f(a), i),
        };
        let (n1, n2) = e.endpoints();
        let e_early = Edge::new(tr(n1, &to_early), tr(n2, &to_early));
        let e_late = Edge::new(tr(n1, &to_late), tr(n2, &to_late));
        if transport(through, Item::Edge(e_early)) != Some(Item::Edge(e_late)) {
            return false;
        }
    }
    true
}

/// Does transition `i` enable transition `j` (`i < j`, 0-based)? True when
/// some influence overlap between the right-hand side of rule `i` and the
/// left-hand side of rule `j` is realized in the trace: embedded by the
/// comatching of `i` and the matching of `j`, it commutes with the partial
/// morphism composed from the intermediate rewrites.
pub fn enables(trace: &Trace, i: usize, j: usize) -> bool {
    !enabling_witnesses(trace, i, j).is_empty()
}

/// The influence overlaps realized between transitions `i` and `j`
/// (`i < j`), witnessing that `i` enables `j`.
pub fn enabling_witnesses(trace: &Trace, i: usize, j: usize) -> Vec<InfluenceWitness> {
    assert!(i < j && j < trace.len());
    let ti = &trace.transitions[i];
    let tj = &trace.transitions[j];
    let witnesses = crate::influence::positive_influences(&ti.rule, &tj.rule);
    if witnesses.is_empty() {
        return vec![];
    }
    // Span from state i+1 (the result of transition i) to state j.
    let phi = trace.composed_mix(i + 1, j);
    let fwd = span_to_partial(&phi).expect("mix legs are monos");
    witnesses
        .into_iter()
        .filter(|w| overlap_commutes(&w.overlap, &ti.comatching, &tj.matching, &fwd))
        .collect()
}

/// Does transition `j` prevent transition `i` (`i < j`)? True when some
/// negative-influence overlap of rule `j` on rule `i` is realized in the
/// trace: embedded by the two matchings, it commutes with the partial
/// morphism composed from transitions `i` through `j - 1`.
pub fn prevents(trace: &Trace, j: usize, i: usize) -> bool {
    !preventing_witnesses(trace, j, i).is_empty()
}

/// The negative-influence overlaps realized between transitions `j` and
/// `i` (`i < j`), witnessing that `j` prevents `i`.
pub fn preventing_witnesses(trace: &Trace, j: usize, i: usize) -> Vec<InfluenceWitness> {
    assert!(i < j && j < trace.len());
    let ti = &trace.transitions[i];
    let tj = &trace.transitions[j];
    let witnesses = crate::influence::negative_influences(&tj.rule, &ti.rule);
    if witnesses.is_empty() {
        return vec![];
    }
    let q = trace.composed_mix(i, j);
    let fwd = span_to_partial(&q).expect("mix legs are monos");
    witnesses
        .into_iter()
        .filter(|w| {
            // The overlap's left foot sits in the preventer's left-hand
            // side, its right foot in the prevented one's.
            let reversed = Span::new(w.overlap.right.clone(), w.overlap.left.clone());
            overlap_commutes(&reversed, &ti.matching, &tj.matching, &fwd)
        })
        .collect()
}

/// A prevention between two events of a trace: the later `preventer`
/// destroys something the earlier `prevented` relied on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prevention {
    pub preventer: usize,
    pub prevented: usize,
}

/// All enablement pairs `(i, j)` with `i` enabling `j`.
pub fn enablements(trace: &Trace) -> Vec<(usize, usize)> {
    let n = trace.len();
    let mut out = vec![];
    for i in 0..n {
        for j in i + 1..n {
            if enables(trace, i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// All preventions of the trace.
pub fn preventions(trace: &Trace) -> Vec<Prevention> {
    let n = trace.len();
    let mut out = vec![];
    for i in 0..n {
        for j in i + 1..n {
            if prevents(trace, j, i) {
                out.push(Prevention { preventer: j, prevented: i });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::enumerate_monos;
    use crate::rewrite::{apply_dpo, Rule};
    use crate::sitegraph::{AgentType, Node};
    use std::collections::BTreeMap;

    fn ty(s: &str) -> AgentType {
        AgentType::new(s)
    }

    fn mk_rule(name: &str, lhs: SiteGraph, k: SiteGraph, rhs: SiteGraph) -> Rule {
        Rule::new(
            name,
            Span::new(
                Morphism::inclusion(&k, &lhs).unwrap(),
                Morphism::inclusion(&k, &rhs).unwrap(),
            ),
        )
        .unwrap()
    }

    /// bind(T, U): T.s free, U.s free -> bound.
    fn bind(t: &str, ts: u32, u: &str, us: u32, tn: u32, un: u32) -> Rule {
        let mut lhs = SiteGraph::empty();
        lhs.add_agent(AgentId(0), ty(t));
        lhs.add_agent(AgentId(1), ty(u));
        lhs.add_node(AgentId(0), ts);
        lhs.add_node(AgentId(1), us);
        lhs.add_edge(Node::Site(AgentId(0), ts), Node::Free);
        lhs.add_edge(Node::Site(AgentId(1), us), Node::Free);
        let mut rhs = SiteGraph::empty();
        rhs.add_agent(AgentId(0), ty(t));
        rhs.add_agent(AgentId(1), ty(u));
        rhs.add_node(AgentId(0), ts);
        rhs.add_node(AgentId(1), us);
        rhs.add_edge(Node::Site(AgentId(0), ts), Node::Site(AgentId(1), us));
        let mut k = SiteGraph::empty();
        k.add_agent(AgentId(0), ty(t));
        k.add_agent(AgentId(1), ty(u));
        k.add_node(AgentId(0), ts);
        k.add_node(AgentId(1), us);
        let _ = (tn, un);
        mk_rule(&format!("bind_{}{}", t, u), lhs, k, rhs)
    }

    fn step(rule: &Rule, g: &SiteGraph) -> Transition {
        let m = enumerate_monos(rule.left(), g)
            .into_iter()
            .find(|m| apply_dpo(rule, m).is_ok())
            .expect("an applicable matching");
        apply_dpo(rule, &m).unwrap()
    }

    #[test]
    fn creation_enables_use() {
        // -> A(1[.]) then bind A-X: the second needs the created A.
        let k = SiteGraph::empty();
        let mut rhs = SiteGraph::empty();
        rhs.add_agent(AgentId(0), ty("A"));
        rhs.add_node(AgentId(0), 0);
        rhs.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        let mk_a = Rule::new(
            "mk_a",
            Span::new(
                Morphism::new(k.clone(), SiteGraph::empty(), BTreeMap::new()).unwrap(),
                Morphism::new(k, rhs, BTreeMap::new()).unwrap(),
            ),
        )
        .unwrap();
        let bind_ax = bind("A", 0, "X", 0, 1, 1);
        let mut g0 = SiteGraph::empty();
        g0.add_agent(AgentId(0), ty("X"));
        g0.add_node(AgentId(0), 0);
        g0.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        let t1 = step(&mk_a, &g0);
        let t2 = step(&bind_ax, t1.target());
        let trace = Trace::new(g0, vec![t1, t2]).unwrap();
        assert!(enables(&trace, 0, 1));
        assert!(!sequentially_independent(&trace.transitions[0], &trace.transitions[1]));
        assert!(preventions(&trace).is_empty());
    }

    #[test]
    fn unrelated_steps_are_independent() {
        // Two binds on disjoint agent pairs.
        let bind_ax = bind("A", 0, "X", 0, 1, 1);
        let mut g0 = SiteGraph::empty();
        for (i, t) in ["A", "X", "A", "X"].iter().enumerate() {
            g0.add_agent(AgentId(i as u32), ty(t));
            g0.add_node(AgentId(i as u32), 0);
            g0.add_edge(Node::Site(AgentId(i as u32), 0), Node::Free);
        }
        let t1 = step(&bind_ax, &g0);
        // Pick a second application on the untouched pair.
        let t2 = crate::rewrite::applications(&bind_ax, t1.target())
            .into_iter()
            .find(|t| sequentially_independent(&t1, t))
            .expect("a disjoint application");
        let trace = Trace::new(g0, vec![t1, t2]).unwrap();
        assert!(enablements(&trace).is_empty());
        assert!(preventions(&trace).is_empty());
    }

    #[test]
    fn consumption_is_a_prevention() {
        // bind A-X twice competing for the same A is impossible; instead:
        // t1 tests A.1 free (and binds A.2); t2 binds A.1, destroying the
        // free edge t1 tested.
        let mut lhs = SiteGraph::empty();
        lhs.add_agent(AgentId(0), ty("A"));
        lhs.add_node(AgentId(0), 0);
        lhs.add_node(AgentId(0), 1);
        lhs.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        lhs.add_edge(Node::Site(AgentId(0), 1), Node::Free);
        let mut rhs = lhs.clone();
        rhs.remove_edge(Edge::new(Node::Site(AgentId(0), 1), Node::Free));
        let mut b = SiteGraph::empty();
        b.add_agent(AgentId(1), ty("B"));
        b.add_node(AgentId(1), 0);
        for (a, tyb) in b.agents() {
            rhs.add_agent(a, tyb.clone());
        }
        rhs.add_node(AgentId(1), 0);
        rhs.add_edge(Node::Site(AgentId(0), 1), Node::Site(AgentId(1), 0));
        let mut k = SiteGraph::empty();
        k.add_agent(AgentId(0), ty("A"));
        k.add_node(AgentId(0), 0);
        k.add_node(AgentId(0), 1);
        k.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        let t1_rule = mk_rule("t1", lhs, k, rhs);

        // t2: A(1[.]) , X(1[.]) -> bound.
        let t2_rule = bind("A", 0, "X", 0, 2, 1);

        let mut g0 = SiteGraph::empty();
        g0.add_agent(AgentId(0), ty("A"));
        g0.add_node(AgentId(0), 0);
        g0.add_node(AgentId(0), 1);
        g0.add_edge(Node::Site(AgentId(0), 0), Node::Free);
        g0.add_edge(Node::Site(AgentId(0), 1), Node::Free);
        g0.add_agent(AgentId(1), ty("X"));
        g0.add_node(AgentId(1), 0);
        g0.add_edge(Node::Site(AgentId(1), 0), Node::Free);

        let t1 = step(&t1_rule, &g0);
        let t2 = step(&t2_rule, t1.target());
        let trace = Trace::new(g0, vec![t1, t2]).unwrap();
        assert_eq!(
            preventions(&trace),
            vec![Prevention { preventer: 1, prevented: 0 }]
        );
    }

    #[test]
    fn delete_and_recreate_does_not_enable() {
        // t1 unbinds A-X, t2 rebinds it, t3 unbinds again. t3's matching
        // uses the bond created by t2, not anything surviving from before
        // t1, so only t2 enables t3.
        let bind_ax = bind("A", 0, "X", 0, 1, 1);
        let unbind_ax = Rule::new(
            "unbind_ax",
            Span::new(bind_ax.span.right.clone(), bind_ax.span.left.clone()),
        )
        .unwrap();
        let mut g0 = SiteGraph::empty();
        g0.add_agent(AgentId(0), ty("A"));
        g0.add_agent(AgentId(1), ty("X"));
        g0.add_node(AgentId(0), 0);
        g0.add_node(AgentId(1), 0);
        g0.add_edge(Node::Site(AgentId(0), 0), Node::Site(AgentId(1), 0));
        let t1 = step(&unbind_ax, &g0);
        let t2 = step(&bind_ax, t1.target());
        let t3 = step(&unbind_ax, t2.target());
        let trace = Trace::new(g0, vec![t1, t2, t3]).unwrap();
        let en = enablements(&trace);
        assert!(en.contains(&(0, 1)));
        assert!(en.contains(&(1, 2)));
        assert!(!en.contains(&(0, 2)));
    }

    #[test]
    fn parallel_independence_of_disjoint_matches() {
        let bind_ax = bind("A", 0, "X", 0, 1, 1);
        let mut g0 = SiteGraph::empty();
        for (i, t) in ["A", "X", "A", "X"].iter().enumerate() {
            g0.add_agent(AgentId(i as u32), ty(t));
            g0.add_node(AgentId(i as u32), 0);
            g0.add_edge(Node::Site(AgentId(i as u32), 0), Node::Free);
        }
        let apps = crate::rewrite::applications(&bind_ax, &g0);
        assert_eq!(apps.len(), 4);
        let disjoint = apps
            .iter()
            .flat_map(|a| apps.iter().map(move |b| (a, b)))
            .filter(|(a, b)| a != b && parallel_independent(a, b))
            .count();
        // Of 12 ordered pairs, 8 share an agent; 4 are disjoint.
        assert_eq!(disjoint, 4);
    }
}
